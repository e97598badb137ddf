"""Decomposed Q-network over abstract patterns and entity types.

A shared two-layer trunk reads the encoded state and feeds two heads: one
logit per abstract pattern and one per entity type. The Q-value of a
concrete desire is the logit of its pattern plus the mean logit of its
involved types. Softmaxes of the heads drive greedy selection.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .desires import PATTERNS, AbstractPattern, DesireInstance
from .encoder import (
    HIDDEN,
    ShapeMismatch,
    SimplifiedGraph,
    Vocabulary,
    encoder_backward,
    encoder_forward,
    init_encoder_params,
)

N_PATTERNS = len(PATTERNS)
GAMMA = 0.99
LEARNING_RATE = 1e-4
TAU = 0.005
BATCH_SIZE = 4
REPLAY_CAPACITY = 500
EPS_START = 1.0
EPS_END = 0.05
EPS_DECAY_UPDATES = 40

QNET_KEYS = ("trunk.W1", "trunk.b1", "trunk.W2", "trunk.b2",
             "abstract.W", "abstract.b", "types.W", "types.b")


class NoAvailableAction(ValueError):
    pass


class UnknownEntityType(KeyError):
    pass


class EmptyBatch(ValueError):
    pass


class CheckpointCorrupt(ValueError):
    pass


def softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - np.max(x))
    return z / z.sum()


def init_qnet_params(n_types: int, rng: np.random.Generator, hidden: int = HIDDEN,
                     zero_heads: bool = False) -> dict[str, np.ndarray]:
    bound = np.sqrt(6.0 / hidden)
    params = {
        "trunk.W1": rng.uniform(-bound, bound, (hidden, hidden)),
        "trunk.b1": np.zeros(hidden),
        "trunk.W2": rng.uniform(-bound, bound, (hidden, hidden)),
        "trunk.b2": np.zeros(hidden),
        "abstract.W": rng.uniform(-bound, bound, (hidden, N_PATTERNS)),
        "abstract.b": np.zeros(N_PATTERNS),
        "types.W": rng.uniform(-bound, bound, (hidden, n_types)),
        "types.b": np.zeros(n_types),
    }
    if zero_heads:
        for k in ("abstract.W", "types.W"):
            params[k][:] = 0.0
    return params


def init_params(vocab_size: int, n_types: int, seed: int = 0, hidden: int = HIDDEN) -> dict[str, np.ndarray]:
    """Encoder and Q-network parameters in one flat dict."""
    rng = np.random.default_rng(seed)
    params = init_encoder_params(vocab_size, rng, hidden)
    params.update(init_qnet_params(n_types, rng, hidden))
    return params


def qnet_forward(params: dict, state: np.ndarray):
    """(abstract_logits, type_logits, cache)."""
    state = np.asarray(state, dtype=float)
    if state.ndim != 1 or state.shape[0] != params["trunk.W1"].shape[0]:
        raise ShapeMismatch(f"state of shape {state.shape}, expected ({params['trunk.W1'].shape[0]},)")
    pre1 = state @ params["trunk.W1"] + params["trunk.b1"]
    h1 = np.maximum(pre1, 0.0)
    pre2 = h1 @ params["trunk.W2"] + params["trunk.b2"]
    h2 = np.maximum(pre2, 0.0)
    abstract = h2 @ params["abstract.W"] + params["abstract.b"]
    types = h2 @ params["types.W"] + params["types.b"]
    return abstract, types, (state, pre1, h1, pre2, h2)


def forward(params: dict, state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    abstract, types, _ = qnet_forward(params, state)
    return abstract, types


def qnet_backward(params: dict, cache, d_abstract: np.ndarray, d_types: np.ndarray, grads: dict) -> np.ndarray:
    """Accumulate head/trunk gradients; returns d(loss)/d(state)."""
    state, pre1, h1, pre2, h2 = cache
    grads["abstract.W"] += np.outer(h2, d_abstract)
    grads["abstract.b"] += d_abstract
    grads["types.W"] += np.outer(h2, d_types)
    grads["types.b"] += d_types
    dh2 = params["abstract.W"] @ d_abstract + params["types.W"] @ d_types
    dpre2 = dh2 * (pre2 > 0)
    grads["trunk.W2"] += np.outer(h1, dpre2)
    grads["trunk.b2"] += dpre2
    dpre1 = (params["trunk.W2"] @ dpre2) * (pre1 > 0)
    grads["trunk.W1"] += np.outer(state, dpre1)
    grads["trunk.b1"] += dpre1
    return params["trunk.W1"] @ dpre1


def _type_indices(involved, type_index: dict[str, int]) -> list[int]:
    try:
        return sorted(type_index[t] for t in involved)
    except KeyError as exc:
        raise UnknownEntityType(exc.args[0]) from None


def score_specific(desire: DesireInstance, type_softmax, type_index: dict[str, int] | None = None) -> float:
    """Mean softmax value of the desire's involved types.

    ``type_softmax`` is either a mapping type -> value or an array indexed
    through ``type_index``. A desire without typed entities scores 0."""
    if not desire.involved_types:
        return 0.0
    if isinstance(type_softmax, dict):
        try:
            return float(np.mean([type_softmax[t] for t in sorted(desire.involved_types)]))
        except KeyError as exc:
            raise UnknownEntityType(exc.args[0]) from None
    idx = _type_indices(desire.involved_types, type_index)
    return float(np.mean(np.asarray(type_softmax)[idx]))


def q_value(abstract_logits: np.ndarray, type_logits: np.ndarray, pattern: AbstractPattern,
            involved, type_index: dict[str, int]) -> float:
    q = abstract_logits[pattern.index]
    idx = _type_indices(involved, type_index)
    if idx:
        q += type_logits[idx].mean()
    return float(q)


def greedy_choice(abstract_logits: np.ndarray, type_logits: np.ndarray, desires: list[DesireInstance],
                  type_index: dict[str, int]) -> DesireInstance:
    """Masked abstract argmax, then best specific score; ties go to canonical order."""
    available = sorted({d.pattern.index for d in desires})
    probs = softmax(abstract_logits)
    best_pattern = max(available, key=lambda i: (probs[i], -i))
    candidates = sorted(d for d in desires if d.pattern.index == best_pattern)
    type_probs = softmax(type_logits) if len(type_logits) else type_logits
    scores = [score_specific(d, type_probs, type_index) for d in candidates]
    return candidates[int(np.argmax(scores))]


def select_action(params: dict, state: np.ndarray, desires: list[DesireInstance], epsilon: float,
                  rng: random.Random, type_index: dict[str, int]) -> DesireInstance:
    if not desires:
        raise NoAvailableAction("no desire instances to choose from")
    if epsilon > 0 and rng.random() < epsilon:
        return desires[rng.randrange(len(desires))]
    abstract, types = forward(params, state)
    return greedy_choice(abstract, types, desires, type_index)


@dataclass
class Transition:
    graph: SimplifiedGraph
    pattern: AbstractPattern
    involved_types: frozenset[str]
    reward: float
    next_graph: SimplifiedGraph
    next_actions: list[tuple[AbstractPattern, frozenset[str]]] = field(default_factory=list)
    terminal: bool = False

    def __post_init__(self):
        if not np.isfinite(self.reward):
            raise ValueError(f"non-finite reward {self.reward}")


class ReplayBuffer:
    """FIFO ring buffer with uniform sampling."""

    def __init__(self, capacity: int = REPLAY_CAPACITY):
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def push(self, transition: Transition) -> None:
        self._items.append(transition)

    def sample(self, batch: int, rng: random.Random) -> list[Transition]:
        if batch > len(self._items):
            raise EmptyBatch(f"cannot sample {batch} from {len(self._items)} transitions")
        return rng.sample(list(self._items), batch)


def zeros_like(params: dict) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def td_target(target_params: dict, transition: Transition, vocab: Vocabulary,
              type_index: dict[str, int], gamma: float = GAMMA) -> float:
    if transition.terminal or not transition.next_actions:
        return float(transition.reward)
    state, _ = encoder_forward(transition.next_graph, target_params, vocab)
    abstract, types, _ = qnet_forward(target_params, state)
    best = max(q_value(abstract, types, p, t, type_index) for p, t in transition.next_actions)
    return float(transition.reward + gamma * best)


def td_loss_and_grads(params: dict, batch: list[Transition], targets: list[float], vocab: Vocabulary,
                      type_index: dict[str, int]) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared TD error over the batch and its parameter gradients."""
    if not batch:
        raise EmptyBatch("td update needs at least one transition")
    grads = zeros_like(params)
    n = len(batch)
    loss = 0.0
    for tr, y in zip(batch, targets):
        state, enc_cache = encoder_forward(tr.graph, params, vocab)
        abstract, types, q_cache = qnet_forward(params, state)
        q = q_value(abstract, types, tr.pattern, tr.involved_types, type_index)
        diff = q - y
        loss += diff * diff / n
        dq = 2.0 * diff / n
        d_abstract = np.zeros_like(abstract)
        d_abstract[tr.pattern.index] = dq
        d_types = np.zeros_like(types)
        idx = _type_indices(tr.involved_types, type_index)
        for i in idx:
            d_types[i] += dq / len(idx)
        d_state = qnet_backward(params, q_cache, d_abstract, d_types, grads)
        encoder_backward(enc_cache, params, d_state, grads)
    return loss, grads


class Adam:
    def __init__(self, lr: float = LEARNING_RATE, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        for k, g in grads.items():
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def td_update(params: dict, target_params: dict, batch: list[Transition], vocab: Vocabulary,
              type_index: dict[str, int], gamma: float = GAMMA, lr: float = LEARNING_RATE,
              optimizer: Adam | None = None) -> float:
    """One Adam step on the mean squared TD error; updates ``params`` in place
    and returns the pre-step loss. A zero loss leaves params untouched."""
    targets = [td_target(target_params, tr, vocab, type_index, gamma) for tr in batch]
    loss, grads = td_loss_and_grads(params, batch, targets, vocab, type_index)
    if loss == 0.0:
        return loss
    if optimizer is None:
        optimizer = Adam(lr)
    optimizer.step(params, grads)
    return loss


def soft_update(target_params: dict, params: dict, tau: float = TAU) -> dict:
    """theta' <- tau * theta + (1 - tau) * theta', in place."""
    if target_params.keys() != params.keys():
        raise ShapeMismatch("parameter sets differ")
    for k, theta in params.items():
        if target_params[k].shape != theta.shape:
            raise ShapeMismatch(f"{k}: {target_params[k].shape} vs {theta.shape}")
        target_params[k] *= 1.0 - tau
        target_params[k] += tau * theta
    return target_params


def epsilon_at(updates: int, start: float = EPS_START, end: float = EPS_END,
               decay: int = EPS_DECAY_UPDATES) -> float:
    if decay <= 0:
        return end
    frac = min(updates / decay, 1.0)
    return start + (end - start) * frac


def save_tensors(params: dict, path, meta: dict | None = None) -> tuple[Path, Path]:
    """Flat little-endian float64 archive at ``path`` plus ``path``.json manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        chunks.append(arr.ravel())
    blob = np.concatenate(chunks) if chunks else np.zeros(0, dtype="<f8")
    path.write_bytes(blob.astype("<f8").tobytes())
    manifest = {"dtype": "float64-le", "order": "row-major", "tensors": entries, "meta": meta or {}}
    manifest_path = path.with_name(path.name + ".json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path, manifest_path


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    manifest_path = path.with_name(path.name + ".json")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        blob = np.frombuffer(path.read_bytes(), dtype="<f8")
    except (OSError, ValueError) as exc:
        raise CheckpointCorrupt(f"cannot read checkpoint {path}: {exc}") from exc
    params = {}
    for e in manifest.get("tensors", []):
        size = int(np.prod(e["shape"])) if e["shape"] else 1
        chunk = blob[e["offset"]:e["offset"] + size]
        if chunk.size != size:
            raise CheckpointCorrupt(f"tensor {e['name']} truncated in {path}")
        params[e["name"]] = chunk.astype(np.float64).reshape(e["shape"])
    return params, manifest.get("meta", {})


class Agent:
    """Online/target networks, optimizer, replay memory and exploration schedule."""

    def __init__(self, vocab: Vocabulary, types: list[str], seed: int = 0, hidden: int = HIDDEN,
                 lr: float = LEARNING_RATE, gamma: float = GAMMA, tau: float = TAU,
                 batch_size: int = BATCH_SIZE, capacity: int = REPLAY_CAPACITY,
                 eps_start: float = EPS_START, eps_end: float = EPS_END,
                 eps_decay: int = EPS_DECAY_UPDATES):
        self.vocab = vocab
        self.types = list(types)
        self.type_index = {t: i for i, t in enumerate(self.types)}
        self.params = init_params(len(vocab), len(self.types), seed, hidden)
        self.target = {k: v.copy() for k, v in self.params.items()}
        self.optimizer = Adam(lr)
        self.gamma, self.tau, self.batch_size = gamma, tau, batch_size
        self.eps_start, self.eps_end, self.eps_decay = eps_start, eps_end, eps_decay
        self.buffer = ReplayBuffer(capacity)
        self.rng = random.Random(seed)
        self.updates = 0
        self.seed = seed
        self.checkpoint_meta: dict = {}

    @property
    def epsilon(self) -> float:
        return epsilon_at(self.updates, self.eps_start, self.eps_end, self.eps_decay)

    def state(self, graph: SimplifiedGraph) -> np.ndarray:
        return encoder_forward(graph, self.params, self.vocab)[0]

    def q_heads(self, graph: SimplifiedGraph) -> tuple[np.ndarray, np.ndarray]:
        return forward(self.params, self.state(graph))

    def act(self, graph: SimplifiedGraph, desires: list[DesireInstance], greedy: bool = False) -> DesireInstance:
        eps = 0.0 if greedy else self.epsilon
        return select_action(self.params, self.state(graph), desires, eps, self.rng, self.type_index)

    def remember(self, transition: Transition) -> None:
        self.buffer.push(transition)

    def learn(self) -> float | None:
        """One td_update on a uniform minibatch plus a soft target update."""
        if len(self.buffer) == 0:
            return None
        batch = self.buffer.sample(min(self.batch_size, len(self.buffer)), self.rng)
        loss = td_update(self.params, self.target, batch, self.vocab, self.type_index,
                         self.gamma, optimizer=self.optimizer)
        soft_update(self.target, self.params, self.tau)
        self.updates += 1
        return loss

    def meta(self) -> dict:
        return {
            "updates": self.updates,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "rng_state": _rng_state_to_json(self.rng.getstate()),
            "vocab": self.vocab.to_list(),
            "types": self.types,
        }

    def save(self, path, extra: dict | None = None) -> Path:
        save_tensors(self.params, path, {**self.meta(), **(extra or {})})
        return Path(path)

    @classmethod
    def load(cls, path) -> "Agent":
        params, meta = load_tensors(path)
        try:
            vocab = Vocabulary.from_list(meta["vocab"])
            agent = cls(vocab, meta["types"], seed=meta.get("seed", 0),
                        hidden=params["dense.b"].shape[0])
        except (KeyError, ValueError) as exc:
            raise CheckpointCorrupt(f"checkpoint {path} lacks {exc}") from exc
        if set(params) != set(agent.params):
            raise CheckpointCorrupt(f"checkpoint {path} has unexpected tensors")
        for k, v in params.items():
            if v.shape != agent.params[k].shape:
                raise CheckpointCorrupt(f"tensor {k} has shape {v.shape}")
        agent.params = params
        agent.target = {k: v.copy() for k, v in params.items()}
        agent.updates = meta.get("updates", 0)
        agent.checkpoint_meta = meta
        if "rng_state" in meta:
            agent.rng.setstate(_rng_state_from_json(meta["rng_state"]))
        return agent


def _rng_state_to_json(state) -> list:
    version, internal, gauss = state
    return [version, list(internal), gauss]


def _rng_state_from_json(data) -> tuple:
    version, internal, gauss = data
    return (version, tuple(internal), gauss)
