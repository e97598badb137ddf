"""Dialogue environment and experiment driver.

One conversation: the user opens with an unsolicited statement, then the
agent and the user alternate. Each agent turn selects a desire from the
last iKG, the user answers the rendered query, the answer is integrated
and the change of the intention metric is the reward. One TD update and
one soft target update follow every agent turn.
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .beliefnet import EKG, Ontology, build_ikg, integrate
from .d2q import (
    BATCH_SIZE,
    EPS_DECAY_UPDATES,
    EPS_END,
    EPS_START,
    GAMMA,
    LEARNING_RATE,
    REPLAY_CAPACITY,
    TAU,
    Agent,
    Transition,
    q_value,
    softmax,
)
from .dataio import ontology_for, synth_kb
from .desires import PATTERNS, AbstractPattern, DesireInstance, generate_desires, render_user_query
from .encoder import HIDDEN, SimplifiedGraph, Vocabulary, simplify
from .metrics import MetricKind, evaluate, literal_ratio_reward, profile, reward
from .nquads import export_nquads, read_nquads
from .namespaces import LWORLD
from .quadstore import QuadStore, iri
from .usermodel import UserKind, UserModel, corrupt

LOG_COLUMNS = ["run", "conversation", "turn", "action", "m_prev", "m_next", "reward",
               "epsilon", "q", "loss", "lifetime", "user_kind", "answered", "inverse_ratio"]


class ConfigInvalid(ValueError):
    pass


@dataclass
class ExperimentConfig:
    intention: str = "total-triples"
    conversations: int = 8
    turns_per_conversation: int = 20
    runs: int = 3
    reset_every: int = 2
    shuffle_every: int = 2
    schedule: str = "alternate"
    user_kinds: list[str] = field(default_factory=lambda: ["vanilla"])
    user_instances: int = 100
    random_answers: bool = False
    characters: int = 50
    kb_seed: int = 0
    kb_path: str | None = None
    seed: int = 0
    checkpoint_every: int = 1
    hidden: int = HIDDEN
    lr: float = LEARNING_RATE
    gamma: float = GAMMA
    tau: float = TAU
    batch_size: int = BATCH_SIZE
    replay_capacity: int = REPLAY_CAPACITY
    eps_start: float = EPS_START
    eps_end: float = EPS_END
    eps_decay_updates: int = EPS_DECAY_UPDATES
    shuffle_tolerance: float = 0.25

    def __post_init__(self):
        self.validate()

    @property
    def metric(self) -> MetricKind:
        return MetricKind.from_label(self.intention)

    @property
    def agent_turns(self) -> int:
        return self.turns_per_conversation // 2

    def validate(self) -> None:
        problems = []
        if self.turns_per_conversation < 2 or self.turns_per_conversation % 2:
            problems.append("turns_per_conversation must be a positive even number")
        if self.conversations < 1:
            problems.append("conversations must be >= 1")
        if self.runs < 1:
            problems.append("runs must be >= 1")
        if self.schedule not in ("alternate", "reset", "shuffle", "none"):
            problems.append(f"unknown schedule {self.schedule!r}")
        if self.reset_every < 1 or self.shuffle_every < 1:
            problems.append("reset_every and shuffle_every must be >= 1")
        if not self.user_kinds:
            problems.append("user_kinds is empty")
        try:
            for k in self.user_kinds:
                UserKind(k)
            MetricKind.from_label(self.intention)
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ConfigInvalid("; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: {exc}") from None
        return cls.from_dict(data)


def boundary_events(config: ExperimentConfig) -> dict[int, str]:
    """Map 'after conversation k' -> 'reset' | 'shuffle'.

    Alternating mode: every reset_every conversations, starting with a
    reset and then alternating. No event follows the final conversation."""
    events = {}
    if config.schedule == "none":
        return events
    step = config.reset_every if config.schedule != "shuffle" else config.shuffle_every
    if config.schedule == "alternate":
        step = min(config.reset_every, config.shuffle_every)
    for i, k in enumerate(range(step, config.conversations, step)):
        if config.schedule == "alternate":
            events[k] = "reset" if i % 2 == 0 else "shuffle"
        else:
            events[k] = config.schedule
    return events


class GraphPool:
    """eKG snapshots collected at conversation ends, used by shuffle."""

    def __init__(self, tolerance: float = 0.25):
        self.tolerance = tolerance
        self.snapshots: list[EKG] = []

    def __len__(self) -> int:
        return len(self.snapshots)

    def add(self, ekg: EKG) -> None:
        self.snapshots.append(ekg.copy())

    def sizes(self) -> list[int]:
        return [len(s) for s in self.snapshots]

    def choose(self, current: EKG, rng: random.Random) -> EKG:
        """Random snapshot within +-tolerance of the current size, else the nearest;
        snapshots identical to the current eKG are never returned."""
        candidates = [s for s in self.snapshots if s.store != current.store]
        if not candidates:
            raise LookupError("graph pool has no snapshot to shuffle in")
        size = len(current)
        similar = [s for s in candidates if abs(len(s) - size) <= self.tolerance * size]
        if similar:
            return rng.choice(similar).copy()
        return min(candidates, key=lambda s: (abs(len(s) - size), len(s))).copy()

    def digest(self) -> str:
        h = hashlib.sha256()
        for s in self.snapshots:
            h.update(export_nquads(s.store).encode("utf-8"))
        return h.hexdigest()


@dataclass
class TurnRecord:
    run: int
    conversation: int
    turn: int
    action: str
    m_prev: float
    m_next: float
    reward: float
    epsilon: float
    q: float
    loss: float | None
    lifetime: int
    user_kind: str
    answered: bool
    inverse_ratio: float
    desire: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in LOG_COLUMNS}


@dataclass
class EpisodeLog:
    user_kind: str
    turns: list[TurnRecord] = field(default_factory=list)
    profile: dict[str, float] = field(default_factory=dict)

    @property
    def cumulative_reward(self) -> float:
        return float(sum(t.reward for t in self.turns))


@dataclass
class Session:
    """Mutable per-run state threaded through conversations."""

    agent: Agent
    ekg: EKG
    ontology: Ontology
    rng: random.Random
    run: int = 0
    chat: int = 0
    lifetime: int = 0
    learn: bool = True


def run_conversation(session: Session, user: UserModel, config: ExperimentConfig,
                     conversation: int = 1) -> EpisodeLog:
    """Play one conversation against ``user``, learning after every agent turn
    when ``session.learn`` is set."""
    agent, ekg, rng = session.agent, session.ekg, session.rng
    metric = config.metric
    session.chat += 1
    chat = session.chat
    log = EpisodeLog(user.kind.value)

    opening = user.random_capsule(rng)
    ikg = build_ikg(opening, chat=chat, turn=1, ontology=session.ontology)
    integrate(ekg, ikg)
    graph = simplify(ekg)
    desires = generate_desires(ekg, ikg)

    n = config.agent_turns
    for t in range(n):
        m_prev = evaluate(metric, ekg)
        if session.learn:
            eps = agent.epsilon
            desire = agent.act(graph, desires)
        else:
            eps = 0.0
            desire = agent.act(graph, desires, greedy=True)
        abstract, types = agent.q_heads(graph)
        q = q_value(abstract, types, desire.pattern, desire.involved_types, agent.type_index)

        capsule, answered = user.reply(render_user_query(desire), rng)
        ikg = build_ikg(capsule, chat=chat, turn=2 * t + 3, ontology=session.ontology)
        integrate(ekg, ikg)
        m_next = evaluate(metric, ekg)
        r = reward(m_prev, m_next)
        session.lifetime += 1

        next_graph = simplify(ekg)
        next_desires = generate_desires(ekg, ikg)
        loss = None
        if session.learn:
            agent.remember(Transition(graph, desire.pattern, desire.involved_types, r, next_graph,
                                      [d.action for d in next_desires], terminal=(t == n - 1)))
            loss = agent.learn()
        log.turns.append(TurnRecord(
            session.run, conversation, t + 1, desire.pattern.label, m_prev, m_next, r, eps, q, loss,
            session.lifetime, user.kind.value, answered, literal_ratio_reward(m_prev, m_next),
            desire.to_dict(),
        ))
        graph, desires = next_graph, next_desires
    log.profile = profile(ekg)
    return log


@dataclass
class ExperimentReport:
    config: dict
    rows: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    checkpoints: list[dict] = field(default_factory=list)
    profiles: list[dict] = field(default_factory=list)
    elapsed: float = 0.0

    def runs(self) -> list[int]:
        return sorted({r["run"] for r in self.rows})

    def rewards_by_run(self) -> np.ndarray:
        runs = self.runs()
        per = [[r["reward"] for r in self.rows if r["run"] == run] for run in runs]
        length = min(len(p) for p in per) if per else 0
        return np.array([p[:length] for p in per], dtype=float)

    def average_rewards(self) -> list[float]:
        m = self.rewards_by_run()
        return m.mean(axis=0).tolist() if m.size else []

    def cumulative_rewards(self) -> list[float]:
        return np.cumsum(self.average_rewards()).tolist()

    def action_counts(self) -> dict[str, int]:
        counts = {p.label: 0 for p in PATTERNS}
        for r in self.rows:
            counts[r["action"]] += 1
        return counts

    def summary(self) -> dict:
        return {
            "config": self.config,
            "updates_per_run": {run: sum(1 for r in self.rows if r["run"] == run and r["loss"] is not None)
                                for run in self.runs()},
            "average_rewards": self.average_rewards(),
            "cumulative_rewards": self.cumulative_rewards(),
            "action_counts": self.action_counts(),
            "events": self.events,
            "checkpoints": self.checkpoints,
            "profiles": self.profiles,
            "elapsed_seconds": self.elapsed,
        }

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_log_csv(self.rows, out_dir / "log.csv")
        (out_dir / "summary.json").write_text(json.dumps(self.summary(), indent=2, default=_jsonable),
                                              encoding="utf-8")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x).__name__)


def write_log_csv(rows: list[dict], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow(r)


def read_log_csv(path) -> list[dict]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            for k in ("run", "conversation", "turn", "lifetime"):
                r[k] = int(r[k])
            for k in ("m_prev", "m_next", "reward", "epsilon", "q", "inverse_ratio"):
                r[k] = float(r[k])
            r["loss"] = float(r["loss"]) if r["loss"] not in ("", "None") else None
            r["answered"] = r["answered"] == "True"
            rows.append(r)
    return rows


def load_base_kb(config: ExperimentConfig) -> QuadStore:
    if config.kb_path:
        return read_nquads(config.kb_path)
    return synth_kb(config.characters, config.kb_seed)


def make_agent(ontology: Ontology, config: ExperimentConfig, seed: int) -> Agent:
    return Agent(Vocabulary(ontology.instances()), ontology.types, seed=seed, hidden=config.hidden,
                 lr=config.lr, gamma=config.gamma, tau=config.tau, batch_size=config.batch_size,
                 capacity=config.replay_capacity, eps_start=config.eps_start, eps_end=config.eps_end,
                 eps_decay=config.eps_decay_updates)


def pick_user(base_kb: QuadStore, config: ExperimentConfig, rng: random.Random,
              cache: dict | None = None) -> UserModel:
    kind = UserKind(rng.choice(config.user_kinds))
    seed = 0 if kind is UserKind.VANILLA else rng.randrange(config.user_instances)
    key = (kind, seed)
    if cache is not None and key in cache:
        return cache[key]
    user = corrupt(base_kb, kind, seed)
    user.random_answers = config.random_answers
    if cache is not None:
        cache[key] = user
    return user


def run_experiment(config: ExperimentConfig, out_dir=None, base_kb: QuadStore | None = None) -> ExperimentReport:
    """runs x conversations with the boundary schedule; one checkpoint per
    ``checkpoint_every`` conversations."""
    config.validate()
    started = time.perf_counter()
    base_kb = base_kb if base_kb is not None else load_base_kb(config)
    ontology = ontology_for(base_kb)
    events = boundary_events(config)
    report = ExperimentReport(config.to_dict())
    users: dict = {}
    for run in range(config.runs):
        seed = config.seed + run
        session = Session(make_agent(ontology, config, seed), EKG(ontology), ontology,
                          random.Random(f"run:{seed}"), run=run)
        pool = GraphPool(config.shuffle_tolerance)
        report.events.append({"run": run, "after": 0, "event": "reset"})
        for conv in range(1, config.conversations + 1):
            user = pick_user(base_kb, config, session.rng, users)
            log = run_conversation(session, user, config, conv)
            report.rows.extend(t.row() for t in log.turns)
            report.profiles.append({"run": run, "conversation": conv, "user_kind": log.user_kind, **log.profile})
            pool.add(session.ekg)
            if conv % config.checkpoint_every == 0:
                report.checkpoints.append(_checkpoint(session, pool, conv, out_dir))
            event = events.get(conv)
            if event == "reset":
                session.ekg.reset()
                session.lifetime = 0
            elif event == "shuffle":
                session.ekg = pool.choose(session.ekg, session.rng)
                session.lifetime = 0
            if event:
                report.events.append({"run": run, "after": conv, "event": event, "size": len(session.ekg)})
    report.elapsed = time.perf_counter() - started
    if out_dir is not None:
        report.write(out_dir)
    return report


def _checkpoint(session: Session, pool: GraphPool, conv: int, out_dir) -> dict:
    run, agent = session.run, session.agent
    entry = {"run": run, "conversation": conv, "updates": agent.updates, "pool_digest": pool.digest()}
    if out_dir is not None:
        path = Path(out_dir) / f"run{run}" / f"checkpoint_conv{conv}.bin"
        agent.save(path, {"pool_digest": entry["pool_digest"], "run": run, "conversation": conv,
                          "ontology": session.ontology.to_dict()})
        entry["path"] = str(path)
    return entry


@dataclass
class QValueReport:
    abstract: dict[str, float]
    types: dict[str, float]
    abstract_logits: list[float]
    type_logits: list[float]

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_policy(agent, seed_ekg: EKG | None = None) -> QValueReport:
    """Mean-subtracted abstract and type softmax distributions for one state
    (by default the empty eKG, whose encoding is the zero vector)."""
    if not isinstance(agent, Agent):
        agent = Agent.load(agent)
    graph = simplify(seed_ekg) if seed_ekg is not None else SimplifiedGraph()
    abstract, types = agent.q_heads(graph)
    pa = softmax(abstract)
    pt = softmax(types) if len(types) else types
    return QValueReport(
        abstract={p.label: float(pa[p.index] - pa.mean()) for p in PATTERNS},
        types={t: float(pt[i] - pt.mean()) for i, t in enumerate(agent.types)},
        abstract_logits=abstract.tolist(),
        type_logits=types.tolist(),
    )


def profile_knowledge(ekg) -> dict[str, float]:
    return profile(ekg)


def compare_users(agent, user_kinds, base_kb: QuadStore, config: ExperimentConfig,
                  seeds=(0, 1, 2)) -> dict[str, float]:
    """Mean cumulative reward of one frozen-policy conversation per user kind and seed."""
    if not isinstance(agent, Agent):
        agent = Agent.load(agent)
    ontology = ontology_for(base_kb)
    table = {}
    for kind in user_kinds:
        totals = []
        for seed in seeds:
            user = corrupt(base_kb, kind, seed)
            session = Session(agent, EKG(ontology), ontology, random.Random(f"compare:{seed}"), learn=False)
            totals.append(run_conversation(session, user, config).cumulative_reward)
        table[UserKind(kind).value] = float(np.mean(totals))
    return table


class RiggedEnvironment:
    """Contextual bandit: random eKG states, one desire per pattern, reward 1
    only for the rewarded pattern."""

    def __init__(self, base_kb: QuadStore, rewarded: AbstractPattern = AbstractPattern.STATEMENT_NOVELTY,
                 states: int = 16, seed: int = 0):
        self.rewarded = rewarded
        self.ontology = ontology_for(base_kb)
        rng = random.Random(f"rigged:{seed}")
        users = corrupt(base_kb, UserKind.VANILLA)
        self.graphs: list[SimplifiedGraph] = []
        for i in range(states):
            ekg = EKG(self.ontology)
            for turn in range(1, rng.randint(1, 8) + 1):
                integrate(ekg, build_ikg(users.random_capsule(rng), chat=i + 1, turn=turn,
                                         ontology=self.ontology))
            self.graphs.append(simplify(ekg))
        self.rng = rng
        self._types = list(self.ontology.types)

    def desires(self) -> list[DesireInstance]:
        out = []
        for p in PATTERNS:
            involved = frozenset(self.rng.sample(self._types, self.rng.randint(1, 2)))
            out.append(DesireInstance(p, {"slot": _dummy_term(p)}, involved))
        return sorted(out)

    def sample(self) -> tuple[SimplifiedGraph, list[DesireInstance]]:
        return self.rng.choice(self.graphs), self.desires()

    def reward(self, desire: DesireInstance) -> float:
        return 1.0 if desire.pattern is self.rewarded else 0.0


def _dummy_term(p: AbstractPattern):
    return iri(LWORLD + f"rigged-{p.label}")


def train_rigged(env: RiggedEnvironment, agent: Agent, updates: int = 500) -> list[float]:
    losses = []
    for _ in range(updates):
        graph, desires = env.sample()
        desire = agent.act(graph, desires)
        agent.remember(Transition(graph, desire.pattern, desire.involved_types, env.reward(desire),
                                  graph, [], terminal=True))
        losses.append(agent.learn())
    return losses


def greedy_hit_rate(env: RiggedEnvironment, agent: Agent, draws: int = 100) -> float:
    hits = 0
    for _ in range(draws):
        graph, desires = env.sample()
        hits += agent.act(graph, desires, greedy=True).pattern is env.rewarded
    return hits / draws
