"""State encoder: claims/perspectives graph -> fixed-size vector.

The eKG is reduced to a typed graph of claim, perspective-value and
instance nodes. Nodes carry one-hot identity features; two relational
graph attention layers (one head, additive attention, per-relation
softmax over in-neighbours, plus a self-loop relation) and a dense layer
produce node embeddings that are mean-pooled.

Forward and backward passes are written out in numpy (float64).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefnet import EKG, PERSPECTIVE_VALUES, claim_triple, list_claims, perspectives_of
from .quadstore import QuadStore, Term

HIDDEN = 64
LEAKY_SLOPE = 0.2
RELATIONS = ("has_value", "subject_of", "object_of")
SELF = "self"
N_LAYERS = 2

CLAIM_TOKEN = "<claim>"
UNK_TOKEN = "<unk>"


class ShapeMismatch(ValueError):
    pass


class Vocabulary:
    """One-hot feature vocabulary: role/value tokens, known instances, UNK."""

    def __init__(self, instances=()):
        fixed = [CLAIM_TOKEN] + [t.value for t in PERSPECTIVE_VALUES]
        rest = sorted(set(instances) - set(fixed) - {UNK_TOKEN})
        self.tokens = fixed + rest + [UNK_TOKEN]
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.unk = self.index[UNK_TOKEN]

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, token: str) -> int:
        return self.index.get(token, self.unk)

    def to_list(self) -> list[str]:
        return list(self.tokens)

    @classmethod
    def from_list(cls, tokens) -> "Vocabulary":
        vocab = cls.__new__(cls)
        vocab.tokens = list(tokens)
        vocab.index = {t: i for i, t in enumerate(vocab.tokens)}
        vocab.unk = vocab.index[UNK_TOKEN]
        return vocab


@dataclass
class SimplifiedGraph:
    """Claims-centred view of an eKG.

    ``nodes`` holds (role, label) pairs with role in {claim, value, instance};
    ``edges`` holds (src, dst, relation) index triples."""

    nodes: list[tuple[str, str]] = field(default_factory=list)
    edges: list[tuple[int, int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes)

    def token(self, i: int) -> str:
        role, label = self.nodes[i]
        return CLAIM_TOKEN if role == "claim" else label

    def arrays(self, vocab: Vocabulary):
        feats = np.array([vocab[self.token(i)] for i in range(len(self.nodes))], dtype=np.int64)
        rel = {}
        for r in RELATIONS:
            pairs = [(s, d) for s, d, rr in self.edges if rr == r]
            src = np.array([p[0] for p in pairs], dtype=np.int64)
            dst = np.array([p[1] for p in pairs], dtype=np.int64)
            rel[r] = (src, dst)
        return feats, rel

    def permuted(self, order) -> "SimplifiedGraph":
        """Same graph with node i moved to position order.index(i)."""
        position = {old: new for new, old in enumerate(order)}
        nodes = [self.nodes[old] for old in order]
        edges = [(position[s], position[d], r) for s, d, r in self.edges]
        return SimplifiedGraph(nodes, edges)

    def out_degree(self, label: str) -> int:
        idx = [i for i, (_, l) in enumerate(self.nodes) if l == label]
        return sum(1 for s, _, _ in self.edges if s in idx)


def simplify(ekg) -> SimplifiedGraph:
    """Claims, their perspective values and the instances they connect."""
    store: QuadStore = ekg.store if isinstance(ekg, EKG) else ekg
    claims = sorted(list_claims(store))
    claim_set = {c.value for c in claims}
    values: set[str] = set()
    instances: set[str] = set()
    raw_edges = []
    for c in claims:
        triple = claim_triple(store, c)
        s, _, o = triple
        attributed = set()
        for view in perspectives_of(store, c):
            for key in ("polarity", "certainty"):
                if view[key] is not None:
                    attributed.add(view[key].term.value)
        for v in sorted(attributed):
            values.add(v)
            raw_edges.append((c.value, v, "has_value"))
        for entity, rel in ((s, "subject_of"), (o, "object_of")):
            label = _label(entity)
            if label not in claim_set:
                instances.add(label)
            if rel == "subject_of":
                raw_edges.append((label, c.value, rel))
            else:
                raw_edges.append((c.value, label, rel))
    nodes = [("claim", c.value) for c in claims]
    nodes += [("value", v) for v in sorted(values)]
    nodes += [("instance", e) for e in sorted(instances - values)]
    index = {label: i for i, (_, label) in enumerate(nodes)}
    edges = sorted({(index[a], index[b], r) for a, b, r in raw_edges})
    return SimplifiedGraph(nodes, edges)


def _label(term: Term) -> str:
    return term.value if term.is_iri else f'"{term.value}"'


def _fan_in_uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_encoder_params(vocab_size: int, rng: np.random.Generator, hidden: int = HIDDEN) -> dict[str, np.ndarray]:
    params = {}
    for layer in range(N_LAYERS):
        din = vocab_size if layer == 0 else hidden
        for r in RELATIONS + (SELF,):
            params[f"rgat{layer}.W.{r}"] = _fan_in_uniform(rng, din, (din, hidden))
        for r in RELATIONS:
            params[f"rgat{layer}.a_dst.{r}"] = _fan_in_uniform(rng, hidden, (hidden,))
            params[f"rgat{layer}.a_src.{r}"] = _fan_in_uniform(rng, hidden, (hidden,))
    params["dense.W"] = _fan_in_uniform(rng, hidden, (hidden, hidden))
    params["dense.b"] = np.zeros(hidden)
    return params


def encoder_keys(params: dict) -> list[str]:
    return [k for k in params if k.startswith("rgat") or k.startswith("dense.")]


def hidden_size(params: dict) -> int:
    return params["dense.b"].shape[0]


def _check(params: dict, vocab_size: int) -> None:
    w = params.get(f"rgat0.W.{SELF}")
    if w is None:
        raise ShapeMismatch("encoder parameters missing")
    if w.shape[0] != vocab_size:
        raise ShapeMismatch(f"vocabulary has {vocab_size} tokens but parameters expect {w.shape[0]}")


def _segment_softmax(e: np.ndarray, dst: np.ndarray, n: int) -> np.ndarray:
    emax = np.full(n, -np.inf)
    np.maximum.at(emax, dst, e)
    ex = np.exp(e - emax[dst])
    den = np.zeros(n)
    np.add.at(den, dst, ex)
    return ex / den[dst]


def _layer_forward(layer: int, h, feats, rel, params, n):
    """One RGAT layer. ``h`` is None on layer 0 (one-hot input given by feats)."""

    def transform(w):
        return w[feats] if h is None else h @ w

    out = transform(params[f"rgat{layer}.W.{SELF}"]).copy()
    caches = {}
    for r in RELATIONS:
        src, dst = rel[r]
        if len(src) == 0:
            continue
        g = transform(params[f"rgat{layer}.W.{r}"])
        raw = (g @ params[f"rgat{layer}.a_dst.{r}"])[dst] + (g @ params[f"rgat{layer}.a_src.{r}"])[src]
        e = np.where(raw > 0, raw, LEAKY_SLOPE * raw)
        alpha = _segment_softmax(e, dst, n)
        np.add.at(out, dst, alpha[:, None] * g[src])
        caches[r] = (g, raw, alpha)
    return np.maximum(out, 0.0), (out, caches)


def _layer_backward(layer, h, feats, rel, params, cache, d_act, grads, n):
    pre, caches = cache
    d_out = d_act * (pre > 0)
    dh = None if h is None else np.zeros_like(h)

    def accumulate_w(name, dg):
        if h is None:
            np.add.at(grads[name], feats, dg)
        else:
            grads[name] += h.T @ dg
            dh[...] += dg @ params[name].T

    accumulate_w(f"rgat{layer}.W.{SELF}", d_out)
    for r, (g, raw, alpha) in caches.items():
        src, dst = rel[r]
        a_dst = params[f"rgat{layer}.a_dst.{r}"]
        a_src = params[f"rgat{layer}.a_src.{r}"]
        d_msg = d_out[dst]
        d_alpha = np.einsum("ij,ij->i", d_msg, g[src])
        dg = np.zeros_like(g)
        np.add.at(dg, src, alpha[:, None] * d_msg)
        weighted = np.zeros(n)
        np.add.at(weighted, dst, alpha * d_alpha)
        d_e = alpha * (d_alpha - weighted[dst])
        d_raw = d_e * np.where(raw > 0, 1.0, LEAKY_SLOPE)
        ds_dst = np.zeros(n)
        ds_src = np.zeros(n)
        np.add.at(ds_dst, dst, d_raw)
        np.add.at(ds_src, src, d_raw)
        grads[f"rgat{layer}.a_dst.{r}"] += g.T @ ds_dst
        grads[f"rgat{layer}.a_src.{r}"] += g.T @ ds_src
        dg += np.outer(ds_dst, a_dst) + np.outer(ds_src, a_src)
        accumulate_w(f"rgat{layer}.W.{r}", dg)
    return dh


def encoder_forward(graph: SimplifiedGraph, params: dict, vocab: Vocabulary):
    """State vector plus the cache needed by :func:`encoder_backward`."""
    _check(params, len(vocab))
    hidden = hidden_size(params)
    n = len(graph)
    if n == 0:
        return np.zeros(hidden), None
    feats, rel = graph.arrays(vocab)
    h = None
    layers = []
    for layer in range(N_LAYERS):
        h_next, cache = _layer_forward(layer, h, feats, rel, params, n)
        layers.append((h, cache))
        h = h_next
    z = h @ params["dense.W"] + params["dense.b"]
    state = z.mean(axis=0)
    return state, (feats, rel, layers, h, n)


def encode(graph: SimplifiedGraph, params: dict, vocab: Vocabulary) -> np.ndarray:
    return encoder_forward(graph, params, vocab)[0]


def encoder_backward(cache, params: dict, upstream: np.ndarray, grads: dict) -> None:
    """Accumulate d(upstream . state)/d(params) into ``grads``."""
    if cache is None:
        return
    feats, rel, layers, h_last, n = cache
    dz = np.broadcast_to(upstream / n, (n, upstream.shape[0]))
    grads["dense.W"] += h_last.T @ dz
    grads["dense.b"] += dz.sum(axis=0)
    d_act = dz @ params["dense.W"].T
    for layer in reversed(range(N_LAYERS)):
        h_in, lcache = layers[layer]
        d_act = _layer_backward(layer, h_in, feats, rel, params, lcache, d_act, grads, n)


def encode_backward(graph: SimplifiedGraph, params: dict, vocab: Vocabulary,
                    upstream: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of upstream . encode(graph) with respect to every encoder parameter."""
    grads = {k: np.zeros_like(params[k]) for k in encoder_keys(params)}
    _, cache = encoder_forward(graph, params, vocab)
    encoder_backward(cache, params, np.asarray(upstream, dtype=float), grads)
    return grads


def attention_coefficients(graph: SimplifiedGraph, params: dict, vocab: Vocabulary) -> list[dict]:
    """Per-layer attention weights keyed by relation: (src, dst, alpha) arrays."""
    _check(params, len(vocab))
    n = len(graph)
    if n == 0:
        return []
    feats, rel = graph.arrays(vocab)
    h = None
    out = []
    for layer in range(N_LAYERS):
        h_next, (_, caches) = _layer_forward(layer, h, feats, rel, params, n)
        out.append({r: (rel[r][0], rel[r][1], c[2]) for r, c in caches.items()})
        h = h_next
    return out


__all__ = [
    "SimplifiedGraph",
    "Vocabulary",
    "simplify",
    "init_encoder_params",
    "encode",
    "encode_backward",
    "encoder_forward",
    "encoder_backward",
]
