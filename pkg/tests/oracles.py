"""Independent reference implementations used as test oracles.

Nothing here calls the matching, metric or gradient code under test; the
oracles work on plain Python sets and dense arrays.
"""

from __future__ import annotations

import itertools
import random

import numpy as np

from kgdesire.beliefnet import (
    DENOTES,
    G_INSTANCES,
    G_ONTOLOGY,
    G_PERSPECTIVES,
    HAS_ATTRIBUTION,
    NEGATIVE,
    ONE,
    OWL_CARDINALITY,
    POSITIVE,
    RDF_TYPE,
    RDF_VALUE,
    RDFS_DOMAIN,
    RDFS_RANGE,
    Certainty,
)
from kgdesire.namespaces import LTALK, LWORLD, N2MU, Subgraph, classify_graph, local_name
from kgdesire.quadstore import Quad, iri, literal

# -- generic BGP oracle -----------------------------------------------------


def nested_loop_match(quads, query):
    """Evaluate a PatternQuery by plain nested loops over the quad list."""
    quads = list(quads)
    projected = query.projected()
    out = set()

    def unify(tp, q, env):
        env = dict(env)
        for t, v in zip(tp.terms, q):
            if t.is_variable:
                if t.name in env and env[t.name] != v:
                    return None
                env[t.name] = v
            elif t != v:
                return None
        if tp.subgraph is not Subgraph.ANY and classify_graph(q.graph.value) is not tp.subgraph:
            return None
        return env

    def rec(i, env):
        if i == len(query.patterns):
            for a, b in query.distinct:
                va = env[a] if isinstance(a, str) else a
                vb = env[b] if isinstance(b, str) else b
                if va == vb:
                    return
            out.add(tuple((v, env[v]) for v in projected))
            return
        for q in quads:
            nxt = unify(query.patterns[i], q, env)
            if nxt is not None:
                rec(i + 1, nxt)

    rec(0, {})
    return sorted(out)


def as_rows(bindings):
    return sorted(tuple(sorted(b.items())) for b in bindings)


# -- random stores ----------------------------------------------------------


def random_quads(rng: random.Random, n: int, n_terms: int = 6, n_graphs: int = 3):
    subjects = [iri(LWORLD + f"e{i}") for i in range(n_terms)]
    preds = [iri(N2MU + f"p{i}") for i in range(3)]
    objects = subjects + [literal(f"v{i}") for i in range(2)]
    graphs = [iri(LWORLD + f"g{i}") for i in range(n_graphs)]
    return {
        Quad(rng.choice(subjects), rng.choice(preds), rng.choice(objects), rng.choice(graphs))
        for _ in range(n)
    }


def random_belief_network(rng: random.Random, max_quads: int = 30):
    """A small reified network mixing claims, perspectives, typing and ontology rows.

    Returns (quads, entity types)."""
    people = [iri(LWORLD + n) for n in ("ana", "bo", "cy")]
    places = [iri(LWORLD + n) for n in ("paris", "rome")]
    preds = [iri(N2MU + n) for n in ("live", "like")]
    types = [N2MU.person, N2MU.city, N2MU.country]
    quads = set()

    def add(q):
        if len(quads) < max_quads:
            quads.add(q)

    claims = []
    for _ in range(rng.randint(1, 5)):
        s, p, o = rng.choice(people), rng.choice(preds), rng.choice(places + people)
        c = iri(LWORLD + f"{local_name(s.value)}_{local_name(p.value)}_{local_name(o.value)}")
        claims.append(c)
        add(Quad(s, p, o, c))
    for k in range(rng.randint(0, 5)):
        m = iri(LTALK + f"m{k}")
        a = iri(LTALK + f"m{k}_a")
        add(Quad(m, DENOTES, rng.choice(claims), G_PERSPECTIVES))
        if rng.random() < 0.8:
            add(Quad(m, HAS_ATTRIBUTION, a, G_PERSPECTIVES))
            add(Quad(a, RDF_VALUE, rng.choice([POSITIVE, NEGATIVE]), G_PERSPECTIVES))
            if rng.random() < 0.5:
                add(Quad(a, RDF_VALUE, Certainty.UNCERTAIN.term, G_PERSPECTIVES))
    for e in people + places:
        if rng.random() < 0.5:
            add(Quad(e, RDF_TYPE, iri(N2MU.person if e in people else N2MU.city), G_INSTANCES))
    for p in preds:
        if rng.random() < 0.6:
            add(Quad(p, RDFS_DOMAIN, iri(rng.choice(types)), G_ONTOLOGY))
        if rng.random() < 0.6:
            add(Quad(p, RDFS_RANGE, iri(rng.choice(types)), G_ONTOLOGY))
        if rng.random() < 0.4:
            add(Quad(p, OWL_CARDINALITY, ONE, G_ONTOLOGY))
    return quads, types


# -- per-pattern desire oracle ---------------------------------------------


def _claims(quads):
    return {q for q in quads if classify_graph(q.graph.value) is Subgraph.CLAIMS}


def _in(quads, graph):
    return {(q.subject, q.predicate, q.object) for q in quads if q.graph == graph}


def _types(quads, entity):
    return {o.value for s, p, o in _in(quads, G_INSTANCES) if s == entity and p == RDF_TYPE}


def desire_oracle(quads, s, p, o, c, pattern_label: str, known_types):
    """Set of (bindings tuple, free_slot, involved types) for one pattern
    and one claim, computed directly from quad sets."""
    quads = set(quads)
    claims = _claims(quads)
    persp = _in(quads, G_PERSPECTIVES)
    onto = _in(quads, G_ONTOLOGY)
    if Quad(s, p, o, c) not in claims:
        return set()
    base = {"subject": s, "predicate": p, "object": o, "claim": c}
    known = set(known_types)

    def involved(extra=None):
        t = _types(quads, s) | _types(quads, o)
        if extra:
            t.add(extra)
        return frozenset(t & known)

    def mentions_of(claim):
        return {m for m, pr, x in persp if pr == DENOTES and x == claim}

    def values_of(mention):
        attrs = {a for m, pr, a in persp if m == mention and pr == HAS_ATTRIBUTION}
        return {v for a2, pr, v in persp if a2 in attrs and pr == RDF_VALUE}

    def key(b):
        return tuple(sorted(b.items()))

    out = set()
    if pattern_label == "negation-conflict":
        ms = mentions_of(c)
        if any(POSITIVE in values_of(m) for m in ms) and any(NEGATIVE in values_of(m) for m in ms):
            out.add((key(base), None, involved()))
    elif pattern_label == "cardinality-conflict":
        functional = (p, OWL_CARDINALITY, ONE) in onto
        others = {q.object for q in claims if q.subject == s and q.predicate == p and q.object != o}
        if functional and others:
            out.add((key(base), None, involved()))
    elif pattern_label in ("subject-gap", "object-gap"):
        anchor = s if pattern_label == "subject-gap" else o
        anchor_types = _types(quads, anchor)
        for gp, rel, t1 in onto:
            if rel != RDFS_DOMAIN or t1.value not in anchor_types:
                continue
            if any(q.subject == anchor and q.predicate == gp for q in claims):
                continue
            for gp2, rel2, gt in onto:
                if gp2 == gp and rel2 == RDFS_RANGE:
                    b = dict(base, gap_predicate=gp)
                    out.add((key(b), local_name(gt.value), involved(gt.value)))
    elif pattern_label == "statement-novelty":
        if len(mentions_of(c)) >= 2:
            out.add((key(base), None, involved()))
    elif pattern_label == "entity-novelty":
        about = {q.graph for q in claims if q.subject == s}
        ms = set().union(*(mentions_of(x) for x in about)) if about else set()
        if len(ms) >= 2:
            out.add((key(base), None, involved()))
    elif pattern_label == "subject-overlap":
        if any(q.subject == s and q.predicate == p and q.object != o for q in claims):
            out.add((key(base), None, involved()))
    elif pattern_label == "object-overlap":
        if any(q.object == o and q.predicate == p and q.subject != s for q in claims):
            out.add((key(base), None, involved()))
    else:
        raise ValueError(pattern_label)
    return out


def desire_set(instances):
    return {(tuple(sorted(d.bindings.items())), d.free_slot, d.involved_types) for d in instances}


# -- graph oracles ------------------------------------------------------------


def floyd_warshall_mean(nodes, edges) -> float:
    """(1/V) * sum of finite shortest-path lengths over ordered pairs i != j."""
    nodes = sorted(nodes, key=repr)
    idx = {n: i for i, n in enumerate(nodes)}
    v = len(nodes)
    dist = np.full((v, v), np.inf)
    np.fill_diagonal(dist, 0.0)
    for s, _, o in edges:
        if s != o:
            dist[idx[s], idx[o]] = 1.0
    for k in range(v):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    mask = np.isfinite(dist) & ~np.eye(v, dtype=bool)
    return float(dist[mask].sum() / v)


def random_digraph(rng: random.Random, max_nodes: int = 20):
    n = rng.randint(1, max_nodes)
    nodes = [iri(LWORLD + f"n{i}") for i in range(n)]
    preds = [iri(N2MU + f"r{i}") for i in range(2)]
    m = rng.randint(0, 3 * n)
    edges = {(rng.choice(nodes), rng.choice(preds), rng.choice(nodes)) for _ in range(m)}
    return nodes, edges


# -- finite differences -------------------------------------------------------


def central_difference(f, params: dict, name: str, index, eps: float = 1e-5) -> float:
    arr = params[name]
    old = arr[index]
    arr[index] = old + eps
    up = f()
    arr[index] = old - eps
    down = f()
    arr[index] = old
    return (up - down) / (2 * eps)


def max_relative_error(analytic: dict, f, params: dict, rng: np.random.Generator,
                       per_tensor: int = 12, floor: float = 1e-6, eps: float = 1e-5) -> float:
    """Largest |a - n| / max(|a|, |n|, floor) over sampled entries of every tensor."""
    worst = 0.0
    for name in sorted(analytic):
        arr = params[name]
        flat = rng.choice(arr.size, size=min(per_tensor, arr.size), replace=False)
        for k in flat:
            index = np.unravel_index(k, arr.shape)
            numeric = central_difference(f, params, name, index, eps)
            a = analytic[name][index]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
    return worst


def all_subsets(items):
    items = list(items)
    return itertools.chain.from_iterable(itertools.combinations(items, r) for r in range(len(items) + 1))



def random_simplified_graph(rng: random.Random, vocab_tokens, n_nodes: int, n_edges: int | None = None):
    """Random claims/values/instances graph with typed edges (duplicates allowed by relation)."""
    from kgdesire.encoder import RELATIONS, SimplifiedGraph

    roles = ["claim", "value", "instance"]
    nodes = []
    for i in range(n_nodes):
        role = rng.choice(roles)
        label = f"claim-{i}" if role == "claim" else rng.choice(vocab_tokens)
        nodes.append((role, label))
    if n_edges is None:
        n_edges = rng.randint(0, 2 * n_nodes)
    edges = sorted({(rng.randrange(n_nodes), rng.randrange(n_nodes), rng.choice(RELATIONS))
                    for _ in range(n_edges)})
    return SimplifiedGraph(nodes, edges)
