"""Intent metrics over a belief network and the state-delta reward."""

from __future__ import annotations

import enum
from collections import deque

from .beliefnet import EKG, RDF_TYPE, count_conflicts, list_claims, list_perspectives
from .namespaces import Subgraph
from .quadstore import QuadStore, Term


class Undefined(ArithmeticError):
    """A metric whose denominator is zero."""

    def __init__(self, kind: "MetricKind"):
        super().__init__(f"{kind.label} is undefined on this graph")
        self.kind = kind


class MetricKind(enum.Enum):
    SPARSENESS = ("sparseness", "Cohesion")
    AVERAGE_DEGREE = ("average-degree", "Interconnectedness")
    SHORTEST_PATH = ("shortest-path", "Specificity")
    TOTAL_TRIPLES = ("total-triples", "Volume")
    AVERAGE_POPULATION = ("average-population", "Spread")
    RATIO_CLAIMS_TO_TRIPLES = ("ratio-claims-to-triples", "Completeness")
    RATIO_PERSPECTIVES_TO_CLAIMS = ("ratio-perspectives-to-claims", "Diversity")
    RATIO_CONFLICTS_TO_CLAIMS = ("ratio-conflicts-to-claims", "Correctness")

    def __init__(self, label: str, dimension: str):
        self.label = label
        self.dimension = dimension

    @classmethod
    def from_label(cls, label: str) -> "MetricKind":
        key = label.strip().lower().replace("_", "-").replace(" ", "-")
        for kind in cls:
            if kind.label == key or kind.name.lower().replace("_", "-") == key:
                return kind
        raise ValueError(f"unknown metric {label!r}; choose from {[k.label for k in cls]}")


PROFILE_METRICS = (
    MetricKind.AVERAGE_DEGREE,
    MetricKind.SPARSENESS,
    MetricKind.SHORTEST_PATH,
    MetricKind.TOTAL_TRIPLES,
    MetricKind.AVERAGE_POPULATION,
)


class Digraph:
    """Directed graph with labelled edges: distinct (s, p, o) triples over nodes."""

    def __init__(self, edges=()):
        self.nodes: set = set()
        self.edges: set = set()
        for s, p, o in edges:
            self.add(s, p, o)

    def add(self, s, p, o) -> None:
        self.nodes.add(s)
        self.nodes.add(o)
        self.edges.add((s, p, o))

    def successors(self) -> dict:
        succ: dict = {n: set() for n in self.nodes}
        for s, _, o in self.edges:
            if s != o:
                succ[s].add(o)
        return succ


def instance_view(ekg) -> Digraph:
    """World-knowledge projection: Instances and Claims subgraph triples."""
    store = _store(ekg)
    g = Digraph()
    for q in store:
        if store.subgraph_of(q.graph) in (Subgraph.INSTANCES, Subgraph.CLAIMS):
            g.add(q.subject, q.predicate, q.object)
    return g


def sparseness(g: Digraph) -> float:
    v = len(g.nodes)
    if v == 0:
        raise Undefined(MetricKind.SPARSENESS)
    return len(g.edges) / v**2


def average_degree(g: Digraph) -> float:
    v = len(g.nodes)
    if v == 0:
        raise Undefined(MetricKind.AVERAGE_DEGREE)
    return 2 * len(g.edges) / v


def shortest_path(g: Digraph) -> float:
    """(1/V) times the sum of directed BFS distances over reachable ordered pairs."""
    v = len(g.nodes)
    if v == 0:
        raise Undefined(MetricKind.SHORTEST_PATH)
    succ = g.successors()
    total = 0
    for source in g.nodes:
        dist = {source: 0}
        frontier = deque([source])
        while frontier:
            u = frontier.popleft()
            for w in succ[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    total += dist[w]
                    frontier.append(w)
    return total / v


def average_population(store: QuadStore) -> float:
    """Mean number of distinct typed instances per observed entity type."""
    members: dict[Term, set[Term]] = {}
    for q in store.find(p=RDF_TYPE):
        if store.subgraph_of(q.graph) is Subgraph.INSTANCES:
            members.setdefault(q.object, set()).add(q.subject)
    if not members:
        raise Undefined(MetricKind.AVERAGE_POPULATION)
    return sum(len(m) for m in members.values()) / len(members)


def evaluate(kind: MetricKind, ekg, strict: bool = False) -> float:
    """Value of ``kind`` on the eKG. Zero denominators give 0.0 unless ``strict``."""
    try:
        return _evaluate(kind, ekg)
    except Undefined:
        if strict:
            raise
        return 0.0


def _evaluate(kind: MetricKind, ekg) -> float:
    store = _store(ekg)
    K = MetricKind
    if kind is K.TOTAL_TRIPLES:
        return float(len(store))
    if kind in (K.SPARSENESS, K.AVERAGE_DEGREE, K.SHORTEST_PATH):
        g = instance_view(store)
        return {K.SPARSENESS: sparseness, K.AVERAGE_DEGREE: average_degree,
                K.SHORTEST_PATH: shortest_path}[kind](g)
    if kind is K.AVERAGE_POPULATION:
        return average_population(store)
    if kind is K.RATIO_CLAIMS_TO_TRIPLES:
        if len(store) == 0:
            raise Undefined(kind)
        return len(list_claims(store)) / len(store)
    claims = len(list_claims(store))
    if claims == 0:
        raise Undefined(kind)
    if kind is K.RATIO_PERSPECTIVES_TO_CLAIMS:
        return len(list_perspectives(store)) / claims
    if kind is K.RATIO_CONFLICTS_TO_CLAIMS:
        return count_conflicts(store) / claims
    raise ValueError(kind)


def profile(ekg) -> dict[str, float]:
    return {kind.label: evaluate(kind, ekg) for kind in PROFILE_METRICS}


def reward(m_prev: float, m_next: float) -> float:
    """Relative change of the metric; growth is rewarded.

    From zero, any growth is capped at 1 and no change is 0."""
    if m_prev > 0:
        return (m_next - m_prev) / m_prev
    if m_next > m_prev:
        return 1.0
    return 0.0


def literal_ratio_reward(m_prev: float, m_next: float) -> float:
    """The ratio the other way round (m_prev / m_next - 1), kept for audit logs."""
    if m_next > 0:
        return (m_prev - m_next) / m_next
    return 0.0


def _store(ekg) -> QuadStore:
    return ekg.store if isinstance(ekg, EKG) else ekg
