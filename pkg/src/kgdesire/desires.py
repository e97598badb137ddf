"""The eight semantic graph patterns and their instantiation as actions.

Every pattern starts from the claim carried by the last iKG (its subject,
predicate, object and claim graph are the instantiated slots) and adds
the rows that give it meaning: perspective structure for conflicts and
novelty, ontology signatures for gaps, sibling claims for overlaps.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .beliefnet import (
    DENOTES,
    EKG,
    HAS_ATTRIBUTION,
    NEGATIVE,
    ONE,
    OWL_CARDINALITY,
    POSITIVE,
    RDF_TYPE,
    RDF_VALUE,
    RDFS_DOMAIN,
    RDFS_RANGE,
    ikg_claims,
)
from .namespaces import Subgraph, local_name
from .quadstore import PatternQuery, QuadStore, Term, TriplePattern, iri, var

MAX_INSTANCES = 64


class Aspect(str, enum.Enum):
    CORRECTNESS = "correctness"
    COMPLETENESS = "completeness"
    REDUNDANCY = "redundancy"
    INTERCONNECTEDNESS = "interconnectedness"


class AbstractPattern(enum.Enum):
    NEGATION_CONFLICT = ("negation-conflict", Aspect.CORRECTNESS)
    CARDINALITY_CONFLICT = ("cardinality-conflict", Aspect.CORRECTNESS)
    SUBJECT_GAP = ("subject-gap", Aspect.COMPLETENESS)
    OBJECT_GAP = ("object-gap", Aspect.COMPLETENESS)
    STATEMENT_NOVELTY = ("statement-novelty", Aspect.REDUNDANCY)
    ENTITY_NOVELTY = ("entity-novelty", Aspect.REDUNDANCY)
    SUBJECT_OVERLAP = ("subject-overlap", Aspect.INTERCONNECTEDNESS)
    OBJECT_OVERLAP = ("object-overlap", Aspect.INTERCONNECTEDNESS)

    def __init__(self, label: str, aspect: Aspect):
        self.label = label
        self.aspect = aspect

    @property
    def index(self) -> int:
        return PATTERNS.index(self)

    @classmethod
    def from_label(cls, label: str) -> "AbstractPattern":
        key = label.strip().lower().replace("_", "-")
        for p in cls:
            if p.label == key or p.name.lower().replace("_", "-") == key:
                return p
        raise ValueError(f"unknown pattern {label!r}")


PATTERNS = list(AbstractPattern)
GAP_PATTERNS = (AbstractPattern.SUBJECT_GAP, AbstractPattern.OBJECT_GAP)

C, P, I, O = Subgraph.CLAIMS, Subgraph.PERSPECTIVES, Subgraph.INSTANCES, Subgraph.ONTOLOGY


def _row(s, p, o, g, subgraph) -> TriplePattern:
    def t(x):
        return var(x) if isinstance(x, str) else x

    return TriplePattern(t(s), t(p), t(o), t(g), subgraph)


_CLAIM_ROW = _row("subject", "predicate", "object", "claim", C)


def abstract_query(pattern: AbstractPattern) -> PatternQuery:
    """The pattern as a query with every slot variable.

    Instantiated slots are ``subject``, ``predicate``, ``object``, ``claim``;
    gap patterns also project ``gap_predicate`` and ``gap_type``. Other
    variables are internal (leading underscore)."""
    A = AbstractPattern
    if pattern is A.NEGATION_CONFLICT:
        return PatternQuery((
            _CLAIM_ROW,
            _row("_mention1", DENOTES, "claim", "_g1", P),
            _row("_mention1", HAS_ATTRIBUTION, "_attribution1", "_g2", P),
            _row("_attribution1", RDF_VALUE, POSITIVE, "_g3", P),
            _row("_mention2", DENOTES, "claim", "_g4", P),
            _row("_mention2", HAS_ATTRIBUTION, "_attribution2", "_g5", P),
            _row("_attribution2", RDF_VALUE, NEGATIVE, "_g6", P),
        ))
    if pattern is A.CARDINALITY_CONFLICT:
        return PatternQuery((
            _row("predicate", OWL_CARDINALITY, ONE, "_g1", O),
            _CLAIM_ROW,
            _row("subject", "predicate", "_object2", "_claim2", C),
        ), distinct=(("object", "_object2"),))
    if pattern is A.SUBJECT_GAP:
        return PatternQuery((
            _CLAIM_ROW,
            _row("subject", RDF_TYPE, "_type1", "_g1", I),
            _row("gap_predicate", RDFS_DOMAIN, "_type1", "_g2", O),
            _row("gap_predicate", RDFS_RANGE, "gap_type", "_g3", O),
        ))
    if pattern is A.OBJECT_GAP:
        return PatternQuery((
            _CLAIM_ROW,
            _row("object", RDF_TYPE, "_type1", "_g1", I),
            _row("gap_predicate", RDFS_DOMAIN, "_type1", "_g2", O),
            _row("gap_predicate", RDFS_RANGE, "gap_type", "_g3", O),
        ))
    if pattern is A.STATEMENT_NOVELTY:
        return PatternQuery((
            _CLAIM_ROW,
            _row("_mention1", DENOTES, "claim", "_g1", P),
            _row("_mention2", DENOTES, "claim", "_g2", P),
        ), distinct=(("_mention1", "_mention2"),))
    if pattern is A.ENTITY_NOVELTY:
        # the subject is denoted in two mentions: two claims about it, each mentioned
        return PatternQuery((
            _CLAIM_ROW,
            _row("subject", "_p1", "_o1", "_c1", C),
            _row("_mention1", DENOTES, "_c1", "_g1", P),
            _row("subject", "_p2", "_o2", "_c2", C),
            _row("_mention2", DENOTES, "_c2", "_g2", P),
        ), distinct=(("_mention1", "_mention2"),))
    if pattern is A.SUBJECT_OVERLAP:
        return PatternQuery((
            _CLAIM_ROW,
            _row("subject", "predicate", "_object2", "_claim2", C),
        ), distinct=(("object", "_object2"),))
    if pattern is A.OBJECT_OVERLAP:
        return PatternQuery((
            _CLAIM_ROW,
            _row("_subject2", "predicate", "object", "_claim2", C),
        ), distinct=(("subject", "_subject2"),))
    raise ValueError(pattern)


@dataclass(frozen=True, eq=False)
class DesireInstance:
    """An abstract pattern bound to the elements of the last iKG claim."""

    pattern: AbstractPattern
    bindings: dict[str, Term]
    involved_types: frozenset[str] = field(default_factory=frozenset)
    free_slot: str | None = None
    fallback: bool = False

    @property
    def key(self) -> tuple:
        return (self.pattern.index, tuple(sorted(self.bindings.items())), self.free_slot or "")

    def __eq__(self, other) -> bool:
        if not isinstance(other, DesireInstance):
            return NotImplemented
        return self.key == other.key and self.involved_types == other.involved_types

    def __hash__(self) -> int:
        return hash(self.key)

    def __lt__(self, other: "DesireInstance") -> bool:
        return self.key < other.key

    @property
    def action(self) -> tuple[AbstractPattern, frozenset[str]]:
        return (self.pattern, self.involved_types)

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern.label,
            "bindings": {k: _term_json(v) for k, v in sorted(self.bindings.items())},
            "involved_types": sorted(self.involved_types),
            "free_slot": self.free_slot,
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesireInstance":
        return cls(
            pattern=AbstractPattern.from_label(data["pattern"]),
            bindings={k: _term_from_json(v) for k, v in data["bindings"].items()},
            involved_types=frozenset(data.get("involved_types", ())),
            free_slot=data.get("free_slot"),
            fallback=data.get("fallback", False),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _term_json(term: Term):
    if term.is_iri:
        return term.value
    return {"value": term.value, "datatype": term.datatype}


def _term_from_json(value) -> Term:
    from .quadstore import literal

    if isinstance(value, dict):
        return literal(value["value"], value.get("datatype", ""))
    return iri(value)


def entity_types(store: QuadStore, entity: Term) -> set[str]:
    if not entity.is_iri:
        return set()
    return {q.object.value for q in store.find(s=entity, p=RDF_TYPE) if store.subgraph_of(q.graph) is I}


def has_claim_about(store: QuadStore, subject: Term, predicate: Term) -> bool:
    return any(store.subgraph_of(q.graph) is C for q in store.find(s=subject, p=predicate))


def _involved(store: QuadStore, binding: dict[str, Term], known: set[str], extra: str | None = None) -> frozenset[str]:
    types = entity_types(store, binding["subject"]) | entity_types(store, binding["object"])
    if extra:
        types.add(extra)
    if known:
        types &= known
    return frozenset(types)


def instantiate(ekg, claim_binding: dict[str, Term], pattern: AbstractPattern) -> list[DesireInstance]:
    """Instances of one pattern for one iKG claim against the eKG."""
    store = ekg.store if isinstance(ekg, EKG) else ekg
    known = set(ekg.ontology.types) if isinstance(ekg, EKG) else set()
    rows = store.match(abstract_query(pattern).substitute(claim_binding))
    out = []
    for row in rows:
        if pattern in GAP_PATTERNS:
            anchor = claim_binding["subject" if pattern is AbstractPattern.SUBJECT_GAP else "object"]
            gap_predicate = row["gap_predicate"]
            if has_claim_about(store, anchor, gap_predicate):
                continue
            gap_type = row["gap_type"]
            bindings = dict(claim_binding, gap_predicate=gap_predicate)
            involved = _involved(store, claim_binding, known, gap_type.value)
            out.append(DesireInstance(pattern, bindings, involved, local_name(gap_type.value)))
        else:
            out.append(DesireInstance(pattern, dict(claim_binding), _involved(store, claim_binding, known)))
    return out


def generate_desires(ekg, last_ikg: QuadStore, limit: int = MAX_INSTANCES) -> list[DesireInstance]:
    """All pattern instances for the claims of ``last_ikg``, canonical order.

    When nothing instantiates, a single fallback EntityNovelty instance on
    the iKG subject keeps the action set non-empty."""
    store = ekg.store if isinstance(ekg, EKG) else ekg
    known = set(ekg.ontology.types) if isinstance(ekg, EKG) else set()
    found: dict[tuple, DesireInstance] = {}
    claims = ikg_claims(last_ikg)
    for q in claims:
        binding = {"subject": q.subject, "predicate": q.predicate, "object": q.object, "claim": q.graph}
        for pattern in PATTERNS:
            for inst in instantiate(ekg, binding, pattern):
                found.setdefault(inst.key, inst)
    desires = sorted(found.values())
    if not desires and claims:
        q = claims[0]
        binding = {"subject": q.subject, "predicate": q.predicate, "object": q.object, "claim": q.graph}
        desires = [DesireInstance(AbstractPattern.ENTITY_NOVELTY, binding,
                                  _involved(store, binding, known), fallback=True)]
    return desires[:limit]


def render_user_query(desire: DesireInstance) -> PatternQuery:
    """Query to run against a user's knowledge base.

    Gaps ask for the free slot; a cardinality conflict asks for the user's
    value of the functional predicate; the other patterns ask for the
    user's perspective on the bound claim. The first pattern is always the
    claim row, so substituting a binding into it yields the answered triple."""
    A = AbstractPattern
    b = desire.bindings
    if desire.pattern is A.SUBJECT_GAP:
        return PatternQuery((TriplePattern(b["subject"], b["gap_predicate"], var("x"), var("_c"), C),))
    if desire.pattern is A.OBJECT_GAP:
        return PatternQuery((TriplePattern(b["object"], b["gap_predicate"], var("x"), var("_c"), C),))
    if desire.pattern is A.CARDINALITY_CONFLICT:
        return PatternQuery((TriplePattern(b["subject"], b["predicate"], var("x"), var("_c"), C),))
    return PatternQuery((
        TriplePattern(b["subject"], b["predicate"], b["object"], b["claim"], C),
        TriplePattern(var("_mention"), DENOTES, b["claim"], var("_g1"), P),
        TriplePattern(var("_mention"), HAS_ATTRIBUTION, var("attribution"), var("_g2"), P),
    ))
