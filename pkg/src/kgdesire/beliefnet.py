"""Episodic belief networks: reified claims, perspectives and their provenance.

An eKG is a quad store split over five subgraphs (Ontology, Instances,
Claims, Perspectives, Interactions). Each utterance arrives as a
:class:`Capsule`, becomes an interaction graph (iKG) via :func:`build_ikg`
and is merged with :func:`integrate`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable

from .namespaces import (
    CERTAINTY,
    GAF,
    GRASP,
    INSTANCES_GRAPH,
    INTERACTIONS_GRAPH,
    LFRIENDS,
    LTALK,
    LTIME,
    LWORLD,
    N2MU,
    ONTOLOGY_GRAPH,
    OWL,
    PERSPECTIVES_GRAPH,
    POLARITY,
    PROV,
    RDF,
    RDFS,
    SEM,
    SENTIMENT,
    XSD,
    Subgraph,
    expand,
    local_name,
    slug,
)
from .quadstore import Quad, QuadStore, Term, iri, literal

RDF_TYPE = iri(RDF.type)
RDF_VALUE = iri(RDF.value)
RDFS_DOMAIN = iri(RDFS.domain)
RDFS_RANGE = iri(RDFS.range)
OWL_CARDINALITY = iri(OWL.cardinality)
ONE = literal("1", XSD.int)
DENOTES = iri(GAF.denotes)
HAS_ATTRIBUTION = iri(GRASP.hasAttribution)
DERIVED_FROM = iri(PROV.wasDerivedFrom)
HAS_ACTOR = iri(SEM.hasActor)
HAS_TIME = iri(SEM.hasTime)
TURN = iri(GRASP.Turn)
MENTION = iri(GRASP.Mention)
ATTRIBUTION = iri(GRASP.Attribution)

G_ONTOLOGY = iri(ONTOLOGY_GRAPH)
G_INSTANCES = iri(INSTANCES_GRAPH)
G_PERSPECTIVES = iri(PERSPECTIVES_GRAPH)
G_INTERACTIONS = iri(INTERACTIONS_GRAPH)


class MalformedCapsule(ValueError):
    pass


class Polarity(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def term(self) -> Term:
        return iri(POLARITY[self.value])


class Certainty(str, enum.Enum):
    CERTAIN = "certain"
    UNCERTAIN = "uncertain"

    @property
    def term(self) -> Term:
        return iri(CERTAINTY[self.value])


class Sentiment(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"

    @property
    def term(self) -> Term:
        return iri(SENTIMENT[self.value])


POSITIVE = Polarity.POSITIVE.term
NEGATIVE = Polarity.NEGATIVE.term
PERSPECTIVE_VALUES = [
    Polarity.POSITIVE.term,
    Polarity.NEGATIVE.term,
    Certainty.CERTAIN.term,
    Certainty.UNCERTAIN.term,
]


def _enum(cls, value, field_name):
    if isinstance(value, cls):
        return value
    try:
        return cls(str(value).lower())
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise MalformedCapsule(f"{field_name} must be one of {allowed}; got {value!r}") from None


def _as_iri(value, default_ns) -> Term:
    if isinstance(value, Term):
        return value
    if not value or not str(value).strip():
        raise MalformedCapsule("empty IRI field")
    return iri(expand(str(value).strip(), default_ns))


def _as_object(value) -> Term:
    if isinstance(value, Term):
        return value
    if isinstance(value, dict):
        return literal(value["value"], value.get("datatype", ""))
    return _as_iri(value, LWORLD)


@dataclass(frozen=True)
class Capsule:
    """One interlocutor utterance as a structured, perspectivised triple."""

    source: Term
    timestamp: Term
    subject: Term
    predicate: Term
    object: Term
    polarity: Polarity = Polarity.POSITIVE
    certainty: Certainty = Certainty.CERTAIN
    sentiment: Sentiment | None = None

    def __post_init__(self):
        if not self.subject.is_iri or not self.predicate.is_iri:
            raise MalformedCapsule("subject and predicate must be IRIs")
        if self.object.is_variable:
            raise MalformedCapsule("object cannot be a variable")
        object.__setattr__(self, "polarity", _enum(Polarity, self.polarity, "polarity"))
        object.__setattr__(self, "certainty", _enum(Certainty, self.certainty, "certainty"))
        if self.sentiment is not None:
            object.__setattr__(self, "sentiment", _enum(Sentiment, self.sentiment, "sentiment"))

    @classmethod
    def create(cls, source, timestamp, subject, predicate, obj, polarity="positive",
               certainty="certain", sentiment=None) -> "Capsule":
        """Build from plain names; bare names are expanded into the default namespaces."""
        try:
            return cls(
                source=_as_iri(source, LFRIENDS),
                timestamp=_as_iri(timestamp, LTIME),
                subject=_as_iri(subject, LWORLD),
                predicate=_as_iri(predicate, N2MU),
                object=_as_object(obj),
                polarity=polarity,
                certainty=certainty,
                sentiment=sentiment,
            )
        except (KeyError, TypeError) as exc:
            raise MalformedCapsule(str(exc)) from None

    @property
    def triple(self) -> tuple[Term, Term, Term]:
        return (self.subject, self.predicate, self.object)

    def to_dict(self) -> dict:
        obj = self.object
        return {
            "source": self.source.value,
            "timestamp": self.timestamp.value,
            "subject": self.subject.value,
            "predicate": self.predicate.value,
            "object": obj.value if obj.is_iri else {"value": obj.value, "datatype": obj.datatype},
            "polarity": self.polarity.value,
            "certainty": self.certainty.value,
            "sentiment": self.sentiment.value if self.sentiment else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Capsule":
        missing = {"source", "timestamp", "subject", "predicate", "object"} - set(data)
        if missing:
            raise MalformedCapsule(f"missing fields: {sorted(missing)}")
        return cls.create(
            data["source"], data["timestamp"], data["subject"], data["predicate"],
            data["object"], data.get("polarity", "positive"), data.get("certainty", "certain"),
            data.get("sentiment"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Capsule":
        return cls.from_dict(json.loads(text))


def _name(term: Term) -> str:
    return slug(local_name(term.value) if term.is_iri else term.value)


def claim_id(subject: Term, predicate: Term, obj: Term) -> Term:
    """Deterministic claim graph IRI: <subject>_<predicate>_<object>."""
    return iri(LWORLD + f"{_name(subject)}_{_name(predicate)}_{_name(obj)}")


@dataclass(frozen=True)
class PredicateSpec:
    domain: str
    range: str
    functional: bool = False


@dataclass
class Ontology:
    """World model: entity types, predicate signatures and known instances."""

    types: list[str] = field(default_factory=list)
    predicates: dict[str, PredicateSpec] = field(default_factory=dict)
    instance_types: dict[str, frozenset[str]] = field(default_factory=dict)

    def bootstrap_quads(self) -> list[Quad]:
        quads = []
        for pred, spec in sorted(self.predicates.items()):
            p = iri(pred)
            quads.append(Quad(p, RDFS_DOMAIN, iri(spec.domain), G_ONTOLOGY))
            quads.append(Quad(p, RDFS_RANGE, iri(spec.range), G_ONTOLOGY))
            if spec.functional:
                quads.append(Quad(p, OWL_CARDINALITY, ONE, G_ONTOLOGY))
        return quads

    def types_of(self, entity: Term, predicate: Term | None = None, role: str = "subject") -> frozenset[str]:
        if not entity.is_iri:
            return frozenset()
        known = self.instance_types.get(entity.value)
        if known:
            return known
        spec = self.predicates.get(predicate.value) if predicate is not None else None
        if spec is None:
            return frozenset()
        return frozenset([spec.domain if role == "subject" else spec.range])

    def instances(self) -> list[str]:
        return sorted(self.instance_types)

    def to_dict(self) -> dict:
        return {
            "types": list(self.types),
            "predicates": {
                p: {"domain": s.domain, "range": s.range, "functional": s.functional}
                for p, s in sorted(self.predicates.items())
            },
            "instance_types": {k: sorted(v) for k, v in sorted(self.instance_types.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Ontology":
        return cls(
            types=list(data.get("types", [])),
            predicates={p: PredicateSpec(**s) for p, s in data.get("predicates", {}).items()},
            instance_types={k: frozenset(v) for k, v in data.get("instance_types", {}).items()},
        )


def build_ikg(capsule: Capsule, chat: int = 1, turn: int = 1,
              ontology: Ontology | None = None) -> QuadStore:
    """Reify one capsule: the claim in its own named graph, plus a Turn,
    a Mention and an Attribution carrying polarity and certainty.

    With an ontology the iKG also types the claim's subject and object in
    the Instances subgraph."""
    if not isinstance(capsule, Capsule):
        raise MalformedCapsule(f"expected a Capsule, got {type(capsule).__name__}")
    s, p, o = capsule.triple
    claim = claim_id(s, p, o)
    turn_iri = iri(LTALK + f"chat{chat}_turn{turn}")
    mention = iri(LTALK + f"chat{chat}_turn{turn}_{_name(capsule.source)}_MEN1")
    attribution = iri(mention.value + "_ATTR1")

    quads = [
        Quad(s, p, o, claim),
        Quad(turn_iri, RDF_TYPE, TURN, G_INTERACTIONS),
        Quad(turn_iri, HAS_ACTOR, capsule.source, G_INTERACTIONS),
        Quad(turn_iri, HAS_TIME, capsule.timestamp, G_INTERACTIONS),
        Quad(mention, RDF_TYPE, MENTION, G_PERSPECTIVES),
        Quad(mention, DENOTES, claim, G_PERSPECTIVES),
        Quad(mention, DERIVED_FROM, turn_iri, G_PERSPECTIVES),
        Quad(mention, HAS_ATTRIBUTION, attribution, G_PERSPECTIVES),
        Quad(attribution, RDF_TYPE, ATTRIBUTION, G_PERSPECTIVES),
        Quad(attribution, RDF_VALUE, capsule.polarity.term, G_PERSPECTIVES),
        Quad(attribution, RDF_VALUE, capsule.certainty.term, G_PERSPECTIVES),
    ]
    if capsule.sentiment is not None:
        quads.append(Quad(attribution, RDF_VALUE, capsule.sentiment.term, G_PERSPECTIVES))
    if ontology is not None:
        for entity, role in ((s, "subject"), (o, "object")):
            for t in sorted(ontology.types_of(entity, p, role)):
                quads.append(Quad(entity, RDF_TYPE, iri(t), G_INSTANCES))
    return QuadStore.from_quads(quads)


class EKG:
    """An agent's episodic knowledge graph."""

    def __init__(self, ontology: Ontology | None = None, store: QuadStore | None = None):
        self.ontology = ontology or Ontology()
        if store is None:
            store = QuadStore.from_quads(self.ontology.bootstrap_quads())
        self.store = store

    def __len__(self) -> int:
        return len(self.store)

    def copy(self) -> "EKG":
        return EKG(self.ontology, self.store.copy())

    def reset(self) -> None:
        self.store = QuadStore.from_quads(self.ontology.bootstrap_quads())

    @property
    def entity_types(self) -> list[str]:
        return list(self.ontology.types)

    @property
    def predicate_types(self) -> list[str]:
        return sorted(self.ontology.predicates)


def integrate(ekg: EKG, ikg: QuadStore) -> EKG:
    """Merge an iKG into the eKG in place (set union) and return it."""
    ekg.store.update(ikg)
    return ekg


def ikg_claims(ikg: QuadStore) -> list[Quad]:
    """Claim quads carried by an iKG (or any store), canonical order."""
    return [q for q in ikg.quads() if ikg.subgraph_of(q.graph) is Subgraph.CLAIMS]


def list_claims(ekg) -> set[Term]:
    store = _store(ekg)
    return {q.graph for q in store if store.subgraph_of(q.graph) is Subgraph.CLAIMS}


def list_perspectives(ekg) -> set[Term]:
    store = _store(ekg)
    return {q.object for q in store.find(p=HAS_ATTRIBUTION, g=G_PERSPECTIVES)}


def negation_conflicts(ekg) -> set[Term]:
    """Claims holding both a positive and a negative attribution."""
    from .desires import AbstractPattern, abstract_query

    rows = _store(ekg).match(abstract_query(AbstractPattern.NEGATION_CONFLICT))
    return {b["claim"] for b in rows}


def cardinality_conflicts(ekg) -> set[tuple[Term, Term]]:
    """(subject, predicate) pairs with two objects for a cardinality-1 predicate."""
    from .desires import AbstractPattern, abstract_query

    rows = _store(ekg).match(abstract_query(AbstractPattern.CARDINALITY_CONFLICT))
    return {(b["subject"], b["predicate"]) for b in rows}


def count_conflicts(ekg) -> int:
    return len(negation_conflicts(ekg)) + len(cardinality_conflicts(ekg))


def perspectives_of(ekg, claim: Term) -> list[dict]:
    """Attributions on a claim with their polarity and certainty values."""
    store = _store(ekg)
    out = []
    for m in sorted(q.subject for q in store.find(p=DENOTES, o=claim, g=G_PERSPECTIVES)):
        for a in sorted(q.object for q in store.find(s=m, p=HAS_ATTRIBUTION, g=G_PERSPECTIVES)):
            values = {q.object for q in store.find(s=a, p=RDF_VALUE, g=G_PERSPECTIVES)}
            out.append({
                "mention": m,
                "attribution": a,
                "polarity": _pick(values, Polarity, POLARITY),
                "certainty": _pick(values, Certainty, CERTAINTY),
            })
    return out


def _pick(values: Iterable[Term], cls, ns):
    for v in sorted(values):
        if v.value.startswith(ns):
            try:
                return cls(v.value[len(ns):])
            except ValueError:
                pass
    return None


def claim_triple(ekg, claim: Term) -> tuple[Term, Term, Term] | None:
    found = _store(ekg).find(g=claim)
    if not found:
        return None
    q = min(found)
    return (q.subject, q.predicate, q.object)


def validate(ekg) -> list[str]:
    """Structural problems of a reified belief network (empty list if valid)."""
    store = _store(ekg)
    problems = []
    turns = {q.subject for q in store.find(p=RDF_TYPE, o=TURN, g=G_INTERACTIONS)}
    for claim in sorted(list_claims(store)):
        mentions = [q.subject for q in store.find(p=DENOTES, o=claim, g=G_PERSPECTIVES)]
        if not mentions:
            problems.append(f"claim without mention: {claim.value}")
    for q in store.find(p=RDF_TYPE, o=MENTION, g=G_PERSPECTIVES):
        m = q.subject
        if not store.find(s=m, p=HAS_ATTRIBUTION, g=G_PERSPECTIVES):
            problems.append(f"mention without attribution: {m.value}")
        sources = [x.object for x in store.find(s=m, p=DERIVED_FROM, g=G_PERSPECTIVES)]
        if not any(t in turns for t in sources):
            problems.append(f"mention not derived from a turn: {m.value}")
    for a in sorted(list_perspectives(store)):
        values = {q.object for q in store.find(s=a, p=RDF_VALUE, g=G_PERSPECTIVES)}
        if _pick(values, Polarity, POLARITY) is None:
            problems.append(f"attribution without polarity: {a.value}")
        if _pick(values, Certainty, CERTAINTY) is None:
            problems.append(f"attribution without certainty: {a.value}")
    return problems


def _store(ekg) -> QuadStore:
    return ekg.store if isinstance(ekg, EKG) else ekg
