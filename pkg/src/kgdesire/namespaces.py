"""IRI namespaces and well-known terms of the belief-network vocabulary."""

from __future__ import annotations

import enum
import re


class Namespace(str):
    """A string prefix that builds full IRIs by attribute or item access."""

    def __getattr__(self, name: str) -> str:
        if name.startswith("__"):
            raise AttributeError(name)
        return self + name

    def __getitem__(self, name) -> str:  # type: ignore[override]
        if isinstance(name, str):
            return self + name
        return str.__getitem__(self, name)


RDF = Namespace("http://www.w3.org/1999/02/22-rdf-syntax-ns#")
RDFS = Namespace("http://www.w3.org/2000/01/rdf-schema#")
OWL = Namespace("http://www.w3.org/2002/07/owl#")
XSD = Namespace("http://www.w3.org/2001/XMLSchema#")
PROV = Namespace("http://www.w3.org/ns/prov#")
SEM = Namespace("http://semanticweb.cs.vu.nl/2009/11/sem/")
GAF = Namespace("http://groundedannotationframework.org/gaf#")
GRASP = Namespace("http://groundedannotationframework.org/grasp#")
POLARITY = Namespace("http://groundedannotationframework.org/grasp/polarity#")
CERTAINTY = Namespace("http://groundedannotationframework.org/grasp/certainty#")
SENTIMENT = Namespace("http://groundedannotationframework.org/grasp/sentiment#")

LWORLD = Namespace("http://cltl.nl/leolani/world/")
N2MU = Namespace("http://cltl.nl/leolani/n2mu/")
LTALK = Namespace("http://cltl.nl/leolani/talk/")
LFRIENDS = Namespace("http://cltl.nl/leolani/friends/")
LTIME = Namespace("http://cltl.nl/leolani/time/")

PREFIXES = {
    "rdf": RDF,
    "rdfs": RDFS,
    "owl": OWL,
    "xsd": XSD,
    "prov": PROV,
    "sem": SEM,
    "gaf": GAF,
    "grasp": GRASP,
    "graspPolarity": POLARITY,
    "graspCertainty": CERTAINTY,
    "graspSentiment": SENTIMENT,
    "lWorld": LWORLD,
    "n2mu": N2MU,
    "lTalk": LTALK,
    "lFriends": LFRIENDS,
    "lTime": LTIME,
}

ONTOLOGY_GRAPH = LWORLD.Ontology
INSTANCES_GRAPH = LWORLD.Instances
PERSPECTIVES_GRAPH = LTALK.Perspectives
INTERACTIONS_GRAPH = LTALK.Interactions


class Subgraph(enum.Enum):
    ONTOLOGY = "ontology"
    INSTANCES = "instances"
    CLAIMS = "claims"
    PERSPECTIVES = "perspectives"
    INTERACTIONS = "interactions"
    ANY = "any"


_FIXED_GRAPHS = {
    ONTOLOGY_GRAPH: Subgraph.ONTOLOGY,
    INSTANCES_GRAPH: Subgraph.INSTANCES,
    PERSPECTIVES_GRAPH: Subgraph.PERSPECTIVES,
    INTERACTIONS_GRAPH: Subgraph.INTERACTIONS,
}


def classify_graph(iri: str) -> Subgraph | None:
    """Subgraph a graph IRI belongs to; claim graphs live in the world namespace."""
    fixed = _FIXED_GRAPHS.get(iri)
    if fixed is not None:
        return fixed
    if iri.startswith(LWORLD):
        return Subgraph.CLAIMS
    return None


def shrink(iri: str) -> str:
    """Compact an IRI to prefix:local form when a known prefix applies."""
    best = None
    for prefix, ns in PREFIXES.items():
        if iri.startswith(ns) and (best is None or len(ns) > len(PREFIXES[best])):
            best = prefix
    if best is None:
        return iri
    return f"{best}:{iri[len(PREFIXES[best]):]}"


def expand(name: str, default: Namespace = LWORLD) -> str:
    """Expand prefix:local or a bare local name into a full IRI."""
    if "://" in name or name.startswith("urn:") or name.startswith("mailto:"):
        return name
    if ":" in name:
        prefix, local = name.split(":", 1)
        if prefix in PREFIXES:
            return PREFIXES[prefix] + local
        return name
    return default + slug(name)


_SLUG_STRIP = re.compile(r"[^0-9a-z\-]+")


def slug(text: str) -> str:
    """Local-name form of free text: lowercase, underscores and spaces to dashes."""
    text = text.strip().lower().replace("_", "-").replace(" ", "-")
    text = _SLUG_STRIP.sub("", text)
    text = re.sub(r"-{2,}", "-", text).strip("-")
    return text or "x"


def local_name(iri: str) -> str:
    for sep in ("#", "/", ":"):
        if sep in iri:
            iri = iri.rsplit(sep, 1)[1]
    return iri
