import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgdesire.beliefnet import (
    ATTRIBUTION,
    DENOTES,
    DERIVED_FROM,
    EKG,
    G_INSTANCES,
    G_INTERACTIONS,
    G_ONTOLOGY,
    G_PERSPECTIVES,
    HAS_ACTOR,
    HAS_ATTRIBUTION,
    HAS_TIME,
    MENTION,
    ONE,
    OWL_CARDINALITY,
    POSITIVE,
    RDF_TYPE,
    RDF_VALUE,
    TURN,
    Capsule,
    Certainty,
    MalformedCapsule,
    Ontology,
    Polarity,
    PredicateSpec,
    Sentiment,
    build_ikg,
    cardinality_conflicts,
    claim_id,
    count_conflicts,
    integrate,
    list_claims,
    list_perspectives,
    negation_conflicts,
    perspectives_of,
    validate,
)
from kgdesire.namespaces import LFRIENDS, LTALK, LTIME, LWORLD, N2MU
from kgdesire.quadstore import Quad, QuadStore, iri


def marco_capsule(**kw):
    base = dict(source="marco", timestamp="14012022", subject="diana", predicate="live",
                obj="paris", polarity="positive", certainty="uncertain")
    base.update(kw)
    return Capsule.create(base.pop("source"), base.pop("timestamp"), base.pop("subject"),
                          base.pop("predicate"), base.pop("obj"), **base)


def test_single_capsule_ikg_shape():
    ikg = build_ikg(marco_capsule(), chat=1, turn=1)
    claim = iri(LWORLD + "diana_live_paris")
    turn = iri(LTALK + "chat1_turn1")
    mentions = [q.subject for q in ikg.find(p=RDF_TYPE, o=MENTION)]
    assert len(mentions) == 1
    m = mentions[0]
    (a,) = [q.object for q in ikg.find(s=m, p=HAS_ATTRIBUTION)]
    expected_provenance = {
        Quad(turn, RDF_TYPE, TURN, G_INTERACTIONS),
        Quad(turn, HAS_ACTOR, iri(LFRIENDS + "marco"), G_INTERACTIONS),
        Quad(turn, HAS_TIME, iri(LTIME + "14012022"), G_INTERACTIONS),
        Quad(m, RDF_TYPE, MENTION, G_PERSPECTIVES),
        Quad(m, DENOTES, claim, G_PERSPECTIVES),
        Quad(m, DERIVED_FROM, turn, G_PERSPECTIVES),
        Quad(m, HAS_ATTRIBUTION, a, G_PERSPECTIVES),
        Quad(a, RDF_TYPE, ATTRIBUTION, G_PERSPECTIVES),
        Quad(a, RDF_VALUE, POSITIVE, G_PERSPECTIVES),
        Quad(a, RDF_VALUE, Certainty.UNCERTAIN.term, G_PERSPECTIVES),
    }
    claim_quad = Quad(iri(LWORLD + "diana"), iri(N2MU + "live"), iri(LWORLD + "paris"), claim)
    assert ikg.quad_set() == expected_provenance | {claim_quad}
    assert len(expected_provenance) == 10
    assert m.value.startswith(LTALK + "chat1_turn1") and a.value.startswith(m.value)


def test_single_capsule_counts():
    ekg = EKG()
    integrate(ekg, build_ikg(marco_capsule()))
    assert len(list_claims(ekg)) == 1
    assert len(list_perspectives(ekg)) == 1
    assert count_conflicts(ekg) == 0
    assert validate(ekg) == []


def test_empty_ekg_counts():
    ekg = EKG()
    assert (len(list_claims(ekg)), len(list_perspectives(ekg)), count_conflicts(ekg)) == (0, 0, 0)


def test_claim_identity_by_triple():
    a = build_ikg(marco_capsule(source="marco"))
    b = build_ikg(marco_capsule(source="lea"))
    assert list_claims(a) == list_claims(b)
    ma = {q.subject for q in a.find(p=RDF_TYPE, o=MENTION)}
    mb = {q.subject for q in b.find(p=RDF_TYPE, o=MENTION)}
    assert ma.isdisjoint(mb)
    assert list_perspectives(a).isdisjoint(list_perspectives(b))


def test_sentiment_adds_one_value_quad():
    plain = build_ikg(marco_capsule())
    with_sentiment = build_ikg(marco_capsule(sentiment="neutral"))
    assert len(with_sentiment) == len(plain) + 1
    assert with_sentiment.find(o=Sentiment.NEUTRAL.term, p=RDF_VALUE)


@pytest.mark.parametrize("field,value", [("polarity", "maybe"), ("certainty", "sure"), ("sentiment", "angry")])
def test_capsule_enum_violation(field, value):
    with pytest.raises(MalformedCapsule):
        marco_capsule(**{field: value})


def test_capsule_requires_fields():
    with pytest.raises(MalformedCapsule):
        Capsule.from_dict({"source": "marco", "subject": "diana"})
    with pytest.raises(MalformedCapsule):
        marco_capsule(subject="  ")
    with pytest.raises(MalformedCapsule):
        build_ikg("not a capsule")


def test_capsule_json_round_trip():
    c = marco_capsule(sentiment="positive")
    assert Capsule.from_json(c.to_json()) == c
    assert set(json.loads(c.to_json())) == {
        "source", "timestamp", "subject", "predicate", "object", "polarity", "certainty", "sentiment"}
    lit = Capsule.create("marco", "t", "diana", "age", {"value": "32"})
    assert Capsule.from_dict(lit.to_dict()) == lit


def test_integrate_into_empty_ekg():
    onto = Ontology([N2MU.person], {N2MU.live: PredicateSpec(N2MU.person, N2MU.city)})
    ekg = EKG(onto)
    ikg = build_ikg(marco_capsule())
    integrate(ekg, ikg)
    assert ekg.store.quad_set() == ikg.quad_set() | set(onto.bootstrap_quads())


def test_integrate_idempotent():
    ekg = EKG()
    ikg = build_ikg(marco_capsule())
    integrate(ekg, ikg)
    before = ekg.store.quad_set()
    integrate(ekg, ikg)
    assert ekg.store.quad_set() == before


def test_two_sources_one_claim_two_mentions():
    ekg = EKG()
    integrate(ekg, build_ikg(marco_capsule(source="marco"), chat=1, turn=1))
    integrate(ekg, build_ikg(marco_capsule(source="lea"), chat=1, turn=2))
    (claim,) = list_claims(ekg)
    mentions = ekg.store.find(p=DENOTES, o=claim, g=G_PERSPECTIVES)
    assert len(mentions) == 2
    assert len(list_perspectives(ekg)) == 2
    assert len(perspectives_of(ekg, claim)) == 2


def test_negation_conflict_counted_once():
    ekg = EKG()
    integrate(ekg, build_ikg(marco_capsule(polarity="positive"), turn=1))
    integrate(ekg, build_ikg(marco_capsule(source="lea", polarity="negative"), turn=2))
    assert negation_conflicts(ekg) == {iri(LWORLD + "diana_live_paris")}
    assert count_conflicts(ekg) == 1


def test_cardinality_conflict_needs_functional_predicate():
    live = N2MU.live
    for functional, expected in ((True, 1), (False, 0)):
        onto = Ontology([N2MU.person, N2MU.city], {live: PredicateSpec(N2MU.person, N2MU.city, functional)})
        ekg = EKG(onto)
        integrate(ekg, build_ikg(marco_capsule(), turn=1, ontology=onto))
        integrate(ekg, build_ikg(marco_capsule(obj="amsterdam"), turn=2, ontology=onto))
        assert count_conflicts(ekg) == expected
        if functional:
            assert cardinality_conflicts(ekg) == {(iri(LWORLD + "diana"), iri(live))}
            assert Quad(iri(live), OWL_CARDINALITY, ONE, G_ONTOLOGY) in ekg.store


def test_ontology_types_instances():
    onto = Ontology([N2MU.person, N2MU.city], {N2MU.live: PredicateSpec(N2MU.person, N2MU.city)},
                    {LWORLD + "paris": frozenset({N2MU.capital})})
    ikg = build_ikg(marco_capsule(), ontology=onto)
    assert Quad(iri(LWORLD + "diana"), RDF_TYPE, iri(N2MU.person), G_INSTANCES) in ikg
    assert Quad(iri(LWORLD + "paris"), RDF_TYPE, iri(N2MU.capital), G_INSTANCES) in ikg
    assert Ontology.from_dict(json.loads(json.dumps(onto.to_dict()))) == onto


def test_reset_restores_bootstrap():
    onto = Ontology([N2MU.person], {N2MU.live: PredicateSpec(N2MU.person, N2MU.city, True)})
    ekg = EKG(onto)
    integrate(ekg, build_ikg(marco_capsule()))
    ekg.reset()
    assert ekg.store.quad_set() == set(onto.bootstrap_quads())


def test_validate_flags_broken_structure():
    claim = claim_id(iri(LWORLD + "a"), iri(N2MU + "b"), iri(LWORLD + "c"))
    store = QuadStore.from_quads([Quad(iri(LWORLD + "a"), iri(N2MU + "b"), iri(LWORLD + "c"), claim)])
    assert any("without mention" in p for p in validate(store))


names = st.sampled_from(["diana", "paris", "karla", "rome", "bo"])
capsules = st.builds(
    lambda src, s, p, o, pol, cert: Capsule.create(src, "t1", s, p, o, pol, cert),
    st.sampled_from(["marco", "lea"]), names, st.sampled_from(["live", "like"]), names,
    st.sampled_from(list(Polarity)), st.sampled_from(list(Certainty)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(capsules, min_size=1, max_size=8))
def test_integrate_monotone_and_valid(caps):
    ekg = EKG()
    prev_claims = set()
    for turn, c in enumerate(caps, start=1):
        integrate(ekg, build_ikg(c, chat=1, turn=turn))
        claims = list_claims(ekg)
        assert claims >= prev_claims
        assert validate(ekg) == []
        prev_claims = claims


@settings(max_examples=60, deadline=None)
@given(capsules, capsules)
def test_claim_id_deterministic(a, b):
    same = a.triple == b.triple
    assert claim_id(*a.triple) == claim_id(*a.triple)
    if same:
        assert list_claims(build_ikg(a)) == list_claims(build_ikg(b, turn=7))
