import json

import pytest

from kgdesire.beliefnet import claim_triple, list_claims, validate
from kgdesire.dataio import (
    PREDICATES,
    REFERENCE_COUNTS,
    AttributeRecord,
    RecordError,
    UnknownPredicate,
    ingest,
    predicate_counts,
    read_records,
    sample_records_path,
    split_values,
    synth_kb,
)
from kgdesire.namespaces import LWORLD, N2MU
from kgdesire.quadstore import iri


def objects(store):
    return {claim_triple(store, c)[2].value.removeprefix(LWORLD) for c in list_claims(store)}


def test_list_value_split():
    store, stats = ingest([AttributeRecord("ginny", "Looks", "red hair, brown eyes", 1)])
    assert stats.claims == 2 and len(list_claims(store)) == 2
    assert objects(store) == {"red-hair", "brown-eyes"}
    assert {claim_triple(store, c)[1] for c in list_claims(store)} == {iri(N2MU + "looks")}


def test_punctuation_strip():
    store, _ = ingest([AttributeRecord("ginny", "Personality", "brave.", 2)])
    assert objects(store) == {"brave"}


@pytest.mark.parametrize("raw,expected", [
    ("a; b, c", ["a", "b", "c"]),
    ("  'quoted' ", ["quoted"]),
    ("x,,x", ["x"]),
    (";;", []),
])
def test_split_values(raw, expected):
    assert split_values(raw) == expected


def test_no_punctuation_or_empty_objects():
    store, stats = ingest([AttributeRecord("harry", "Talents", "flying!, ..., (seeker)", 1)])
    assert objects(store) == {"flying", "seeker"}
    assert stats.skipped_values == 0


def test_unknown_predicate_and_epoch_range():
    with pytest.raises(UnknownPredicate):
        AttributeRecord("ginny", "Wand", "yew", 1)
    for epoch in (0, 8, "x"):
        with pytest.raises(RecordError):
            AttributeRecord("ginny", "Looks", "red hair", epoch)
    assert AttributeRecord("ginny", "looks", "x", "3").predicate == "Looks"


def test_ingest_deterministic_and_idempotent():
    recs = read_records(sample_records_path())
    a, sa = ingest(recs)
    b, sb = ingest(recs)
    assert a == b and sa == sb
    c, _ = ingest(recs + recs)
    assert c == a


def test_sample_fixture():
    recs = read_records(sample_records_path())
    assert len(recs) == 10
    store, stats = ingest(recs)
    assert stats.claims == 16
    assert validate(store) == []
    assert stats.per_predicate["Looks"] == {"range": 5, "domain": 2}


def test_synth_single_character():
    store = synth_kb(1, seed=0)
    assert len(list_claims(store)) >= 12
    assert set(predicate_counts(store)) == set(PREDICATES)


def test_synth_deterministic():
    assert synth_kb(5, seed=3).quad_set() == synth_kb(5, seed=3).quad_set()
    assert synth_kb(5, seed=3).quad_set() != synth_kb(5, seed=4).quad_set()


def test_synth_skew_and_validity():
    store = synth_kb(50, seed=0)
    counts = predicate_counts(store)
    assert counts["Gender"]["range"] == 2
    assert counts["Looks"]["range"] > counts["Gender"]["range"]
    assert all(c["domain"] == 50 for c in counts.values())
    assert validate(store) == []


def test_reference_counts():
    assert REFERENCE_COUNTS["Looks"] == {"range": 428, "domain": 107}
    assert REFERENCE_COUNTS["Gender"] == {"range": 2, "domain": 124}
    assert len(REFERENCE_COUNTS) == 12


def test_read_csv_with_mapping(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("name,attr,val,book\nron,Hobbies,chess; quidditch,4\n")
    recs = read_records(path, {"character": "name", "predicate": "attr", "value": "val", "epoch": "book"})
    assert recs == [AttributeRecord("ron", "Hobbies", "chess; quidditch", 4)]


def test_read_jsonl(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text(json.dumps({"character": "ron", "predicate": "Age", "value": "11"}) + "\n\n")
    assert read_records(path) == [AttributeRecord("ron", "Age", "11", 1)]
    path.write_text("{broken\n")
    with pytest.raises(RecordError, match=":1:"):
        read_records(path)
