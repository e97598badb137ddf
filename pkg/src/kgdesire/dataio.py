"""Character-attribute tables to reified claims, plus a synthetic generator."""

from __future__ import annotations

import csv
import json
import os
import random
import re
import string
from dataclasses import dataclass, field
from pathlib import Path

from .beliefnet import Capsule, Ontology, PredicateSpec, build_ikg, claim_triple, list_claims
from .namespaces import LFRIENDS, LTIME, LWORLD, N2MU, slug
from .quadstore import QuadStore, iri

# name -> (range type, functional, distinct objects, distinct subjects)
PREDICATE_TABLE = {
    "Looks": ("appearance", False, 428, 107),
    "Spells": ("spell", False, 200, 47),
    "Belongings": ("belonging", False, 189, 49),
    "Title": ("title", False, 101, 86),
    "Personality": ("trait", False, 39, 46),
    "Affiliation": ("organization", False, 27, 94),
    "Hobbies": ("hobby", False, 23, 22),
    "Export": ("expertise", False, 16, 24),
    "Talents": ("talent", False, 15, 13),
    "Lineage": ("lineage", True, 11, 83),
    "Age": ("age", True, 11, 106),
    "Gender": ("gender", True, 2, 124),
}
PREDICATES = tuple(PREDICATE_TABLE)
REFERENCE_COUNTS = {p: {"range": r[2], "domain": r[3]} for p, r in PREDICATE_TABLE.items()}
PERSON = N2MU.person
SOURCE = LFRIENDS.hpd
DATASET_ENV = "KGDESIRE_HPD_PATH"

_SPLIT = re.compile(r"[,;]")
_TRIM = string.punctuation + string.whitespace + "“”‘’"


class UnknownPredicate(ValueError):
    pass


class RecordError(ValueError):
    pass


def predicate_iri(name: str) -> str:
    return N2MU + canonical_predicate(name).lower()


def type_iri(name: str) -> str:
    return N2MU + name


def canonical_predicate(name: str) -> str:
    key = str(name).strip().lower()
    for p in PREDICATES:
        if p.lower() == key:
            return p
    raise UnknownPredicate(f"unknown predicate {name!r}; expected one of {', '.join(PREDICATES)}")


@dataclass(frozen=True)
class AttributeRecord:
    character: str
    predicate: str
    value: str
    epoch: int = 1

    def __post_init__(self):
        object.__setattr__(self, "predicate", canonical_predicate(self.predicate))
        try:
            epoch = int(self.epoch)
        except (TypeError, ValueError):
            raise RecordError(f"epoch must be an integer, got {self.epoch!r}") from None
        if not 1 <= epoch <= 7:
            raise RecordError(f"epoch must lie in 1..7, got {epoch}")
        object.__setattr__(self, "epoch", epoch)
        if not str(self.character).strip():
            raise RecordError("empty character name")


def split_values(raw: str) -> list[str]:
    """List items of a raw attribute value, trimmed of surrounding punctuation."""
    out = []
    for part in _SPLIT.split(str(raw)):
        item = part.strip(_TRIM)
        if item and item not in out:
            out.append(item)
    return out


def hpd_ontology(instance_types: dict[str, frozenset[str]] | None = None) -> Ontology:
    """Person-centred ontology over the twelve attribute predicates."""
    types = [PERSON] + [type_iri(r[0]) for r in PREDICATE_TABLE.values()]
    predicates = {
        predicate_iri(p): PredicateSpec(PERSON, type_iri(r[0]), r[1]) for p, r in PREDICATE_TABLE.items()
    }
    return Ontology(types, predicates, dict(instance_types or {}))


@dataclass
class IngestStats:
    records: int = 0
    claims: int = 0
    skipped_values: int = 0
    per_predicate: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "records": self.records,
            "claims": self.claims,
            "skipped_values": self.skipped_values,
            "per_predicate": self.per_predicate,
        }

    def mismatches(self, reference: dict = REFERENCE_COUNTS) -> dict[str, tuple]:
        out = {}
        for p, ref in reference.items():
            got = self.per_predicate.get(p, {"range": 0, "domain": 0})
            if (got["range"], got["domain"]) != (ref["range"], ref["domain"]):
                out[p] = ((got["range"], got["domain"]), (ref["range"], ref["domain"]))
        return out


def _entity(name: str):
    return iri(LWORLD + slug(name))


def ingest(records, ontology: Ontology | None = None) -> tuple[QuadStore, IngestStats]:
    """Reify every list item of every record as a positive, certain claim."""
    records = list(records)
    stats = IngestStats(records=len(records))
    triples: dict[tuple, int] = {}
    for rec in records:
        if not isinstance(rec, AttributeRecord):
            rec = AttributeRecord(**rec)
        for item in split_values(rec.value):
            if not re.search(r"[0-9A-Za-z]", item):
                stats.skipped_values += 1
                continue
            key = (_entity(rec.character), iri(predicate_iri(rec.predicate)), _entity(item))
            triples.setdefault(key, rec.epoch)
    ontology = ontology or hpd_ontology(_instance_types(triples))
    store = QuadStore()
    for turn, ((s, p, o), epoch) in enumerate(triples.items(), start=1):
        capsule = Capsule(iri(SOURCE), iri(LTIME + f"book{epoch}"), s, p, o)
        store.update(build_ikg(capsule, chat=epoch, turn=turn, ontology=ontology))
    stats.claims = len(list_claims(store))
    stats.per_predicate = predicate_counts(store)
    return store, stats


def _instance_types(triples) -> dict[str, frozenset[str]]:
    types: dict[str, set[str]] = {}
    by_iri = {predicate_iri(p): r for p, r in PREDICATE_TABLE.items()}
    for s, p, o in triples:
        types.setdefault(s.value, set()).add(PERSON)
        row = by_iri.get(p.value)
        if row is not None:
            types.setdefault(o.value, set()).add(type_iri(row[0]))
    return {k: frozenset(v) for k, v in types.items()}


def predicate_counts(store: QuadStore) -> dict[str, dict[str, int]]:
    """Distinct objects (range) and subjects (domain) per predicate."""
    names = {predicate_iri(p): p for p in PREDICATES}
    subjects: dict[str, set] = {}
    objects: dict[str, set] = {}
    for c in list_claims(store):
        s, p, o = claim_triple(store, c)
        name = names.get(p.value, p.value)
        subjects.setdefault(name, set()).add(s)
        objects.setdefault(name, set()).add(o)
    return {
        name: {"range": len(objects[name]), "domain": len(subjects[name])}
        for name in sorted(subjects)
    }


def ontology_for(store: QuadStore) -> Ontology:
    """Ontology whose instance list covers the subjects and objects of ``store``."""
    triples = [claim_triple(store, c) for c in list_claims(store)]
    return hpd_ontology(_instance_types(triples))


def synth_kb(characters: int, seed: int = 0, limit: int | None = None,
             multi_value_rate: float = 0.3) -> QuadStore:
    """Synthetic character KB: every character gets all twelve predicates,
    drawing values from pools sized like the reference range counts.

    ``limit`` truncates to the first ``limit`` claims in generation order."""
    if characters < 1:
        raise ValueError("characters must be >= 1")
    rng = random.Random(f"synth:{seed}")
    records = []
    for i in range(characters):
        name = f"character-{i:03d}"
        epoch = rng.randint(1, 7)
        for pred, (range_type, functional, pool, _) in PREDICATE_TABLE.items():
            count = 1 if functional or rng.random() >= multi_value_rate else 2
            picks = rng.sample(range(pool), count)
            values = [_pool_value(range_type, k) for k in picks]
            for v in values:
                records.append(AttributeRecord(name, pred, v, epoch))
    if limit is not None:
        records = records[:limit]
    store, _ = ingest(records)
    return store


def _pool_value(range_type: str, k: int) -> str:
    if range_type == "gender":
        return ("female", "male")[k]
    return f"{range_type}-{k:03d}"


DEFAULT_MAPPING = {"character": "character", "predicate": "predicate", "value": "value", "epoch": "epoch"}


def load_mapping(path) -> dict[str, str]:
    mapping = dict(DEFAULT_MAPPING)
    if path:
        mapping.update(json.loads(Path(path).read_text(encoding="utf-8")))
    return mapping


def read_records(path, mapping: dict[str, str] | None = None) -> list[AttributeRecord]:
    """AttributeRecords from a CSV or JSON-lines file, columns renamed by ``mapping``."""
    path = Path(path)
    mapping = mapping or DEFAULT_MAPPING
    rows: list[dict] = []
    if path.suffix.lower() in (".jsonl", ".ndjson", ".json"):
        for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise RecordError(f"{path}:{n}: {exc.msg}") from None
    else:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    out = []
    for n, row in enumerate(rows, start=1):
        try:
            fields = {k: row[col] for k, col in mapping.items() if col in row}
            fields.setdefault("epoch", 1)
            out.append(AttributeRecord(**fields))
        except TypeError as exc:
            raise RecordError(f"{path}: record {n}: {exc}") from None
    return out


def write_stats(stats: IngestStats, path) -> None:
    Path(path).write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True), encoding="utf-8")


def dataset_path() -> Path | None:
    value = os.environ.get(DATASET_ENV)
    return Path(value) if value else None


def sample_records_path() -> Path:
    return Path(__file__).with_name("data") / "sample_records.csv"
