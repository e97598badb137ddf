"""Simulated knowledge sources of varying quality.

A user model is a reified knowledge base answering pattern queries. The
vanilla user holds the source KB verbatim; each imperfect kind corrupts
exactly floor(C/2) of its C claims in one specific way.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .beliefnet import (
    DENOTES,
    G_PERSPECTIVES,
    HAS_ATTRIBUTION,
    RDF_VALUE,
    Capsule,
    Certainty,
    Polarity,
    claim_id,
    claim_triple,
    list_claims,
    perspectives_of,
)
from .namespaces import LFRIENDS, LTIME
from .nquads import export_nquads, read_nquads, write_nquads
from .quadstore import PatternQuery, Quad, QuadStore, Term, iri


class EmptyKnowledgeBase(ValueError):
    pass


class UserKind(str, enum.Enum):
    VANILLA = "vanilla"
    AMATEUR = "amateur"
    DOUBTFUL = "doubtful"
    INCOHERENT = "incoherent"
    CONFUSED = "confused"


@dataclass
class UserModel:
    kind: UserKind
    kb: QuadStore
    rng_seed: int = 0
    name: str = ""
    altered: list[Term] = field(default_factory=list)
    random_answers: bool = False
    timestamp: Term = field(default_factory=lambda: iri(LTIME + "simulation"))

    def __post_init__(self):
        self.kind = UserKind(self.kind)
        if not self.name:
            self.name = f"{self.kind.value}-{self.rng_seed}"
        self._claims = sorted(list_claims(self.kb))

    @property
    def source(self) -> Term:
        return iri(LFRIENDS + self.name)

    @property
    def claims(self) -> list[Term]:
        return list(self._claims)

    def capsule_for(self, claim: Term) -> Capsule:
        triple = claim_triple(self.kb, claim)
        if triple is None:
            raise KeyError(claim)
        views = perspectives_of(self.kb, claim)
        polarity = next((v["polarity"] for v in views if v["polarity"]), Polarity.POSITIVE)
        certainty = next((v["certainty"] for v in views if v["certainty"]), Certainty.CERTAIN)
        return Capsule(self.source, self.timestamp, *triple, polarity=polarity, certainty=certainty)

    def random_capsule(self, rng: random.Random) -> Capsule:
        if not self._claims:
            raise EmptyKnowledgeBase(f"user {self.name} knows nothing")
        return self.capsule_for(rng.choice(self._claims))

    def answer(self, query: PatternQuery, rng: random.Random) -> Capsule:
        return self.reply(query, rng)[0]

    def reply(self, query: PatternQuery, rng: random.Random) -> tuple[Capsule, bool]:
        """Answer ``query``; returns (capsule, answered). Without a match
        the user volunteers a random claim of its own (answered=False)."""
        if not self._claims:
            raise EmptyKnowledgeBase(f"user {self.name} knows nothing")
        rows = self.kb.match(query)
        if rows:
            row = rng.choice(rows) if self.random_answers else rows[0]
            head = query.patterns[0].substitute(row)
            s, p, o = head.subject, head.predicate, head.object
            if not (s.is_variable or p.is_variable or o.is_variable):
                return self.capsule_for(claim_id(s, p, o)), True
        return self.random_capsule(rng), False


def _select(claims: list[Term], seed: int, kind: UserKind) -> list[Term]:
    rng = random.Random(f"{seed}:{kind.value}")
    return sorted(rng.sample(claims, len(claims) // 2))


def corrupt(base_kb: QuadStore, kind, seed: int = 0, name: str = "") -> UserModel:
    """User model of ``kind`` derived from ``base_kb``; deterministic in (base_kb, kind, seed)."""
    kind = UserKind(kind)
    claims = sorted(list_claims(base_kb))
    if kind is UserKind.VANILLA:
        return UserModel(kind, base_kb.copy(), seed, name)
    if not claims:
        raise EmptyKnowledgeBase("cannot corrupt a knowledge base without claims")
    kb = base_kb.copy()
    chosen = _select(claims, seed, kind)
    if kind is UserKind.AMATEUR:
        for c in chosen:
            _drop_claim(kb, c)
    elif kind is UserKind.DOUBTFUL:
        for c in chosen:
            _set_value(kb, c, Certainty)
    elif kind is UserKind.INCOHERENT:
        for c in chosen:
            _set_value(kb, c, Polarity)
    elif kind is UserKind.CONFUSED:
        chosen = _confuse(kb, base_kb, chosen, seed)
    return UserModel(kind, kb, seed, name, altered=chosen)


def _drop_claim(kb: QuadStore, claim: Term) -> None:
    for q in kb.find(g=claim):
        kb.remove(q)
    for m in [q.subject for q in kb.find(p=DENOTES, o=claim, g=G_PERSPECTIVES)]:
        for q in kb.find(s=m, g=G_PERSPECTIVES):
            if q.predicate == HAS_ATTRIBUTION:
                for aq in kb.find(s=q.object, g=G_PERSPECTIVES):
                    kb.remove(aq)
            kb.remove(q)


def _set_value(kb: QuadStore, claim: Term, enum_cls) -> None:
    target = Certainty.UNCERTAIN.term if enum_cls is Certainty else Polarity.NEGATIVE.term
    family = {m.term for m in enum_cls}
    for view in perspectives_of(kb, claim):
        a = view["attribution"]
        for q in kb.find(s=a, p=RDF_VALUE, g=G_PERSPECTIVES):
            if q.object in family:
                kb.remove(q)
        kb.insert(Quad(a, RDF_VALUE, target, G_PERSPECTIVES))


def _confuse(kb: QuadStore, base_kb: QuadStore, chosen: list[Term], seed: int) -> list[Term]:
    rng = random.Random(f"{seed}:confused:objects")
    pool = sorted({claim_triple(base_kb, c)[2] for c in list_claims(base_kb)})
    taken = {claim_triple(base_kb, c) for c in list_claims(base_kb)}
    for c in chosen:
        s, p, o = claim_triple(base_kb, c)
        candidates = [x for x in pool if x != o and (s, p, x) not in taken]
        if not candidates:
            raise EmptyKnowledgeBase(f"no replacement object available for {c.value}")
        new_o = rng.choice(candidates)
        taken.add((s, p, new_o))
        new_claim = claim_id(s, p, new_o)
        for q in kb.find(g=c):
            kb.remove(q)
        kb.insert(Quad(s, p, new_o, new_claim))
        for q in kb.find(p=DENOTES, o=c, g=G_PERSPECTIVES):
            kb.remove(q)
            kb.insert(Quad(q.subject, DENOTES, new_claim, G_PERSPECTIVES))
    return chosen


def kb_digest(kb: QuadStore) -> str:
    return hashlib.sha256(export_nquads(kb).encode("utf-8")).hexdigest()


def make_population(base_kb: QuadStore, kinds, instances: int = 100, seed: int = 0) -> list[UserModel]:
    """``instances`` users per imperfect kind (one vanilla user)."""
    users = []
    for kind in kinds:
        kind = UserKind(kind)
        count = 1 if kind is UserKind.VANILLA else instances
        for i in range(count):
            users.append(corrupt(base_kb, kind, seed + i, name=f"{kind.value}-{seed + i}"))
    return users


def save_population(users: list[UserModel], base_kb: QuadStore, directory) -> Path:
    """Write each user KB as N-Quads plus a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for user in users:
        fname = f"{user.name}.nq"
        write_nquads(user.kb, directory / fname)
        entries.append({"name": user.name, "kind": user.kind.value, "seed": user.rng_seed, "file": fname})
    manifest = {"base_hash": kb_digest(base_kb), "users": entries}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path


def load_population(directory) -> list[UserModel]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    return [
        UserModel(e["kind"], read_nquads(directory / e["file"]), e["seed"], e["name"])
        for e in manifest["users"]
    ]
