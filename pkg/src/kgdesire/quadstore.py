"""In-memory quad store with named graphs and a basic-graph-pattern matcher.

Terms are interned to integer handles; every stored quad is a 4-tuple of
handles, indexed by graph, subject, predicate, object, (s, p) and (p, o).
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

from .namespaces import Subgraph, classify_graph

VARIABLE_MARKER = "?"


class MalformedTerm(ValueError):
    pass


class TermKind(enum.IntEnum):
    IRI = 0
    LITERAL = 1
    VARIABLE = 2


@dataclass(frozen=True, order=True, slots=True)
class Term:
    kind: TermKind
    value: str
    datatype: str = ""

    def __post_init__(self):
        if self.kind is TermKind.IRI:
            if not self.value or ":" not in self.value:
                raise MalformedTerm(f"IRI without namespace: {self.value!r}")
            if any(c in self.value for c in ' <>"{}|^`\\\n'):
                raise MalformedTerm(f"illegal character in IRI: {self.value!r}")
        elif self.kind is TermKind.VARIABLE:
            if not self.value.startswith(VARIABLE_MARKER) or len(self.value) < 2:
                raise MalformedTerm(f"variable must start with {VARIABLE_MARKER!r}: {self.value!r}")
        elif self.datatype and ":" not in self.datatype:
            raise MalformedTerm(f"bad datatype IRI: {self.datatype!r}")

    @property
    def is_variable(self) -> bool:
        return self.kind is TermKind.VARIABLE

    @property
    def is_iri(self) -> bool:
        return self.kind is TermKind.IRI

    @property
    def is_literal(self) -> bool:
        return self.kind is TermKind.LITERAL

    @property
    def name(self) -> str:
        """Variable name without the marker."""
        return self.value[1:]

    def __str__(self) -> str:
        if self.kind is TermKind.IRI:
            return f"<{self.value}>"
        if self.kind is TermKind.VARIABLE:
            return self.value
        return f'"{self.value}"' + (f"^^<{self.datatype}>" if self.datatype else "")


def iri(value: str) -> Term:
    return Term(TermKind.IRI, value)


def literal(value, datatype: str = "") -> Term:
    return Term(TermKind.LITERAL, str(value), datatype)


def var(name: str) -> Term:
    if not name.startswith(VARIABLE_MARKER):
        name = VARIABLE_MARKER + name
    return Term(TermKind.VARIABLE, name)


class Quad(NamedTuple):
    subject: Term
    predicate: Term
    object: Term
    graph: Term


def quad(s, p, o, g) -> Quad:
    """Build a quad from Terms or plain IRI strings."""
    return Quad(*(t if isinstance(t, Term) else iri(t) for t in (s, p, o, g)))


def check_quad(q: Quad) -> None:
    for position, term in zip(("subject", "predicate", "object", "graph"), q):
        if not isinstance(term, Term):
            raise MalformedTerm(f"{position} is not a Term: {term!r}")
        if term.is_variable:
            raise MalformedTerm(f"variable in stored quad ({position}): {term}")
    if not q.subject.is_iri:
        raise MalformedTerm(f"subject must be an IRI: {q.subject}")
    if not q.predicate.is_iri:
        raise MalformedTerm(f"predicate must be an IRI: {q.predicate}")
    if not q.graph.is_iri:
        raise MalformedTerm(f"graph must be an IRI: {q.graph}")


@dataclass(frozen=True)
class TriplePattern:
    """A quad-shaped pattern; any position may hold a Variable."""

    subject: Term
    predicate: Term
    object: Term
    graph: Term
    subgraph: Subgraph = Subgraph.ANY

    def __post_init__(self):
        if self.predicate.is_literal:
            raise MalformedTerm("literal in predicate position")
        if self.graph.is_literal:
            raise MalformedTerm("literal in graph position")

    @property
    def terms(self) -> tuple[Term, Term, Term, Term]:
        return (self.subject, self.predicate, self.object, self.graph)

    def variables(self) -> set[str]:
        return {t.name for t in self.terms if t.is_variable}

    def substitute(self, binding: dict[str, Term]) -> "TriplePattern":
        s, p, o, g = (binding.get(t.name, t) if t.is_variable else t for t in self.terms)
        return TriplePattern(s, p, o, g, self.subgraph)


_anon_counter = 0


def pattern(s, p, o, g=None, subgraph: Subgraph = Subgraph.ANY) -> TriplePattern:
    """Convenience constructor: strings starting with '?' become variables,
    other strings IRIs; a missing graph becomes an anonymous variable."""
    global _anon_counter

    def term(x):
        if isinstance(x, Term):
            return x
        if isinstance(x, str) and x.startswith(VARIABLE_MARKER):
            return var(x)
        return iri(x)

    if g is None:
        _anon_counter += 1
        g = var(f"?_g{_anon_counter}")
    return TriplePattern(term(s), term(p), term(o), term(g), subgraph)


@dataclass(frozen=True)
class PatternQuery:
    """Conjunction of triple patterns. Shared variable names are join
    constraints; ``distinct`` lists pairs that must bind to different terms
    (each side a variable name or a constant Term). Variables whose name
    starts with '_' are not projected."""

    patterns: tuple[TriplePattern, ...]
    distinct: tuple[tuple, ...] = ()

    def __post_init__(self):
        if not self.patterns:
            raise ValueError("a PatternQuery needs at least one pattern")
        object.__setattr__(self, "patterns", tuple(self.patterns))
        names = self.variables()
        pairs = []
        for pair in self.distinct:
            sides = []
            for side in pair:
                if isinstance(side, str):
                    side = side.lstrip(VARIABLE_MARKER)
                    if side not in names:
                        raise ValueError(f"distinct constraint on unknown variable: {side}")
                elif not isinstance(side, Term):
                    raise TypeError(f"distinct side must be a name or Term: {side!r}")
                sides.append(side)
            pairs.append(tuple(sides))
        object.__setattr__(self, "distinct", tuple(pairs))

    def variables(self) -> set[str]:
        out: set[str] = set()
        for p in self.patterns:
            out |= p.variables()
        return out

    def projected(self) -> list[str]:
        return sorted(v for v in self.variables() if not v.startswith("_"))

    def substitute(self, binding: dict[str, Term]) -> "PatternQuery":
        patterns = tuple(p.substitute(binding) for p in self.patterns)
        distinct = tuple(
            tuple(binding.get(x, x) if isinstance(x, str) else x for x in pair)
            for pair in self.distinct
        )
        return PatternQuery(patterns, distinct)


Binding = dict[str, Term]


def canonical_key(binding: Binding) -> tuple:
    return tuple(sorted(binding.items()))


_S, _P, _O, _G = range(4)


@dataclass
class QuadStore:
    """A set of quads with hash indexes. Single writer; readers may share."""

    _ids: dict[Term, int] = field(default_factory=dict, repr=False)
    _terms: list[Term] = field(default_factory=list, repr=False)
    _quads: set[tuple[int, int, int, int]] = field(default_factory=set, repr=False)
    _by_g: dict = field(default_factory=lambda: defaultdict(set), repr=False)
    _by_s: dict = field(default_factory=lambda: defaultdict(set), repr=False)
    _by_p: dict = field(default_factory=lambda: defaultdict(set), repr=False)
    _by_o: dict = field(default_factory=lambda: defaultdict(set), repr=False)
    _by_sp: dict = field(default_factory=lambda: defaultdict(set), repr=False)
    _by_po: dict = field(default_factory=lambda: defaultdict(set), repr=False)
    _graph_kind: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_quads(cls, quads: Iterable[Quad]) -> "QuadStore":
        store = cls()
        store.update(quads)
        return store

    # -- interning -----------------------------------------------------
    def _intern(self, term: Term) -> int:
        tid = self._ids.get(term)
        if tid is None:
            tid = len(self._terms)
            self._ids[term] = tid
            self._terms.append(term)
        return tid

    def _key(self, q: Quad) -> tuple[int, int, int, int] | None:
        ids = self._ids
        try:
            return (ids[q[0]], ids[q[1]], ids[q[2]], ids[q[3]])
        except KeyError:
            return None

    def _decode(self, key: tuple[int, int, int, int]) -> Quad:
        t = self._terms
        return Quad(t[key[0]], t[key[1]], t[key[2]], t[key[3]])

    # -- mutation ------------------------------------------------------
    def insert(self, q: Quad) -> bool:
        """Add a quad; returns False if it was already present."""
        check_quad(q)
        key = tuple(self._intern(t) for t in q)
        if key in self._quads:
            return False
        s, p, o, g = key
        self._quads.add(key)
        self._by_g[g].add(key)
        self._by_s[s].add(key)
        self._by_p[p].add(key)
        self._by_o[o].add(key)
        self._by_sp[(s, p)].add(key)
        self._by_po[(p, o)].add(key)
        return True

    def update(self, quads: Iterable[Quad]) -> int:
        return sum(self.insert(q) for q in quads)

    def remove(self, q: Quad) -> bool:
        key = self._key(q)
        if key is None or key not in self._quads:
            return False
        s, p, o, g = key
        self._quads.discard(key)
        for index, k in (
            (self._by_g, g),
            (self._by_s, s),
            (self._by_p, p),
            (self._by_o, o),
            (self._by_sp, (s, p)),
            (self._by_po, (p, o)),
        ):
            bucket = index[k]
            bucket.discard(key)
            if not bucket:
                del index[k]
        return True

    def copy(self) -> "QuadStore":
        return QuadStore.from_quads(self)

    # -- inspection ----------------------------------------------------
    def __len__(self) -> int:
        return len(self._quads)

    def __contains__(self, q) -> bool:
        key = self._key(q)
        return key is not None and key in self._quads

    def __iter__(self) -> Iterator[Quad]:
        for key in self._quads:
            yield self._decode(key)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuadStore):
            return NotImplemented
        return self.quad_set() == other.quad_set()

    __hash__ = None  # type: ignore[assignment]

    def quad_set(self) -> set[Quad]:
        return set(self)

    def quads(self) -> list[Quad]:
        """All quads in canonical (g, s, p, o) order."""
        return sorted(self, key=lambda q: (q.graph, q.subject, q.predicate, q.object))

    def find(self, s: Term | None = None, p: Term | None = None,
             o: Term | None = None, g: Term | None = None) -> list[Quad]:
        """Quads matching the given constants (None is a wildcard)."""
        bound = [None if t is None else self._ids.get(t, -1) for t in (s, p, o, g)]
        if any(b == -1 for b in bound):
            return []
        return [self._decode(k) for k in self._candidates(bound) if _fits(k, bound)]

    def graph(self, g: Term) -> list[Quad]:
        return self.find(g=g)

    def subgraph_of(self, g: Term) -> Subgraph | None:
        return classify_graph(g.value) if g.is_iri else None

    def _candidates(self, bound) -> set | frozenset:
        s, p, o, g = bound
        options = []
        if s is not None and p is not None:
            options.append(self._by_sp.get((s, p), ()))
        if p is not None and o is not None:
            options.append(self._by_po.get((p, o), ()))
        if s is not None:
            options.append(self._by_s.get(s, ()))
        if o is not None:
            options.append(self._by_o.get(o, ()))
        if g is not None:
            options.append(self._by_g.get(g, ()))
        if p is not None:
            options.append(self._by_p.get(p, ()))
        if not options:
            return self._quads
        return min(options, key=len)

    def _in_subgraph(self, gid: int, wanted: Subgraph) -> bool:
        if wanted is Subgraph.ANY:
            return True
        kind = self._graph_kind.get(gid)
        if kind is None:
            kind = classify_graph(self._terms[gid].value)
            self._graph_kind[gid] = kind
        return kind is wanted

    # -- BGP matching ---------------------------------------------------
    def match(self, query: PatternQuery, use_index: bool = True) -> list[Binding]:
        """All variable bindings satisfying every pattern of ``query``.

        Results are deduplicated over projected variables and returned in
        canonical order. ``use_index=False`` evaluates left to right with
        full scans; the result set is identical."""
        compiled = []
        for tp in query.patterns:
            slots = []
            for t in tp.terms:
                if t.is_variable:
                    slots.append(t.name)
                else:
                    tid = self._ids.get(t)
                    if tid is None:
                        return []
                    slots.append(tid)
            compiled.append((tuple(slots), tp.subgraph))
        distinct = []
        for pair in query.distinct:
            if all(isinstance(x, Term) for x in pair):
                if pair[0] == pair[1]:
                    return []
                continue
            sides = []
            for x in pair:
                if isinstance(x, Term):
                    x = ("const", self._ids.get(x, -1))
                sides.append(x)
            a, b = sides
            if isinstance(a, tuple):
                a, b = b, a
            distinct.append((a, b))
        results: dict[tuple, Binding] = {}
        projected = query.projected()

        def consistent(env: dict) -> bool:
            for a, b in distinct:
                va = env.get(a)
                if va is None:
                    continue
                vb = b[1] if isinstance(b, tuple) else env.get(b)
                if vb is not None and va == vb:
                    return False
            return True

        def solve(remaining: list, env: dict) -> None:
            if not remaining:
                key = tuple(env[v] for v in projected)
                if key not in results:
                    results[key] = {v: self._terms[env[v]] for v in projected}
                return
            if use_index:
                best_i, best_cands = 0, None
                for i, (slots, _) in enumerate(remaining):
                    bound = [env.get(x) if isinstance(x, str) else x for x in slots]
                    cands = self._candidates(bound)
                    if best_cands is None or len(cands) < len(best_cands):
                        best_i, best_cands = i, cands
                        if not cands:
                            return
                slots, wanted = remaining[best_i]
                rest = remaining[:best_i] + remaining[best_i + 1:]
                cands = best_cands
            else:
                slots, wanted = remaining[0]
                rest = remaining[1:]
                cands = self._quads
            for key in cands:
                if not self._in_subgraph(key[_G], wanted):
                    continue
                new = None
                ok = True
                for pos, slot in enumerate(slots):
                    val = key[pos]
                    if isinstance(slot, int):
                        if slot != val:
                            ok = False
                            break
                    else:
                        cur = env.get(slot) if new is None else new.get(slot)
                        if cur is None:
                            if new is None:
                                new = dict(env)
                            new[slot] = val
                        elif cur != val:
                            ok = False
                            break
                if not ok:
                    continue
                nxt = env if new is None else new
                if new is not None and not consistent(nxt):
                    continue
                solve(rest, nxt)

        solve(compiled, {})
        return sorted(results.values(), key=canonical_key)

    def ask(self, query: PatternQuery) -> bool:
        return bool(self.match(query))


def _fits(key, bound) -> bool:
    return all(b is None or b == k for k, b in zip(key, bound))
