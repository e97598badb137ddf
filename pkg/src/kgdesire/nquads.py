"""N-Quads subset reader/writer.

Supported: IRIs in angle brackets, plain and datatyped literals, a graph
IRI in fourth position, one statement per line terminated by `` .``.
Blank nodes and language tags are rejected.
"""

from __future__ import annotations

import re
from pathlib import Path

from .quadstore import MalformedTerm, Quad, QuadStore, Term, iri, literal


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}

_TOKEN = re.compile(
    r'\s*(?:<(?P<iri>[^<>"\s]*)>'
    r'|"(?P<lit>(?:[^"\\]|\\.)*)"(?:\^\^<(?P<dt>[^<>"\s]*)>)?'
    r"|(?P<dot>\.))"
)


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in text)


def _unescape(text: str, line: int) -> str:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\":
            if i + 1 >= len(text):
                raise ParseError("dangling escape", line)
            nxt = text[i + 1]
            if nxt == "u" or nxt == "U":
                width = 4 if nxt == "u" else 8
                digits = text[i + 2:i + 2 + width]
                if len(digits) != width:
                    raise ParseError("truncated unicode escape", line)
                out.append(chr(int(digits, 16)))
                i += 2 + width
                continue
            if nxt not in _UNESCAPES:
                raise ParseError(f"unknown escape \\{nxt}", line)
            out.append(_UNESCAPES[nxt])
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def format_term(term: Term) -> str:
    if term.is_iri:
        return f"<{term.value}>"
    if term.is_literal:
        text = f'"{_escape(term.value)}"'
        if term.datatype:
            text += f"^^<{term.datatype}>"
        return text
    raise MalformedTerm(f"cannot serialize variable {term}")


def format_quad(q: Quad) -> str:
    return " ".join(format_term(t) for t in q) + " ."


def export_nquads(store: QuadStore) -> str:
    """Serialize in canonical (g, s, p, o) order; empty store gives ''."""
    return "".join(format_quad(q) + "\n" for q in store.quads())


def parse_line(text: str, line: int) -> Quad | None:
    stripped = text.strip()
    if not stripped or stripped.startswith("#"):
        return None
    terms: list[Term] = []
    pos = 0
    saw_dot = False
    while pos < len(text):
        if not text[pos:].strip():
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected input at column {pos + 1}", line)
        pos = m.end()
        if m.group("dot"):
            saw_dot = True
            rest = text[pos:].strip()
            if rest and not rest.startswith("#"):
                raise ParseError("content after terminating '.'", line)
            break
        try:
            if m.group("iri") is not None:
                terms.append(iri(m.group("iri")))
            else:
                terms.append(literal(_unescape(m.group("lit"), line), m.group("dt") or ""))
        except MalformedTerm as exc:
            raise ParseError(str(exc), line) from None
    if not saw_dot:
        raise ParseError("missing terminating ' .'", line)
    if len(terms) != 4:
        raise ParseError(f"expected 4 terms, found {len(terms)}", line)
    q = Quad(*terms)
    if not (q.subject.is_iri and q.predicate.is_iri and q.graph.is_iri):
        raise ParseError("only the object may be a literal", line)
    return q


def import_nquads(text: str) -> QuadStore:
    store = QuadStore()
    for lineno, raw in enumerate(text.split("\n"), start=1):
        q = parse_line(raw, lineno)
        if q is not None:
            store.insert(q)
    return store


def write_nquads(store: QuadStore, path) -> None:
    Path(path).write_text(export_nquads(store), encoding="utf-8")


def read_nquads(path) -> QuadStore:
    return import_nquads(Path(path).read_text(encoding="utf-8"))
