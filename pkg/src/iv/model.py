"""Terms, quads, patterns, queries and the canonical byte serialization.

The encodings in this module are load-bearing: object hashes are computed
over ``canonical_serialize`` output, so a one-byte change here changes the
identity of every stored snapshot. Token grammars and escape rules are
therefore fixed bit-exactly and tested against frozen digests.

Grammar summary::

    atom     := '<' [A-Za-z0-9_:./#+-]+ '>'
    literal  := '"' chars '"'          escapes: \\\\  \\"  \\n
    variable := '?' [A-Za-z0-9_]+
    author   := '@' atom-name
    fact     := atom SP atom SP (atom|literal) SP author
    query    := pattern (';' pattern)*
    pattern  := term term term
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

from .errors import MalformedLine, MalformedQuery

ATOM_NAME_RE = re.compile(r"[A-Za-z0-9_:./#+-]+")
VAR_NAME_RE = re.compile(r"[A-Za-z0-9_]+")

# Engine limit on conjunctive query size.
MAX_PATTERNS = 16


@dataclass(frozen=True)
class Atom:
    """A named graph node or edge label; also used as a principal id."""

    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not ATOM_NAME_RE.fullmatch(self.name):
            raise ValueError(f"invalid atom name: {self.name!r}")


@dataclass(frozen=True)
class Literal:
    """An opaque UTF-8 string value."""

    value: str

    def __post_init__(self):
        if not isinstance(self.value, str):
            raise ValueError("literal value must be str")


@dataclass(frozen=True)
class Variable:
    """A query variable, written ``?name``. Legal only inside patterns."""

    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not VAR_NAME_RE.fullmatch(self.name):
            raise ValueError(f"invalid variable name: {self.name!r}")


Term = Union[Atom, Literal, Variable]
PrincipalId = Atom


@dataclass(frozen=True)
class Quad:
    """One ground assertion. Identity is the full 4-tuple including author."""

    subject: Atom
    predicate: Atom
    object: Union[Atom, Literal]
    author: Atom

    def __post_init__(self):
        if not isinstance(self.subject, Atom):
            raise ValueError("quad subject must be an Atom")
        if not isinstance(self.predicate, Atom):
            raise ValueError("quad predicate must be an Atom")
        if not isinstance(self.object, (Atom, Literal)):
            raise ValueError("quad object must be an Atom or Literal")
        if not isinstance(self.author, Atom):
            raise ValueError("quad author must be an Atom")

    def triple(self) -> tuple[Atom, Atom, Union[Atom, Literal]]:
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class Pattern:
    """A triple template. The author position is deliberately unconstrained."""

    subject: Term
    predicate: Union[Atom, Variable]
    object: Term

    def __post_init__(self):
        for pos, term in (("subject", self.subject), ("object", self.object)):
            if not isinstance(term, (Atom, Literal, Variable)):
                raise ValueError(f"pattern {pos} must be a term")
        if isinstance(self.predicate, Literal):
            raise ValueError("pattern predicate cannot be a literal")
        if not isinstance(self.predicate, (Atom, Variable)):
            raise ValueError("pattern predicate must be an atom or variable")

    def parts(self) -> tuple[Term, Term, Term]:
        return (self.subject, self.predicate, self.object)

    def variables(self) -> tuple[str, ...]:
        """Variable names in subject, predicate, object order, deduplicated."""
        seen: list[str] = []
        for term in (self.subject, self.predicate, self.object):
            if isinstance(term, Variable) and term.name not in seen:
                seen.append(term.name)
        return tuple(seen)


@dataclass(frozen=True)
class MapQuery:
    """A conjunctive set of patterns plus an optional projection.

    An empty ``select`` means "all variables", in first-occurrence order.
    """

    patterns: tuple[Pattern, ...]
    select: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "patterns", tuple(self.patterns))
        object.__setattr__(self, "select", tuple(self.select))
        if not self.patterns:
            raise MalformedQuery("query needs at least one pattern")
        if len(self.patterns) > MAX_PATTERNS:
            raise MalformedQuery(f"query exceeds {MAX_PATTERNS} patterns")
        for p in self.patterns:
            if not isinstance(p, Pattern):
                raise MalformedQuery("query patterns must be Pattern values")
        known = self.all_variables()
        for name in self.select:
            if not isinstance(name, str) or not VAR_NAME_RE.fullmatch(name):
                raise MalformedQuery(f"invalid select variable: {name!r}")
            if name not in known:
                raise MalformedQuery(f"select variable ?{name} not in any pattern")

    def all_variables(self) -> tuple[str, ...]:
        """Every variable of the query in first-occurrence order."""
        seen: list[str] = []
        for p in self.patterns:
            for name in p.variables():
                if name not in seen:
                    seen.append(name)
        return tuple(seen)

    @property
    def effective_select(self) -> tuple[str, ...]:
        return self.select if self.select else self.all_variables()


@dataclass(frozen=True)
class Binding:
    """An immutable variable assignment, its items sorted by variable name."""

    items: tuple[tuple[str, Term], ...] = ()

    def __post_init__(self):
        # sort by name alone: terms are not orderable, and a duplicate name
        # must raise ValueError rather than fall through to comparing terms
        normalized = tuple(sorted(self.items, key=lambda item: item[0]))
        names = [name for name, _ in normalized]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable in binding")
        object.__setattr__(self, "items", normalized)

    @classmethod
    def of(cls, mapping: Mapping[str, Term]) -> "Binding":
        return cls(tuple(mapping.items()))

    def as_dict(self) -> dict[str, Term]:
        return dict(self.items)

    def get(self, name: str, default=None):
        for key, value in self.items:
            if key == name:
                return value
        return default

    def __getitem__(self, name: str) -> Term:
        value = self.get(name)
        if value is None:
            raise KeyError(name)
        return value

    def __contains__(self, name: str) -> bool:
        return any(key == name for key, _ in self.items)

    def __len__(self) -> int:
        return len(self.items)


FactSet = frozenset  # of Quad


# ---------------------------------------------------------------------------
# Encoding


def encode_term(t: Term) -> str:
    """Render a term in its canonical text form. Injective over valid terms."""
    if isinstance(t, Atom):
        return f"<{t.name}>"
    if isinstance(t, Literal):
        escaped = (
            t.value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        )
        return f'"{escaped}"'
    if isinstance(t, Variable):
        return f"?{t.name}"
    raise TypeError(f"not a term: {t!r}")


def quad_line(q: Quad) -> str:
    """Canonical single-line form of one quad (without the newline)."""
    return (
        f"{encode_term(q.subject)} {encode_term(q.predicate)} "
        f"{encode_term(q.object)} @{q.author.name}"
    )


def canonical_serialize(fs: Iterable[Quad]) -> bytes:
    """Serialize a fact set to bytes, one sorted line per quad.

    The result is a pure function of the set: lines are sorted bytewise
    ascending, so insertion order never leaks into the hash.
    """
    lines = sorted(quad_line(q).encode("utf-8") for q in set(fs))
    return b"".join(line + b"\n" for line in lines)


# ---------------------------------------------------------------------------
# Parsing

_SEP = object()  # token marker for ';'


class _TokenError(ValueError):
    pass


def _scan_literal(text: str, i: int) -> tuple[Literal, int]:
    # i points at the opening quote
    buf: list[str] = []
    j = i + 1
    n = len(text)
    while j < n:
        c = text[j]
        if c == '"':
            return Literal("".join(buf)), j + 1
        if c == "\\":
            if j + 1 >= n:
                raise _TokenError("dangling escape in literal")
            nxt = text[j + 1]
            if nxt == "\\":
                buf.append("\\")
            elif nxt == '"':
                buf.append('"')
            elif nxt == "n":
                buf.append("\n")
            else:
                raise _TokenError(f"unknown escape \\{nxt}")
            j += 2
            continue
        if c == "\n":
            raise _TokenError("raw newline inside literal")
        buf.append(c)
        j += 1
    raise _TokenError("unterminated literal")


def _tokenize(text: str) -> Iterator[object]:
    """Yield Term values, Atom authors as ('author', Atom), and _SEP markers."""
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c == ";":
            yield _SEP
            i += 1
            continue
        if c == "<":
            j = text.find(">", i + 1)
            if j < 0:
                raise _TokenError("unterminated atom")
            name = text[i + 1 : j]
            if not ATOM_NAME_RE.fullmatch(name):
                raise _TokenError(f"invalid atom: {name!r}")
            yield Atom(name)
            i = j + 1
            continue
        if c == '"':
            lit, i = _scan_literal(text, i)
            yield lit
            continue
        if c == "?":
            m = VAR_NAME_RE.match(text, i + 1)
            if not m:
                raise _TokenError("invalid variable")
            yield Variable(m.group(0))
            i = m.end()
            continue
        if c == "@":
            m = ATOM_NAME_RE.match(text, i + 1)
            if not m:
                raise _TokenError("invalid author")
            yield ("author", Atom(m.group(0)))
            i = m.end()
            continue
        raise _TokenError(f"unexpected character {c!r}")


def parse_fact_line(line: str | bytes) -> Quad:
    """Parse one canonical fact line back into a Quad.

    Exact inverse of ``quad_line``: round-trips are identities. Raises
    MalformedLine for anything a quad cannot hold (variables, missing
    author, stray tokens).
    """
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedLine(f"not UTF-8: {e}") from None
    try:
        tokens = list(_tokenize(line.rstrip("\n")))
    except _TokenError as e:
        raise MalformedLine(str(e)) from None
    if len(tokens) != 4:
        raise MalformedLine(f"expected 4 fields, got {len(tokens)}")
    subject, predicate, obj, author = tokens
    if not isinstance(author, tuple):
        raise MalformedLine("missing @author field")
    for value in (subject, predicate, obj):
        if isinstance(value, Variable):
            raise MalformedLine("variables are illegal in ground facts")
        if value is _SEP or isinstance(value, tuple):
            raise MalformedLine("unexpected token")
    try:
        return Quad(subject, predicate, obj, author[1])
    except ValueError as e:
        raise MalformedLine(str(e)) from None


def parse_term(text: str) -> Term:
    """Parse exactly one term (atom, literal, or variable)."""
    try:
        tokens = list(_tokenize(text))
    except _TokenError as e:
        raise MalformedQuery(str(e)) from None
    if len(tokens) != 1 or tokens[0] is _SEP or isinstance(tokens[0], tuple):
        raise MalformedQuery(f"expected a single term: {text!r}")
    return tokens[0]


def _patterns_from_tokens(tokens: list[object]) -> list[Pattern]:
    groups: list[list[Term]] = [[]]
    for tok in tokens:
        if tok is _SEP:
            groups.append([])
        elif isinstance(tok, tuple):
            raise MalformedQuery("@author is not allowed in patterns")
        else:
            groups[-1].append(tok)
    patterns = []
    for group in groups:
        if len(group) != 3:
            raise MalformedQuery(f"pattern needs exactly 3 terms, got {len(group)}")
        try:
            patterns.append(Pattern(*group))
        except ValueError as e:
            raise MalformedQuery(str(e)) from None
    return patterns


def parse_pattern(text: str) -> Pattern:
    """Parse a single three-term pattern."""
    try:
        tokens = list(_tokenize(text))
    except _TokenError as e:
        raise MalformedQuery(str(e)) from None
    if _SEP in tokens:
        raise MalformedQuery("expected a single pattern")
    patterns = _patterns_from_tokens(tokens)
    return patterns[0]


def parse_query(text: str) -> MapQuery:
    """Parse query text into a MapQuery; select defaults to all variables."""
    try:
        tokens = list(_tokenize(text))
    except _TokenError as e:
        raise MalformedQuery(str(e)) from None
    if not tokens:
        raise MalformedQuery("empty query")
    return MapQuery(tuple(_patterns_from_tokens(tokens)))
