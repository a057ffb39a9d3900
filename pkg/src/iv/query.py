"""Conjunctive query evaluation over fact sets.

``eval_map`` is a left-to-right nested-loop join with binding propagation
and set semantics. ``brute_force_eval`` re-derives the same answers by
exhaustive enumeration of quad assignments and exists solely as an
independent oracle; keep the two implementations structurally unrelated.

Authors never participate in matching: patterns constrain (s, p, o) only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from .errors import OracleTooLarge, UnboundVariable
from .model import (
    Atom,
    Binding,
    Literal,
    MapQuery,
    Pattern,
    Quad,
    Term,
    Variable,
    encode_term,
    quad_line,
)

# Guardrails for the brute-force oracle: |fs|^k enumeration only at desk scale.
ORACLE_MAX_FACTS = 64
ORACLE_MAX_PATTERNS = 4


def _match_one(p: Pattern, quad: Quad, env: dict) -> Optional[dict]:
    """Extend env so that p matches quad's triple, or return None."""
    out = None
    for pt, gt in (
        (p.subject, quad.subject),
        (p.predicate, quad.predicate),
        (p.object, quad.object),
    ):
        if isinstance(pt, Variable):
            bound = env.get(pt.name) if out is None else out.get(pt.name)
            if bound is None:
                if out is None:
                    out = dict(env)
                out[pt.name] = gt
            elif bound != gt:
                return None
        elif pt != gt:
            return None
    return env if out is None else out


def pattern_matches(p: Pattern, quad: Quad) -> bool:
    """True iff some substitution makes p equal quad's (s, p, o)."""
    return _match_one(p, quad, {}) is not None


def match_pattern(fs: Iterable[Quad], p: Pattern) -> set[Binding]:
    """All bindings over p's variables that match some quad in fs.

    A ground pattern yields the singleton empty binding iff any quad
    matches, and the empty set otherwise.
    """
    names = p.variables()
    out = set()
    for quad in fs:
        env = _match_one(p, quad, {})
        if env is not None:
            out.add(Binding.of({n: env[n] for n in names}))
    return out


def eval_map(fs: Iterable[Quad], q: MapQuery) -> set[Binding]:
    """Evaluate a conjunctive query, projected onto its effective select."""
    quads = list(fs)
    rows: list[dict] = [{}]
    for p in q.patterns:
        next_rows: list[dict] = []
        seen: set[tuple] = set()
        for row in rows:
            for quad in quads:
                env = _match_one(p, quad, row)
                if env is None:
                    continue
                key = tuple(sorted(env.items()))
                if key not in seen:
                    seen.add(key)
                    next_rows.append(env)
        rows = next_rows
        if not rows:
            return set()
    select = q.effective_select
    return {Binding.of({n: row[n] for n in select}) for row in rows}


def brute_force_eval(fs: Iterable[Quad], q: MapQuery) -> set[Binding]:
    """Oracle evaluation: try every assignment of quads to patterns.

    Semantically equal to eval_map within the guardrails; implemented
    independently (no shared join or unification code).
    """
    quads = sorted(set(fs), key=quad_line)
    if len(quads) > ORACLE_MAX_FACTS:
        raise OracleTooLarge(f"{len(quads)} facts > {ORACLE_MAX_FACTS}")
    if len(q.patterns) > ORACLE_MAX_PATTERNS:
        raise OracleTooLarge(f"{len(q.patterns)} patterns > {ORACLE_MAX_PATTERNS}")
    select = q.effective_select
    out: set[Binding] = set()
    for combo in itertools.product(quads, repeat=len(q.patterns)):
        env: dict[str, Term] = {}
        ok = True
        for p, quad in zip(q.patterns, combo):
            for pt, gt in (
                (p.subject, quad.subject),
                (p.predicate, quad.predicate),
                (p.object, quad.object),
            ):
                if isinstance(pt, Variable):
                    if pt.name in env:
                        if env[pt.name] != gt:
                            ok = False
                            break
                    else:
                        env[pt.name] = gt
                elif pt != gt:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.add(Binding.of({n: env[n] for n in select}))
    return out


@dataclass(frozen=True)
class Delta:
    """Standing-query change report between two fact sets."""

    added: frozenset
    removed: frozenset

    def __post_init__(self):
        if self.added & self.removed:
            raise ValueError("delta added and removed overlap")


def map_delta(old: Iterable[Quad], new: Iterable[Quad], q: MapQuery) -> Delta:
    """Bindings gained and lost between two snapshots under one query."""
    before = eval_map(old, q)
    after = eval_map(new, q)
    return Delta(frozenset(after - before), frozenset(before - after))


def substitute(
    p: Pattern, binding: Union[Binding, Mapping[str, Term]], author: Atom
) -> Quad:
    """Ground a pattern with a binding, producing a quad by the given author."""
    env = binding.as_dict() if isinstance(binding, Binding) else dict(binding)

    def ground(term: Term) -> Term:
        if isinstance(term, Variable):
            if term.name not in env:
                raise UnboundVariable(f"?{term.name} not bound")
            return env[term.name]
        return term

    return Quad(ground(p.subject), ground(p.predicate), ground(p.object), author)


def binding_text(b: Binding) -> str:
    """Render a binding as ``?var=<term> ...`` sorted by variable name."""
    return " ".join(f"?{name}={encode_term(term)}" for name, term in b.items)


@dataclass(frozen=True)
class Subscription:
    """A registered standing query, advanced by pull-based delta polls."""

    id: str
    query: MapQuery
    principal: Atom
    last_commit: Optional[str] = None


@dataclass
class SessionSubscriptions:
    """Per-session registry of standing queries; single-threaded mutation."""

    _subs: dict = field(default_factory=dict)
    _counter: int = 0

    def register(
        self, query: MapQuery, principal: Atom, last_commit: Optional[str] = None
    ) -> Subscription:
        self._counter += 1
        sub = Subscription(f"sub-{self._counter}", query, principal, last_commit)
        self._subs[sub.id] = sub
        return sub

    def get(self, sub_id: str) -> Subscription:
        return self._subs[sub_id]

    def advance(self, sub_id: str, commit: str) -> Subscription:
        old = self._subs[sub_id]
        new = Subscription(old.id, old.query, old.principal, commit)
        self._subs[sub_id] = new
        return new
