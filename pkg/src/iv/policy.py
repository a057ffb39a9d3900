"""Three-layer read/write control over a fact set.

Layer 1 is the full fact set. Layer 2 is the per-principal policy view:
the subset matched by the owner's read grants (default deny, owner
bypass). Layer 3 is any query, evaluated strictly against layer 2.

Grants are ordinary quads inside the fact set, written with the reserved
``ac:`` vocabulary, so they travel with clones and survive merges. Only
owner-authored ``ac:`` quads carry authority: anything a non-owner writes
under a policy id is invisible to the decoder and cannot widen, narrow,
or break a grant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import MalformedQuery
from .model import (
    Atom,
    FactSet,
    Literal,
    MapQuery,
    Pattern,
    Quad,
    Variable,
    encode_term,
    parse_term,
)
from .query import eval_map, pattern_matches

log = logging.getLogger(__name__)

# Reserved vocabulary; bit-exact so repositories interoperate.
AC_TYPE = Atom("ac:type")
AC_POLICY = Atom("ac:policy")
AC_GRANTEE = Atom("ac:grantee")
AC_MODE = Atom("ac:mode")
AC_PATTERN = Atom("ac:pattern")
AC_S = Atom("ac:s")
AC_P = Atom("ac:p")
AC_O = Atom("ac:o")
AC_PUBLIC = Atom("ac:public")

READ = "read"
WRITE = "write"

POLICY_ID_PREFIX = "ac:pol-"


@dataclass(frozen=True)
class Policy:
    """One decoded grant: grantee (or ac:public) may read or write
    anything matching one of the patterns."""

    id: Atom
    grantee: Atom
    mode: str
    patterns: tuple[Pattern, ...]
    policy_author: Atom

    def __post_init__(self):
        if self.mode not in (READ, WRITE):
            raise ValueError(f"mode must be read or write, got {self.mode!r}")
        if not self.patterns:
            raise ValueError("policy needs at least one pattern")

    def covers(self, principal: Atom) -> bool:
        return self.grantee == principal or self.grantee == AC_PUBLIC


def policy_quads(policy: Policy) -> frozenset:
    """Reify a Policy into quads authored by its policy_author."""
    a = policy.policy_author
    quads = [
        Quad(policy.id, AC_TYPE, AC_POLICY, a),
        Quad(policy.id, AC_GRANTEE, policy.grantee, a),
        Quad(policy.id, AC_MODE, Literal(policy.mode), a),
    ]
    for k, pat in enumerate(policy.patterns):
        node = Atom(f"{policy.id.name}.pat-{k}")
        quads += [
            Quad(policy.id, AC_PATTERN, node, a),
            Quad(node, AC_S, Literal(encode_term(pat.subject)), a),
            Quad(node, AC_P, Literal(encode_term(pat.predicate)), a),
            Quad(node, AC_O, Literal(encode_term(pat.object)), a),
        ]
    return frozenset(quads)


def next_policy_id(gis: FactSet) -> Atom:
    """Smallest unused `ac:pol-<n>`; scans every atom so pattern-node
    names like `ac:pol-3.pat-0` also reserve their index."""
    used = set()
    for q in gis:
        for term in (q.subject, q.predicate, q.object):
            if isinstance(term, Atom) and term.name.startswith(POLICY_ID_PREFIX):
                rest = term.name[len(POLICY_ID_PREFIX) :]
                digits = rest.split(".", 1)[0]
                if digits.isdigit():
                    used.add(int(digits))
    n = max(used) + 1 if used else 1
    return Atom(f"{POLICY_ID_PREFIX}{n}")


def _decode_pattern(quads_by_sp: dict, node: Atom):
    parts = []
    for pos in (AC_S, AC_P, AC_O):
        values = quads_by_sp.get((node, pos), set())
        if len(values) != 1:
            raise ValueError(f"{node.name}: need exactly one {pos.name}")
        (value,) = values
        if not isinstance(value, Literal):
            raise ValueError(f"{node.name}: {pos.name} must be a literal")
        try:
            parts.append(parse_term(value.value))
        except MalformedQuery:
            raise ValueError(f"{node.name}: unparsable {pos.name}") from None
    return Pattern(*parts)


def reify_policies(gis: FactSet, owner: Atom) -> list[Policy]:
    """Decode every effective policy from the fact set.

    Non-owner-authored quads are filtered out before decoding, so they can
    never affect the result. Policies that are then structurally
    incomplete or ambiguous are skipped with a logged diagnostic.
    """
    trusted = [q for q in gis if q.author == owner]
    by_sp: dict[tuple, set] = {}
    for q in trusted:
        by_sp.setdefault((q.subject, q.predicate), set()).add(q.object)

    ids = sorted(
        (s for (s, p), objs in by_sp.items() if p == AC_TYPE and AC_POLICY in objs),
        key=lambda a: a.name,
    )
    out = []
    for pid in ids:
        try:
            grantees = by_sp.get((pid, AC_GRANTEE), set())
            if len(grantees) != 1:
                raise ValueError("need exactly one grantee")
            (grantee,) = grantees
            if not isinstance(grantee, Atom):
                raise ValueError("grantee must be an atom")
            modes = by_sp.get((pid, AC_MODE), set())
            if len(modes) != 1:
                raise ValueError("need exactly one mode")
            (mode,) = modes
            if not isinstance(mode, Literal) or mode.value not in (READ, WRITE):
                raise ValueError("mode must be \"read\" or \"write\"")
            nodes = by_sp.get((pid, AC_PATTERN), set())
            patterns = set()
            for node in nodes:
                if not isinstance(node, Atom):
                    raise ValueError("pattern ref must be an atom")
                patterns.add(_decode_pattern(by_sp, node))
            if not patterns:
                raise ValueError("no patterns")
            ordered = tuple(
                sorted(patterns, key=lambda p: tuple(map(encode_term, p.parts())))
            )
            out.append(Policy(pid, grantee, mode.value, ordered, owner))
        except ValueError as e:
            log.warning("skipping malformed policy %s: %s", pid.name, e)
    return out


def _read_patterns(policies, principal: Atom):
    return [
        pat
        for pol in policies
        if pol.mode == READ and pol.covers(principal)
        for pat in pol.patterns
    ]


def policy_view(gis: FactSet, principal: Atom, owner: Atom) -> FactSet:
    """Layer 2: the subset of gis the principal may read. Owner sees all;
    with no matching read grant a non-owner sees nothing."""
    if principal == owner:
        return frozenset(gis)
    patterns = _read_patterns(reify_policies(gis, owner), principal)
    if not patterns:
        return frozenset()
    return frozenset(
        q for q in gis if any(pattern_matches(p, q) for p in patterns)
    )


def permitted_write(gis: FactSet, principal: Atom, q: Quad, owner: Atom) -> bool:
    """May principal introduce q? Owner always; others only for facts they
    authored themselves that match one of their write grants."""
    if principal == owner:
        return True
    if q.author != principal:
        return False
    for pol in reify_policies(gis, owner):
        if pol.mode == WRITE and pol.covers(principal):
            if any(pattern_matches(p, q) for p in pol.patterns):
                return True
    return False


def chain_eval(gis: FactSet, principal: Atom, owner: Atom, query: MapQuery):
    """Layer 3: evaluate a query strictly over the principal's layer-2 view."""
    return eval_map(policy_view(gis, principal, owner), query)


class SealedView:
    """Query-only handle over one principal's view of one commit.

    The only read path is map(); nothing enumerates storage beyond the
    already-filtered snapshot captured at construction.
    """

    __slots__ = ("commit", "principal", "_permitted")

    def __init__(self, commit: str, principal: Atom, permitted: FactSet):
        object.__setattr__(self, "commit", commit)
        object.__setattr__(self, "principal", principal)
        object.__setattr__(self, "_permitted", frozenset(permitted))

    def __setattr__(self, name, value):
        raise AttributeError("SealedView is immutable")

    def map(self, query: MapQuery):
        return eval_map(self._permitted, query)

    def __repr__(self):
        return f"SealedView(commit={self.commit[:12]}, principal={self.principal.name})"


def seal(repo, commit: str, principal: Atom) -> SealedView:
    """Filter the commit's facts down to the principal's view and wrap it."""
    from .store import resolve_facts

    facts = resolve_facts(repo, commit)
    permitted = policy_view(facts, principal, repo.owner())
    return SealedView(commit, principal, permitted)
