"""Scenario driver and randomized property suites.

Everything here checks the library from the outside: expectations come
from independent oracles (brute-force query enumeration, a separate
policy decoder, naive set filtering), never from the code under test.
Generators draw from fixed pools through a seeded RNG, so identical
seeds reproduce identical instances, verdicts, and report bytes.
"""

from __future__ import annotations

import logging
import random
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from . import sync
from .errors import (
    MalformedQuery,
    PathNotEmpty,
    PropertyViolation,
    PushRejected,
    ScenarioFailure,
)
from .model import (
    Atom,
    Binding,
    Literal,
    MapQuery,
    Pattern,
    Quad,
    Variable,
    encode_term,
    parse_query,
    parse_term,
    quad_line,
)
from .policy import policy_view
from .query import brute_force_eval, eval_map, map_delta
from .store import Repo, create_commit, hash_factset, log as store_log, resolve_facts

# ---------------------------------------------------------------------------
# independent oracles
#
# The `ac:` vocabulary is spelled out again here on purpose: the oracle
# decoder must not borrow anything from the implementation it judges.

_ACT = Atom("ac:type")
_ACP = Atom("ac:policy")
_ACG = Atom("ac:grantee")
_ACM = Atom("ac:mode")
_ACPAT = Atom("ac:pattern")
_ACS = Atom("ac:s")
_ACPP = Atom("ac:p")
_ACO = Atom("ac:o")
_ACPUB = Atom("ac:public")


def oracle_match(pattern: Pattern, quad: Quad) -> Optional[dict]:
    """Triple unifier written independently of the query engine."""
    env: dict = {}
    for pt, gt in zip(pattern.parts(), quad.triple()):
        if isinstance(pt, Variable):
            if pt.name in env:
                if env[pt.name] != gt:
                    return None
            else:
                env[pt.name] = gt
        elif pt != gt:
            return None
    return env


def oracle_reify(gis, owner: Atom) -> list:
    """Independent policy decoder: (id, grantee, mode, patterns) tuples.

    Re-states the grant vocabulary from scratch: only owner-authored
    quads count, exactly one grantee and one mode, at least one complete
    pattern.
    """
    rows = [q for q in gis if q.author == owner]

    def objects(s, p):
        return {q.object for q in rows if q.subject == s and q.predicate == p}

    ids = sorted(
        {q.subject for q in rows if q.predicate == _ACT and q.object == _ACP},
        key=lambda a: a.name,
    )
    out = []
    for pid in ids:
        grantees = objects(pid, _ACG)
        modes = objects(pid, _ACM)
        if len(grantees) != 1 or len(modes) != 1:
            continue
        (grantee,) = grantees
        (mode,) = modes
        if not isinstance(grantee, Atom):
            continue
        if not isinstance(mode, Literal) or mode.value not in ("read", "write"):
            continue
        patterns = set()
        broken = False
        for node in objects(pid, _ACPAT):
            if not isinstance(node, Atom):
                broken = True
                break
            parts = []
            for pos in (_ACS, _ACPP, _ACO):
                values = objects(node, pos)
                if len(values) != 1 or not isinstance(next(iter(values)), Literal):
                    broken = True
                    break
                (value,) = values
                try:
                    parts.append(parse_term(value.value))
                except MalformedQuery:
                    broken = True
                    break
            if broken:
                break
            try:
                patterns.add(Pattern(*parts))
            except ValueError:
                broken = True
                break
        if broken or not patterns:
            continue
        ordered = tuple(
            sorted(patterns, key=lambda p: tuple(map(encode_term, p.parts())))
        )
        out.append((pid, grantee, mode.value, ordered))
    return out


def oracle_policy_filter(gis, principal: Atom, owner: Atom) -> frozenset:
    """Naive filter: which quads may principal read."""
    if principal == owner:
        return frozenset(gis)
    patterns = [
        pat
        for (_, grantee, mode, pats) in oracle_reify(gis, owner)
        if mode == "read" and grantee in (principal, _ACPUB)
        for pat in pats
    ]
    return frozenset(
        q for q in gis if any(oracle_match(p, q) is not None for p in patterns)
    )


def oracle_permitted_write(gis, principal: Atom, quad: Quad, owner: Atom) -> bool:
    if principal == owner:
        return True
    if quad.author != principal:
        return False
    patterns = [
        pat
        for (_, grantee, mode, pats) in oracle_reify(gis, owner)
        if mode == "write" and grantee in (principal, _ACPUB)
        for pat in pats
    ]
    return any(oracle_match(p, quad) is not None for p in patterns)


# ---------------------------------------------------------------------------
# deterministic generators

_OWNER = Atom("alice")
_PRINCIPALS = (Atom("bob"), Atom("carol"), Atom("dan"), Atom("eve"))
_SUBJECTS = tuple(Atom(f"n{i}") for i in range(1, 9))
_READ_PREDS = (Atom("likes"), Atom("follows"), Atom("type"), Atom("caption"))
_WRITE_PREDS = (Atom("comment_on"), Atom("rating"))
_PRIVATE_PREDS = (Atom("ssn"), Atom("diary"), Atom("salary"))
_ALL_PREDS = _READ_PREDS + _WRITE_PREDS + _PRIVATE_PREDS
_LITERALS = tuple(
    Literal(v) for v in ("0", "1", "hi", "x y", 'quo"te', "line\nbreak")
)
_VARS = ("x", "y", "z", "u", "v", "w")


def _rng(seed, name: str) -> random.Random:
    # string seeding is stable across processes, unlike hash()-based seeds
    return random.Random(f"{seed}:{name}")


def _gen_object(rng):
    pool = _SUBJECTS + _LITERALS
    return pool[rng.randrange(len(pool))]


def _gen_quad(rng, preds=_ALL_PREDS, authors=(_OWNER,) + _PRINCIPALS) -> Quad:
    return Quad(
        rng.choice(_SUBJECTS), rng.choice(preds), _gen_object(rng), rng.choice(authors)
    )


def _gen_gis(rng, max_quads: int) -> set:
    return {_gen_quad(rng) for _ in range(rng.randint(0, max_quads))}


def _gen_query(rng, max_patterns: int = 3, tiny: bool = False) -> MapQuery:
    subjects = _SUBJECTS[:3] if tiny else _SUBJECTS
    preds = _ALL_PREDS[:3] if tiny else _ALL_PREDS
    patterns = []
    used: list[str] = []
    for i in range(rng.randint(1, max_patterns)):
        roll = rng.random()
        if roll < 0.5 or (tiny and roll < 0.7):
            subject = Variable(rng.choice(_VARS[:3]))
        elif roll < 0.7 and used:
            subject = Variable(rng.choice(used))
        else:
            subject = rng.choice(subjects)
        if i == 0 and rng.random() < 0.15:
            predicate = Variable(rng.choice(_VARS[3:]))
        else:
            predicate = rng.choice(preds)
        roll = rng.random()
        if roll < 0.45:
            obj = Variable(rng.choice(_VARS))
        elif roll < 0.6 and used:
            obj = Variable(rng.choice(used))
        else:
            obj = _gen_object(rng)
        pattern = Pattern(subject, predicate, obj)
        # keep joins connected so row counts stay desk-scale
        if i > 0 and used and not set(pattern.variables()) & set(used):
            pattern = Pattern(Variable(rng.choice(used)), predicate, obj)
        patterns.append(pattern)
        for name in pattern.variables():
            if name not in used:
                used.append(name)
    if used and rng.random() < 0.4:
        select = tuple(sorted(rng.sample(used, rng.randint(1, len(used)))))
    else:
        select = ()
    return MapQuery(tuple(patterns), select)


def _gen_small_factset(rng) -> frozenset:
    quads = {
        Quad(
            rng.choice(_SUBJECTS[:3]),
            rng.choice(_ALL_PREDS[:3]),
            rng.choice(_SUBJECTS[:3] + _LITERALS[:2]),
            rng.choice((_OWNER, _PRINCIPALS[0])),
        )
        for _ in range(rng.randint(0, 6))
    }
    return frozenset(quads)


def _gen_policy_block(rng, idx: int, author: Atom = _OWNER):
    """Well-formed policy quads, built by hand rather than via the library."""
    pid = Atom(f"ac:pol-{idx}")
    grantee = rng.choice(_PRINCIPALS + (_ACPUB,))
    mode = rng.choice(("read", "read", "read", "write"))
    quads = {
        Quad(pid, _ACT, _ACP, author),
        Quad(pid, _ACG, grantee, author),
        Quad(pid, _ACM, Literal(mode), author),
    }
    for j in range(rng.randint(1, 3)):
        node = Atom(f"{pid.name}.pat-{j}")
        subject = Variable("s") if rng.random() < 0.6 else rng.choice(_SUBJECTS)
        predicate = Variable("p") if rng.random() < 0.08 else rng.choice(_ALL_PREDS)
        obj = Variable("o") if rng.random() < 0.6 else _gen_object(rng)
        quads |= {
            Quad(pid, _ACPAT, node, author),
            Quad(node, _ACS, Literal(encode_term(subject)), author),
            Quad(node, _ACPP, Literal(encode_term(predicate)), author),
            Quad(node, _ACO, Literal(encode_term(obj)), author),
        }
    return pid, quads


def _corrupt_policy(rng, pid: Atom, quads: set) -> set:
    """Break a policy block in one of the ways the decoder must reject."""
    roll = rng.random()
    if roll < 0.3:
        return {q for q in quads if q.predicate != _ACO}
    if roll < 0.55:
        return quads | {Quad(pid, _ACG, rng.choice(_SUBJECTS), _OWNER)}
    if roll < 0.8:
        trimmed = {q for q in quads if q.predicate != _ACM}
        return trimmed | {Quad(pid, _ACM, Literal("admin"), _OWNER)}
    return {
        q
        for q in quads
        if q.predicate not in (_ACPAT, _ACS, _ACPP, _ACO)
    }


def _gen_junk_ac_quads(rng, pid: Atom) -> set:
    """A non-owner trying to self-grant everything; must change nothing."""
    author = rng.choice(_PRINCIPALS)
    node = Atom(f"{pid.name}.pat-9")
    return {
        Quad(pid, _ACT, _ACP, author),
        Quad(pid, _ACG, author, author),
        Quad(pid, _ACM, Literal("read"), author),
        Quad(pid, _ACPAT, node, author),
        Quad(node, _ACS, Literal("?s"), author),
        Quad(node, _ACPP, Literal("?p"), author),
        Quad(node, _ACO, Literal("?o"), author),
    }


def _gen_acl_instance(rng, max_quads: int = 200):
    """A gis with content + policies (some malformed, some junk), plus the
    principal pool to test with."""
    quads = set()
    for i in range(rng.randint(0, 8)):
        pid, block = _gen_policy_block(rng, i + 1)
        if rng.random() < 0.15:
            block = _corrupt_policy(rng, pid, block)
        quads |= block
        if rng.random() < 0.2:
            quads |= _gen_junk_ac_quads(rng, pid)
    sizes = ((0, 20), (0, 20), (10, 60), (40, 120))
    low, high = sizes[rng.randrange(len(sizes))]
    content = sorted(_gen_gis(rng, rng.randint(low, max(low, high))), key=quad_line)
    rng.shuffle(content)
    room = max_quads - len(quads)
    quads |= set(content[: max(0, room)])
    principals = [_OWNER] + rng.sample(
        list(_PRINCIPALS), rng.randint(1, len(_PRINCIPALS))
    )
    return frozenset(quads), principals


def _query_text(q: MapQuery) -> str:
    text = " ; ".join(
        " ".join(encode_term(t) for t in p.parts()) for p in q.patterns
    )
    if q.select:
        text += " select " + ",".join("?" + n for n in q.select)
    return text


def _describe_bindings(bindings, cap: int = 3) -> str:
    from .query import binding_text

    lines = sorted(binding_text(b) for b in bindings)
    shown = "|".join(line if line else "()" for line in lines[:cap])
    if len(lines) > cap:
        shown += f"|+{len(lines) - cap}"
    return shown or "(none)"


# ---------------------------------------------------------------------------
# check results

@dataclass(frozen=True)
class CheckResult:
    """One property check: how many cases ran, what failed."""

    name: str
    cases: int
    failures: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.failures


@contextmanager
def _quiet_policy_log():
    """Generated instances include malformed policies on purpose; the
    decoder's skip diagnostics are expected there, not reportable."""
    logger = logging.getLogger("iv.policy")
    before = logger.level
    logger.setLevel(logging.ERROR)
    try:
        yield
    finally:
        logger.setLevel(before)


def _shrink_factset(facts, still_fails: Callable) -> frozenset:
    """Greedy one-quad-at-a-time minimization keeping the failure alive."""
    current = sorted(facts, key=quad_line)
    changed = True
    while changed:
        changed = False
        for q in list(current):
            trial = [x for x in current if x != q]
            if still_fails(frozenset(trial)):
                current = trial
                changed = True
    return frozenset(current)


# ---------------------------------------------------------------------------
# the checks


def check_oracle_equivalence(seed=1, cases=1000) -> CheckResult:
    """eval_map against exhaustive enumeration on small instances."""
    rng = _rng(seed, "oracle-equivalence")
    failures = []
    for _ in range(cases):
        facts = _gen_small_factset(rng)
        query = _gen_query(rng, max_patterns=3, tiny=True)
        if eval_map(facts, query) == brute_force_eval(facts, query):
            continue

        def still_fails(fs, q=query):
            return eval_map(fs, q) != brute_force_eval(fs, q)

        small = _shrink_factset(facts, still_fails)
        got = eval_map(small, query)
        want = brute_force_eval(small, query)
        failures.append(
            f"query[{_query_text(query)}] facts[{len(small)}] "
            f"got={_describe_bindings(got)} want={_describe_bindings(want)}"
        )
    return CheckResult("oracle-equivalence", cases, tuple(failures))


def check_no_leak(seed=1, cases=500, policy_view_impl=None) -> CheckResult:
    """The layered read path never shows more than the naive filter allows.

    Checks, per instance: the implemented view equals the oracle filter
    for every principal; views narrow the gis; query answers over the
    view narrow answers over the gis; every matched quad lies inside the
    oracle view; and, when cheap enough, answers equal brute force over
    the oracle view.
    """
    impl = policy_view_impl or policy_view
    rng = _rng(seed, "no-leak")
    failures = []
    with _quiet_policy_log():
        return _check_no_leak_inner(rng, cases, impl, failures)


def _check_no_leak_inner(rng, cases, impl, failures):
    for _ in range(cases):
        gis, principals = _gen_acl_instance(rng)
        views = {}
        for principal in principals:
            got_view = impl(gis, principal, _OWNER)
            want_view = oracle_policy_filter(gis, principal, _OWNER)
            views[principal] = (got_view, want_view, {q.triple() for q in want_view})
            if got_view != want_view:
                extra = sorted(got_view - want_view, key=quad_line)
                missing = sorted(want_view - got_view, key=quad_line)
                failures.append(
                    f"view principal={principal.name} "
                    f"extra=[{'|'.join(map(quad_line, extra[:3]))}] "
                    f"missing=[{'|'.join(map(quad_line, missing[:3]))}]"
                )
            if not got_view <= gis:
                failures.append(f"view-escapes-gis principal={principal.name}")
        queries = [_gen_query(rng) for _ in range(rng.randint(1, 20))]
        for query in queries:
            over_gis = eval_map(gis, query)
            for principal in rng.sample(principals, min(2, len(principals))):
                got_view, want_view, want_triples = views[principal]
                answers = eval_map(got_view, query)
                if not answers <= over_gis:
                    failures.append(
                        f"not-narrowing principal={principal.name} "
                        f"query[{_query_text(query)}]"
                    )
                if query.select:
                    full = eval_map(got_view, MapQuery(query.patterns, ()))
                else:
                    full = answers
                for binding in full:
                    for pattern in query.patterns:
                        triple = tuple(
                            binding[t.name] if isinstance(t, Variable) else t
                            for t in pattern.parts()
                        )
                        if triple not in want_triples:
                            failures.append(
                                f"witness-outside-view principal={principal.name} "
                                f"query[{_query_text(query)}] "
                                f"triple={' '.join(map(encode_term, triple))}"
                            )
                if (
                    len(want_view) <= 64
                    and len(query.patterns) <= 4
                    and len(want_view) ** len(query.patterns) <= 20_000
                ):
                    want = brute_force_eval(want_view, query)
                    if answers != want:
                        failures.append(
                            f"answers principal={principal.name} "
                            f"query[{_query_text(query)}] "
                            f"got={_describe_bindings(answers)} "
                            f"want={_describe_bindings(want)}"
                        )
        if len(failures) >= 10:
            break
    return CheckResult("no-leak", cases, tuple(failures))


def _scratch(scratch, name: str):
    if scratch is None:
        return Path(tempfile.mkdtemp(prefix=f"iv-{name}-")), True
    path = Path(scratch) / name
    path.mkdir(parents=True, exist_ok=True)
    return path, False


def check_clone_safety(seed=1, cases=100, scratch=None) -> CheckResult:
    """No byte of a clone's object store encodes a fact outside the view."""
    rng = _rng(seed, "clone-safety")
    root, own = _scratch(scratch, "clone-safety")
    failures = []
    try:
        with _quiet_policy_log():
            _check_clone_safety_inner(rng, cases, root, failures)
    finally:
        if own:
            shutil.rmtree(root, ignore_errors=True)
    return CheckResult("clone-safety", cases, tuple(failures))


def _check_clone_safety_inner(rng, cases, root, failures):
    for i in range(cases):
        case_dir = root / f"case-{i}"
        gis, principals = _gen_acl_instance(rng, max_quads=120)
        master = sync.init(case_dir / "master", _OWNER)
        sync.add(master, gis, _OWNER, "seed data")
        master_facts = resolve_facts(master, master.head())
        for principal in principals:
            if principal == _OWNER:
                continue
            sync.register_token(master, principal, f"tok-{principal.name}")
            cred = sync.Credential(principal, f"tok-{principal.name}")
            dest = sync.clone(master, cred, case_dir / principal.name)
            got = resolve_facts(dest, dest.head())
            want = oracle_policy_filter(master_facts, principal, _OWNER)
            if got != want:
                failures.append(
                    f"case={i} principal={principal.name} clone-facts-differ "
                    f"extra={len(got - want)} missing={len(want - got)}"
                )
            forbidden = [
                quad_line(q).encode("utf-8") for q in master_facts - want
            ]
            for obj in sorted((dest.root / "objects").rglob("*")):
                if not obj.is_file():
                    continue
                blob = obj.read_bytes()
                for line in forbidden:
                    if line in blob:
                        failures.append(
                            f"case={i} principal={principal.name} "
                            f"leaked-bytes={line.decode('utf-8')!r}"
                        )
        shutil.rmtree(case_dir)
        if len(failures) >= 10:
            break


def _random_protocol_run(rng, case_dir: Path, ops: int):
    """Shared driver: build a master + one follower and interleave the
    protocol operations. Returns (master, local, follower, follower_adds)."""
    follower = Atom("bob")
    token = "tok-bob"
    master = sync.init(case_dir / "master", _OWNER)
    read_preds = list(_READ_PREDS)
    rng.shuffle(read_preds)
    read_preds = read_preds[: rng.randint(1, len(read_preds))]
    read_patterns = [
        Pattern(Variable("s"), pred, Variable("o")) for pred in sorted(
            read_preds, key=lambda a: a.name
        )
    ]
    write_patterns = [
        Pattern(Variable("s"), pred, Variable("o")) for pred in _WRITE_PREDS
    ]
    grantee = _ACPUB if rng.random() < 0.25 else follower
    sync.grant(master, grantee, "read", read_patterns)
    sync.grant(master, grantee, "write", write_patterns)
    if rng.random() < 0.7:
        sync.add(master, _gen_gis(rng, 10), _OWNER, "pre-clone data")
    sync.register_token(master, follower, token)
    cred = sync.Credential(follower, token)
    local = sync.clone(master, cred, case_dir / "bob")
    follower_adds: set = set()
    for _ in range(rng.randint(0, ops)):
        op = rng.choice(("owner_add", "pull", "follower_add", "push"))
        if op == "owner_add":
            quads = {
                Quad(
                    rng.choice(_SUBJECTS),
                    rng.choice(_ALL_PREDS),
                    _gen_object(rng),
                    _OWNER,
                )
                for _ in range(rng.randint(1, 5))
            }
            sync.add(master, quads, _OWNER, "owner update")
        elif op == "pull":
            sync.pull(local, master, cred)
        elif op == "follower_add":
            quads = {
                Quad(
                    rng.choice(_SUBJECTS),
                    rng.choice(_WRITE_PREDS),
                    _gen_object(rng),
                    follower,
                )
                for _ in range(rng.randint(1, 3))
            }
            follower_adds |= quads
            sync.add(local, quads, follower, "follower note")
        else:
            sync.push(local, master, cred)
    return master, local, follower, cred, follower_adds


def check_convergence(seed=1, cases=200, scratch=None) -> CheckResult:
    """After a final push+pull, the follower holds exactly the permitted
    view of the master plus their own additions."""
    rng = _rng(seed, "convergence")
    root, own = _scratch(scratch, "convergence")
    failures = []
    try:
        for i in range(cases):
            case_dir = root / f"case-{i}"
            master, local, follower, cred, adds = _random_protocol_run(
                rng, case_dir, ops=8
            )
            sync.push(local, master, cred)
            sync.pull(local, master, cred)
            got = resolve_facts(local, local.head())
            master_facts = resolve_facts(master, master.head())
            want = oracle_policy_filter(master_facts, follower, _OWNER) | adds
            if got != frozenset(want):
                extra = sorted(got - want, key=quad_line)
                missing = sorted(want - got, key=quad_line)
                failures.append(
                    f"case={i} extra=[{'|'.join(map(quad_line, extra[:3]))}] "
                    f"missing=[{'|'.join(map(quad_line, missing[:3]))}]"
                )
            shutil.rmtree(case_dir)
            if len(failures) >= 10:
                break
    finally:
        if own:
            shutil.rmtree(root, ignore_errors=True)
    return CheckResult("convergence", cases, tuple(failures))


def check_push_atomicity(seed=1, cases=100, scratch=None) -> CheckResult:
    """A push holding any unpermitted or author-forged quad changes nothing."""
    rng = _rng(seed, "push-atomicity")
    root, own = _scratch(scratch, "push-atomicity")
    failures = []
    mallory = Atom("mallory")
    try:
        for i in range(cases):
            case_dir = root / f"case-{i}"
            master, local, follower, cred, _ = _random_protocol_run(
                rng, case_dir, ops=3
            )
            bad_kinds = ("unwritable-pred", "forged-author", "private-forged")
            bad = set()
            for _ in range(rng.randint(1, 3)):
                kind = rng.choice(bad_kinds)
                if kind == "unwritable-pred":
                    bad.add(
                        Quad(
                            rng.choice(_SUBJECTS),
                            rng.choice(_PRIVATE_PREDS),
                            _gen_object(rng),
                            follower,
                        )
                    )
                elif kind == "forged-author":
                    bad.add(
                        Quad(
                            rng.choice(_SUBJECTS),
                            rng.choice(_WRITE_PREDS),
                            _gen_object(rng),
                            mallory,
                        )
                    )
                else:
                    bad.add(
                        Quad(
                            rng.choice(_SUBJECTS),
                            rng.choice(_PRIVATE_PREDS),
                            _gen_object(rng),
                            mallory,
                        )
                    )
            good = {
                Quad(
                    rng.choice(_SUBJECTS),
                    rng.choice(_WRITE_PREDS),
                    _gen_object(rng),
                    follower,
                )
                for _ in range(rng.randint(0, 2))
            }
            sync.add(local, bad | good, follower, "adversarial batch")
            head_before = master.head()
            objects_before = sum(
                1 for p in (master.root / "objects").rglob("*") if p.is_file()
            )
            rejected = False
            offending = ()
            try:
                sync.push(local, master, cred)
            except PushRejected as e:
                rejected = True
                offending = e.offending
            if not rejected:
                failures.append(f"case={i} push-accepted bad={len(bad)}")
            else:
                master_facts = resolve_facts(master, head_before)
                want_bad = {
                    q
                    for q in resolve_facts(local, local.head())
                    - resolve_facts(local, local.read_ref("base/origin"))
                    if not oracle_permitted_write(master_facts, follower, q, _OWNER)
                }
                if set(offending) != want_bad:
                    failures.append(f"case={i} offending-set-differs")
            if master.head() != head_before:
                failures.append(f"case={i} head-moved")
            objects_after = sum(
                1 for p in (master.root / "objects").rglob("*") if p.is_file()
            )
            if objects_after != objects_before:
                failures.append(
                    f"case={i} object-count {objects_before}->{objects_after}"
                )
            shutil.rmtree(case_dir)
            if len(failures) >= 10:
                break
    finally:
        if own:
            shutil.rmtree(root, ignore_errors=True)
    return CheckResult("push-atomicity", cases, tuple(failures))


def check_merge_algebra(seed=1, cases=200) -> CheckResult:
    """merge_factsets is the set union: commutative, associative, idempotent."""
    rng = _rng(seed, "merge-algebra")
    failures = []
    for i in range(cases):
        a = frozenset(_gen_gis(rng, 20))
        b = frozenset(_gen_gis(rng, 20))
        c = frozenset(_gen_gis(rng, 20))
        base = frozenset(_gen_gis(rng, 10))
        union = frozenset(list(a) + list(b))
        if sync.merge_factsets(base, a, b) != union:
            failures.append(f"case={i} union-differs")
        if sync.merge_factsets(base, a, b) != sync.merge_factsets(base, b, a):
            failures.append(f"case={i} not-commutative")
        left = sync.merge_factsets(base, sync.merge_factsets(base, a, b), c)
        right = sync.merge_factsets(base, a, sync.merge_factsets(base, b, c))
        if left != right:
            failures.append(f"case={i} not-associative")
        if sync.merge_factsets(base, a, a) != a:
            failures.append(f"case={i} not-idempotent")
        if len(failures) >= 10:
            break
    return CheckResult("merge-algebra", cases, tuple(failures))


def check_hash_determinism(seed=1, cases=100, scratch=None) -> CheckResult:
    """Fact-set and commit hashes ignore insertion and parent order."""
    rng = _rng(seed, "hash-determinism")
    root, own = _scratch(scratch, "hash-determinism")
    failures = []
    try:
        repo = Repo.create(root / "repo", _OWNER)
        for i in range(cases):
            facts = sorted(_gen_gis(rng, 30), key=quad_line)
            reference = hash_factset(repo, facts)
            for _ in range(3):
                shuffled = list(facts)
                rng.shuffle(shuffled)
                if hash_factset(repo, shuffled) != reference:
                    failures.append(f"case={i} factset-order-sensitive")
                    break
            p1 = create_commit(repo, [], frozenset(facts[: len(facts) // 2]), _OWNER, "a")
            p2 = create_commit(repo, [], frozenset(facts[len(facts) // 2 :]), _OWNER, "b")
            if p1 != p2:
                one = create_commit(repo, [p1, p2], frozenset(facts), _OWNER, "m")
                two = create_commit(repo, [p2, p1], frozenset(facts), _OWNER, "m")
                if one != two:
                    failures.append(f"case={i} parent-order-sensitive")
                if create_commit(repo, [p1, p2], frozenset(facts), _OWNER, "m") != one:
                    failures.append(f"case={i} commit-not-deterministic")
            if len(failures) >= 10:
                break
    finally:
        if own:
            shutil.rmtree(root, ignore_errors=True)
    return CheckResult("hash-determinism", cases, tuple(failures))


def check_addonly_delta(seed=1, cases=50, scratch=None) -> CheckResult:
    """Standing queries never lose answers between an ancestor and any
    descendant, in any history the protocol can produce."""
    rng = _rng(seed, "addonly-delta")
    root, own = _scratch(scratch, "addonly-delta")
    failures = []
    try:
        for i in range(cases):
            case_dir = root / f"case-{i}"
            master, local, _, cred, _ = _random_protocol_run(rng, case_dir, ops=6)
            sync.push(local, master, cred)
            sync.pull(local, master, cred)
            queries = [_gen_query(rng, max_patterns=2) for _ in range(3)]
            for repo in (master, local):
                entries = store_log(repo, repo.head())
                facts = {h: resolve_facts(repo, h) for h, _ in entries}
                ancestors: dict = {}
                for h, commit in reversed(entries):
                    acc = set()
                    for parent in commit.parents:
                        acc.add(parent)
                        acc |= ancestors[parent]
                    ancestors[h] = acc
                for h, _ in entries:
                    for ancestor in ancestors[h]:
                        if not facts[ancestor] <= facts[h]:
                            failures.append(f"case={i} facts-shrank")
                            continue
                        for query in queries:
                            delta = map_delta(facts[ancestor], facts[h], query)
                            if delta.removed:
                                failures.append(
                                    f"case={i} removed-nonempty "
                                    f"query[{_query_text(query)}]"
                                )
            shutil.rmtree(case_dir)
            if len(failures) >= 10:
                break
    finally:
        if own:
            shutil.rmtree(root, ignore_errors=True)
    return CheckResult("addonly-delta", cases, tuple(failures))


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ScenarioReport:
    """Line-record account of a scenario or property-suite run."""

    records: tuple[str, ...]
    steps_executed: int
    assertions_passed: int
    assertions_failed: int
    leakage_clean: bool
    final_heads: tuple[tuple[str, str], ...] = ()
    check_counts: tuple[tuple[str, int], ...] = ()

    @property
    def passed(self) -> bool:
        return self.assertions_failed == 0 and self.leakage_clean

    def to_text(self) -> str:
        return "\n".join(self.records) + "\n"


def _write_report(workdir: Optional[Path], report: ScenarioReport) -> None:
    if workdir is not None:
        (Path(workdir) / "report.txt").write_text(report.to_text(), "utf-8")


# ---------------------------------------------------------------------------
# scripted scenario


@dataclass(frozen=True)
class OwnerAdd:
    quads: frozenset
    message: str = "add"


@dataclass(frozen=True)
class GrantStep:
    grantee: Atom
    mode: str
    patterns: tuple


@dataclass(frozen=True)
class CloneStep:
    principal: Atom


@dataclass(frozen=True)
class PullStep:
    principal: Atom


@dataclass(frozen=True)
class FollowerAdd:
    principal: Atom
    quads: frozenset
    message: str = "add"


@dataclass(frozen=True)
class PushStep:
    principal: Atom
    expect: str = "accept"  # or "reject"


@dataclass(frozen=True)
class AssertStep:
    principal: Atom
    query: MapQuery
    expected: Optional[frozenset] = None  # None: oracle-computed only


@dataclass(frozen=True)
class Scenario:
    """An ordered script over one master repo and per-principal clones."""

    steps: tuple

    def __post_init__(self):
        cloned = set()
        for step in self.steps:
            if isinstance(step, CloneStep):
                cloned.add(step.principal)
            elif isinstance(step, (PullStep, FollowerAdd, PushStep)):
                if step.principal not in cloned:
                    raise ValueError(f"{step.principal.name} was never cloned")
            elif isinstance(step, AssertStep):
                if step.principal != _OWNER and step.principal not in cloned:
                    raise ValueError(
                        f"assert names unknown principal {step.principal.name}"
                    )


def run_scenario(
    scenario: Scenario,
    workdir,
    owner: Atom = _OWNER,
    figures: bool = True,
    title: str = "scenario",
) -> ScenarioReport:
    """Execute the script, record one line per step, byte-scan for leaks."""
    workdir = Path(workdir)
    if workdir.exists() and (not workdir.is_dir() or any(workdir.iterdir())):
        raise PathNotEmpty(str(workdir))
    workdir.mkdir(parents=True, exist_ok=True)

    records = [title]
    master = sync.init(workdir / "master", owner)
    clones: dict[Atom, Repo] = {}
    creds: dict[Atom, sync.Credential] = {}
    counter = 0
    passed = failed = 0

    def record(text: str):
        nonlocal counter
        counter += 1
        records.append(f"step {counter:02d} {text}")

    record(f"init repo=master owner={owner.name} head={master.head()}")

    for step in scenario.steps:
        if isinstance(step, OwnerAdd):
            head = sync.add(master, step.quads, owner, step.message)
            record(f"add repo=master author={owner.name} quads={len(step.quads)} head={head}")
        elif isinstance(step, GrantStep):
            head = sync.grant(master, step.grantee, step.mode, step.patterns)
            record(
                f"grant repo=master grantee={step.grantee.name} mode={step.mode} "
                f"patterns={len(step.patterns)} head={head}"
            )
        elif isinstance(step, CloneStep):
            name = step.principal.name
            token = f"tok-{name}"
            sync.register_token(master, step.principal, token)
            creds[step.principal] = sync.Credential(step.principal, token)
            repo = sync.clone(master, creds[step.principal], workdir / name)
            clones[step.principal] = repo
            facts = resolve_facts(repo, repo.head())
            record(f"clone repo={name} quads={len(facts)} head={repo.head()}")
        elif isinstance(step, PullStep):
            repo = clones[step.principal]
            receipt = sync.pull(repo, master, creds[step.principal])
            record(
                f"pull repo={step.principal.name} quads={receipt.fetched_or_pushed} "
                f"head={receipt.new_head}"
            )
        elif isinstance(step, FollowerAdd):
            repo = clones[step.principal]
            head = sync.add(repo, step.quads, step.principal, step.message)
            record(
                f"add repo={step.principal.name} author={step.principal.name} "
                f"quads={len(step.quads)} head={head}"
            )
        elif isinstance(step, PushStep):
            repo = clones[step.principal]
            outcome = "accept"
            quads = 0
            try:
                receipt = sync.push(repo, master, creds[step.principal])
                quads = receipt.fetched_or_pushed
            except PushRejected:
                outcome = "reject"
            ok = outcome == step.expect
            passed, failed = (passed + 1, failed) if ok else (passed, failed + 1)
            record(
                f"push repo={step.principal.name} expect={step.expect} "
                f"outcome={outcome} quads={quads} head={master.head()} "
                f"{'pass' if ok else 'FAIL'}"
            )
        elif isinstance(step, AssertStep):
            repo = master if step.principal == owner else clones[step.principal]
            repo_owner = repo.owner()
            facts = resolve_facts(repo, repo.head())
            got = eval_map(
                policy_view(facts, step.principal, repo_owner), step.query
            )
            want = brute_force_eval(
                oracle_policy_filter(facts, step.principal, repo_owner), step.query
            )
            ok = got == want
            if step.expected is not None:
                ok = ok and got == step.expected
            passed, failed = (passed + 1, failed) if ok else (passed, failed + 1)
            name = "master" if step.principal == owner else step.principal.name
            line = (
                f"assert repo={name} as={step.principal.name} "
                f"query[{_query_text(step.query)}] want={len(want)} got={len(got)}"
            )
            if not ok:
                line += (
                    f" FAIL got={_describe_bindings(got)} "
                    f"want={_describe_bindings(want)}"
                )
                if step.expected is not None:
                    line += f" fixture={_describe_bindings(step.expected)}"
            else:
                line += " pass"
            record(line)
        else:
            raise TypeError(f"unknown step {step!r}")

    # byte-level leakage scan of every clone against the final master facts
    master_facts = resolve_facts(master, master.head())
    leakage_clean = True
    for principal in sorted(clones, key=lambda a: a.name):
        repo = clones[principal]
        permitted = oracle_policy_filter(master_facts, principal, owner)
        forbidden = [quad_line(q).encode("utf-8") for q in master_facts - permitted]
        leaked = 0
        for path in sorted(repo.root.rglob("*")):
            if not path.is_file():
                continue
            blob = path.read_bytes()
            leaked += sum(1 for line in forbidden if line in blob)
        clean = leaked == 0
        leakage_clean = leakage_clean and clean
        records.append(
            f"leakage repo={principal.name} forbidden={len(forbidden)} "
            f"scan={'clean' if clean else f'LEAKED:{leaked}'}"
        )

    heads = [("master", master.head())]
    heads += [
        (p.name, clones[p].head()) for p in sorted(clones, key=lambda a: a.name)
    ]
    for name, head in heads:
        records.append(f"final repo={name} head={head}")
    verdict = "pass" if failed == 0 and leakage_clean else "fail"
    records.append(
        f"result {verdict} steps={counter} asserts={passed}/{passed + failed} "
        f"leakage={'clean' if leakage_clean else 'LEAKED'}"
    )

    report = ScenarioReport(
        records=tuple(records),
        steps_executed=counter,
        assertions_passed=passed,
        assertions_failed=failed,
        leakage_clean=leakage_clean,
        final_heads=tuple(heads),
    )
    _write_report(workdir, report)
    if figures:
        from .figures import render_commit_graph

        repos = [("master", master)] + [
            (p.name, clones[p]) for p in sorted(clones, key=lambda a: a.name)
        ]
        render_commit_graph(repos, workdir / "commit_graph.png")
    if not report.passed:
        first = next(
            (r for r in records if "FAIL" in r or "LEAKED" in r), "unknown failure"
        )
        raise ScenarioFailure(report, first)
    return report


# the social fixture: one owner, followers reading updates and writing comments

_Q_PHOTO = parse_query("?s <type> <Photo>")
_Q_TYPES = parse_query("?s <type> ?t")
_Q_SSN = parse_query("?x <ssn> ?v")
_Q_WILD = parse_query("?s ?p ?o")

_READ_GRANT = tuple(
    parse_query(text).patterns[0]
    for text in (
        "?s <type> ?t",
        "?s <caption> ?v",
        "?s <text> ?v",
        "?s <title> ?v",
        "?c <comment_on> ?t",
        "?c <comment_text> ?v",
    )
)
_WRITE_GRANT = tuple(
    parse_query(text).patterns[0]
    for text in ("?c <comment_on> ?t", "?c <comment_text> ?v")
)


def _social_content(owner: Atom):
    def fact(s, p, o):
        obj = Literal(o[1:-1]) if o.startswith('"') else Atom(o)
        return Quad(Atom(s), Atom(p), obj, owner)

    private = frozenset({fact("alice", "ssn", '"123-45-6789"')})
    updates = frozenset(
        {
            fact("photo1", "type", "Photo"),
            fact("photo1", "caption", '"sunset at the pier"'),
            fact("status1", "type", "Status"),
            fact("status1", "text", '"back from holiday"'),
            fact("event1", "type", "Event"),
            fact("event1", "title", '"birthday picnic"'),
        }
    )
    return private, updates


def social_scenario(
    followers=("bob",), comment_write_grant: bool = True
) -> Scenario:
    """Build the sharing walkthrough: grants, clone, updates, pull,
    comment push (accepted or rejected), cross-follower visibility."""
    owner = _OWNER
    private, updates = _social_content(owner)
    follower_atoms = tuple(Atom(name) for name in followers)
    steps: list = [OwnerAdd(private, "private note")]
    if follower_atoms:
        steps.append(GrantStep(_ACPUB, "read", _READ_GRANT))
        if comment_write_grant:
            for follower in follower_atoms:
                steps.append(GrantStep(follower, "write", _WRITE_GRANT))
    for follower in follower_atoms:
        steps.append(CloneStep(follower))
        steps.append(AssertStep(follower, _Q_PHOTO, frozenset()))
    steps.append(OwnerAdd(updates, "updates"))
    photo_binding = frozenset({Binding.of({"s": Atom("photo1")})})
    for follower in follower_atoms:
        steps.append(PullStep(follower))
        steps.append(AssertStep(follower, _Q_PHOTO, photo_binding))
        steps.append(
            AssertStep(
                follower,
                _Q_TYPES,
                frozenset(
                    {
                        Binding.of({"s": Atom("photo1"), "t": Atom("Photo")}),
                        Binding.of({"s": Atom("status1"), "t": Atom("Status")}),
                        Binding.of({"s": Atom("event1"), "t": Atom("Event")}),
                    }
                ),
            )
        )
        steps.append(AssertStep(follower, _Q_SSN, frozenset()))
        steps.append(AssertStep(follower, _Q_WILD))
    comments = {}
    for follower in follower_atoms:
        node = Atom(f"comment-{follower.name}-1")
        comments[follower] = frozenset(
            {
                Quad(node, Atom("comment_on"), Atom("photo1"), follower),
                Quad(
                    node,
                    Atom("comment_text"),
                    Literal(f"well captured, says {follower.name}"),
                    follower,
                ),
            }
        )
        steps.append(FollowerAdd(follower, comments[follower], "my comment"))
        steps.append(
            PushStep(follower, "accept" if comment_write_grant else "reject")
        )
    if follower_atoms and comment_write_grant:
        comment_query = parse_query("?c <comment_on> <photo1>")
        expected = frozenset(
            Binding.of({"c": Atom(f"comment-{f.name}-1")}) for f in follower_atoms
        )
        steps.append(AssertStep(owner, comment_query, expected))
        for follower in follower_atoms:
            steps.append(PullStep(follower))
            steps.append(AssertStep(follower, comment_query, expected))
    steps.append(AssertStep(owner, _Q_SSN))
    return Scenario(tuple(steps))


def run_social_scenario(
    workdir,
    followers=("bob",),
    comment_write_grant: bool = True,
    figures: bool = True,
) -> ScenarioReport:
    names = ",".join(followers) if followers else "none"
    grant_flag = "yes" if comment_write_grant else "no"
    title = f"scenario social followers={names} comment-grant={grant_flag}"
    return run_scenario(
        social_scenario(followers, comment_write_grant),
        workdir,
        figures=figures,
        title=title,
    )


# ---------------------------------------------------------------------------
# randomized property suite


def run_property_suite(
    seed: int = 1,
    cases: int = 50,
    workdir=None,
    figures: bool = True,
    policy_view_impl=None,
) -> ScenarioReport:
    """Run every module-invariant check at sizes scaled from `cases`."""
    if cases < 1:
        raise ValueError("cases must be at least 1")
    workdir = Path(workdir) if workdir is not None else None
    if workdir is not None:
        workdir.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix="iv-props-"))
    try:
        results = [
            check_oracle_equivalence(seed, cases),
            check_no_leak(seed, max(1, cases // 5), policy_view_impl=policy_view_impl),
            check_clone_safety(seed, max(1, cases // 10), scratch),
            check_convergence(seed, max(1, cases // 10), scratch),
            check_push_atomicity(seed, max(1, cases // 10), scratch),
            check_merge_algebra(seed, max(1, cases // 2)),
            check_hash_determinism(seed, max(1, cases // 2), scratch),
            check_addonly_delta(seed, max(1, cases // 5), scratch),
        ]
    finally:
        shutil.rmtree(scratch, ignore_errors=True)

    records = [f"suite props seed={seed} cases={cases}"]
    violations = []
    for result in results:
        records.append(
            f"check {result.name} cases={result.cases} failures={len(result.failures)}"
        )
        for failure in result.failures[:3]:
            records.append(f"counterexample {result.name} {failure}")
            violations.append(f"{result.name}: {failure}")
    total = sum(r.cases for r in results)
    bad = sum(len(r.failures) for r in results)
    verdict = "pass" if bad == 0 else "fail"
    records.append(
        f"result {verdict} checks={len(results)} cases={total} failures={bad}"
    )
    report = ScenarioReport(
        records=tuple(records),
        steps_executed=len(results),
        assertions_passed=total - bad,
        assertions_failed=bad,
        leakage_clean=all(
            r.ok for r in results if r.name in ("no-leak", "clone-safety")
        ),
        check_counts=tuple((r.name, r.cases) for r in results),
    )
    _write_report(workdir, report)
    if figures and workdir is not None:
        from .figures import render_check_counts

        render_check_counts(dict(report.check_counts), workdir / "check_counts.png")
    if violations:
        raise PropertyViolation(report, violations)
    return report
