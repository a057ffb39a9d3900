"""The sharing protocol: init, policy-filtered clone, pull, push.

A master repository is shared by path. Clones receive a root commit whose
tree is exactly the principal's policy view, so nothing outside the view
ever reaches their object store. Pulls materialize the current view as a
remote-tracking commit and union-merge it; pushes send back the delta
against the last synchronized view, checked quad-by-quad against write
grants and applied atomically or not at all.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import AuthFailed, NotOwner, PushRejected, UnrelatedHistories
from .model import Atom, FactSet, Pattern, Quad, encode_term, quad_line
from .policy import Policy, next_policy_id, permitted_write, policy_quads, policy_view
from .store import Hash, Repo, create_commit, resolve_facts

BASE_REF = "base/origin"
REMOTE_REF = "remotes/origin"


@dataclass(frozen=True)
class Credential:
    """Who is calling, and the shared secret proving it."""

    principal: Atom
    token: str

    def __post_init__(self):
        if not self.token:
            raise ValueError("token must be non-empty")


@dataclass(frozen=True)
class SyncReceipt:
    """What a sync operation did: resulting head, quads moved, base after."""

    new_head: Hash
    fetched_or_pushed: int
    base_updated_to: Hash


def init(path, owner: Atom) -> Repo:
    """Create a master repository whose head is an empty root commit."""
    repo = Repo.create(path, owner)
    root = create_commit(repo, [], frozenset(), owner, "init")
    repo.set_head(root)
    return repo


def add(repo: Repo, quads: Iterable[Quad], author: Atom, message: str = "add") -> Hash:
    """Append facts as a new head commit. Only the owner writes directly;
    anyone else goes through push. Re-adding known facts still commits:
    history records the act even when the set is unchanged."""
    quads = frozenset(quads)
    for q in quads:
        if not isinstance(q, Quad):
            raise TypeError(f"not a quad: {q!r}")
    if author != repo.owner():
        raise NotOwner(f"{author.name} is not the owner of {repo.root}")
    with repo.lock():
        head = repo.head()
        facts = resolve_facts(repo, head) | quads
        new = create_commit(repo, [head], facts, author, message)
        repo.set_head(new)
        return new


def grant(
    repo: Repo,
    grantee: Atom,
    mode: str,
    patterns: Iterable[Pattern],
    message: Optional[str] = None,
) -> Hash:
    """Reify a fresh policy into quads and append it. The policy id is
    allocated from the current facts, so the whole step runs under the
    repo lock."""
    patterns = tuple(sorted(set(patterns), key=lambda p: tuple(map(encode_term, p.parts()))))
    if not patterns:
        raise ValueError("grant needs at least one pattern")
    owner = repo.owner()
    with repo.lock():
        facts = resolve_facts(repo, repo.head())
        policy = Policy(next_policy_id(facts), grantee, mode, patterns, owner)
        msg = message or f"grant {mode} {grantee.name}"
        return add(repo, policy_quads(policy), owner, msg)


def register_token(repo: Repo, principal: Atom, token: str) -> None:
    """Enter (or replace) a principal's token in the repo token table."""
    repo.set_token(principal, token)


def authenticate(master: Repo, cred: Credential) -> Atom:
    """Check the credential against the token table in constant time."""
    table = master.tokens()
    expected = table.get(cred.principal.name)
    supplied = cred.token.encode("utf-8")
    if expected is None:
        # burn the same comparison work for unknown principals
        hmac.compare_digest(b"\x00" * 32, supplied)
        raise AuthFailed(f"unknown principal {cred.principal.name}")
    if not hmac.compare_digest(expected.encode("utf-8"), supplied):
        raise AuthFailed(f"bad token for {cred.principal.name}")
    return cred.principal


def clone(master: Repo, cred: Credential, dest_path) -> Repo:
    """Copy the principal's policy view into a fresh repository.

    The clone's root commit holds exactly the filtered facts; no object
    containing anything outside the view is written.
    """
    principal = authenticate(master, cred)
    master_head = master.head()
    facts = resolve_facts(master, master_head)
    permitted = policy_view(facts, principal, master.owner())
    dest = Repo.create(dest_path, principal)
    root = create_commit(dest, [], permitted, principal, f"clone-of {master_head}")
    dest.set_head(root)
    dest.write_ref(BASE_REF, root)
    dest.write_ref(REMOTE_REF, root)
    return dest


def pull(local: Repo, master: Repo, cred: Credential) -> SyncReceipt:
    """Fetch the current policy view and union-merge it into local.

    The view lands as a remote-tracking commit R on top of the previous
    base, then head becomes merge(old head, R). If the view is unchanged
    since the last sync the pull is a no-op.
    """
    principal = authenticate(master, cred)
    master_head = master.head()
    permitted = policy_view(
        resolve_facts(master, master_head), principal, master.owner()
    )
    with local.lock():
        base = local.read_ref(BASE_REF)
        if base is None:
            raise UnrelatedHistories(f"{local.root} has no {BASE_REF}")
        if permitted == resolve_facts(local, base):
            return SyncReceipt(local.head(), 0, base)
        tracking = create_commit(
            local, [base], permitted, principal, f"pull-of {master_head}"
        )
        head = local.head()
        local_facts = resolve_facts(local, head)
        merged = local_facts | permitted
        fetched = len(permitted - local_facts)
        new_head = create_commit(
            local,
            sorted({head, tracking}),
            merged,
            principal,
            f"merge {tracking}",
        )
        local.write_ref(BASE_REF, tracking)
        local.write_ref(REMOTE_REF, tracking)
        local.set_head(new_head)
        return SyncReceipt(new_head, fetched, tracking)


def push(local: Repo, master: Repo, cred: Credential) -> SyncReceipt:
    """Send local additions since the last sync back to the master.

    The delta is computed against the base ref, never against the master
    head, so a follower cannot replay master facts as their own. Every
    quad must pass the write check; one bad quad rejects the whole push
    with the master untouched.
    """
    principal = authenticate(master, cred)
    base = local.read_ref(BASE_REF)
    if base is None:
        raise UnrelatedHistories(f"{local.root} has no {BASE_REF}")
    delta = resolve_facts(local, local.head()) - resolve_facts(local, base)
    if not delta:
        return SyncReceipt(master.head(), 0, base)
    with master.lock():
        master_head = master.head()
        master_facts = resolve_facts(master, master_head)
        owner = master.owner()
        offending = sorted(
            (q for q in delta if not permitted_write(master_facts, principal, q, owner)),
            key=quad_line,
        )
        if offending:
            raise PushRejected(offending)
        new_head = create_commit(
            master,
            [master_head],
            master_facts | delta,
            principal,
            f"push-from {principal.name}",
        )
        master.set_head(new_head)
    return SyncReceipt(new_head, len(delta), base)


def merge_factsets(base: FactSet, a: FactSet, b: FactSet) -> FactSet:
    """Three-way merge of add-only sets: the union of both sides. The base
    argument stays in the signature for auditability; with no retraction
    it cannot influence the result."""
    return frozenset(a) | frozenset(b)
