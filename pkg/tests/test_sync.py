"""The sharing protocol: init, clone, pull, push, and token auth.

Fixtures build one master (owner alice) with a read grant on content
predicates and a write grant on comments for bob, then exercise the
protocol through its receipts, ref moves, and commit messages.
"""

import pytest

from iv.errors import (
    AuthFailed,
    NotOwner,
    PathNotEmpty,
    PushRejected,
    UnrelatedHistories,
)
from iv.model import Atom, parse_query, quad_line
from iv.policy import reify_policies
from iv.store import read_commit, resolve_facts
from iv import sync

from support import ALICE, ALICE_ROOT_COMMIT, BOB, CAROL, q

READ_PATTERNS = tuple(parse_query("?s <caption> ?c ; ?s <type> ?t").patterns)
WRITE_PATTERNS = tuple(parse_query("?c <comment_on> ?t").patterns)

PUBLIC = frozenset(
    {q("photo1", "type", "Photo"), q("photo1", "caption", '"sunset"')}
)
PRIVATE = frozenset({q("alice", "ssn", '"123-45-6789"')})
COMMENTS = frozenset(
    {
        q("c1", "comment_on", "photo1", "bob"),
        q("c2", "comment_on", "photo1", "bob"),
    }
)


@pytest.fixture
def master(tmp_path):
    repo = sync.init(tmp_path / "master", ALICE)
    sync.add(repo, PUBLIC | PRIVATE, ALICE, "content")
    sync.grant(repo, BOB, "read", READ_PATTERNS)
    sync.grant(repo, BOB, "write", WRITE_PATTERNS)
    sync.register_token(repo, BOB, "tok-bob")
    return repo


@pytest.fixture
def cred():
    return sync.Credential(BOB, "tok-bob")


@pytest.fixture
def local(master, cred, tmp_path):
    return sync.clone(master, cred, tmp_path / "bob")


# ---------------------------------------------------------------------------
# init and add


def test_init_produces_the_frozen_empty_root(tmp_path):
    repo = sync.init(tmp_path / "r", ALICE)
    assert repo.head() == ALICE_ROOT_COMMIT
    assert resolve_facts(repo, repo.head()) == frozenset()
    assert read_commit(repo, repo.head()).message == "init"
    assert repo.owner() == ALICE


def test_init_refuses_non_empty_path(tmp_path):
    (tmp_path / "r").mkdir()
    (tmp_path / "r" / "junk").write_text("x")
    with pytest.raises(PathNotEmpty):
        sync.init(tmp_path / "r", ALICE)


def test_add_is_owner_only(tmp_path):
    repo = sync.init(tmp_path / "r", ALICE)
    with pytest.raises(NotOwner):
        sync.add(repo, PUBLIC, BOB, "not mine")
    with pytest.raises(TypeError):
        sync.add(repo, ["not a quad"], ALICE)


def test_add_unions_and_always_commits(tmp_path):
    repo = sync.init(tmp_path / "r", ALICE)
    first = sync.add(repo, PUBLIC, ALICE, "one")
    again = sync.add(repo, PUBLIC, ALICE, "same facts")
    assert again != first  # history records the act
    assert read_commit(repo, again).parents == (first,)
    assert resolve_facts(repo, again) == resolve_facts(repo, first) == PUBLIC
    empty = sync.add(repo, frozenset(), ALICE, "nothing new")
    assert resolve_facts(repo, empty) == PUBLIC


def test_followers_write_their_own_clone(local):
    head = sync.add(local, COMMENTS, BOB, "my comments")
    assert resolve_facts(local, head) >= COMMENTS
    with pytest.raises(NotOwner):
        sync.add(local, COMMENTS, ALICE, "wrong repo")


# ---------------------------------------------------------------------------
# grants through the protocol


def test_grant_allocates_ids_and_round_trips(master):
    policies = reify_policies(resolve_facts(master, master.head()), ALICE)
    assert [p.id.name for p in policies] == ["ac:pol-1", "ac:pol-2"]
    assert policies[0].grantee == BOB
    assert policies[0].mode == "read"
    assert policies[0].patterns == READ_PATTERNS
    assert policies[1].mode == "write"
    assert policies[1].patterns == WRITE_PATTERNS
    assert read_commit(master, master.head()).message == "grant write bob"


def test_grant_validation(master):
    with pytest.raises(ValueError):
        sync.grant(master, BOB, "read", ())
    with pytest.raises(ValueError):
        sync.grant(master, BOB, "admin", READ_PATTERNS)


def test_grant_custom_message(tmp_path):
    repo = sync.init(tmp_path / "r", ALICE)
    sync.grant(repo, BOB, "read", READ_PATTERNS, "bob may look")
    assert read_commit(repo, repo.head()).message == "bob may look"


# ---------------------------------------------------------------------------
# authentication


def test_authenticate(master):
    assert sync.authenticate(master, sync.Credential(BOB, "tok-bob")) == BOB
    with pytest.raises(AuthFailed):
        sync.authenticate(master, sync.Credential(BOB, "wrong"))
    with pytest.raises(AuthFailed):
        sync.authenticate(master, sync.Credential(CAROL, "tok-bob"))
    with pytest.raises(ValueError):
        sync.Credential(BOB, "")


def test_token_replacement(master):
    sync.register_token(master, BOB, "fresh")
    with pytest.raises(AuthFailed):
        sync.authenticate(master, sync.Credential(BOB, "tok-bob"))
    assert sync.authenticate(master, sync.Credential(BOB, "fresh")) == BOB


# ---------------------------------------------------------------------------
# clone


def test_clone_holds_exactly_the_permitted_view(master, local):
    facts = resolve_facts(local, local.head())
    assert facts == PUBLIC  # grant quads and the ssn quad stay behind
    root = read_commit(local, local.head())
    assert root.parents == ()
    assert root.seq == 0
    assert root.message == f"clone-of {master.head()}"
    assert local.owner() == BOB
    assert local.read_ref("base/origin") == local.head()
    assert local.read_ref("remotes/origin") == local.head()


def test_clone_requires_valid_token(master, tmp_path):
    dest = tmp_path / "evil"
    with pytest.raises(AuthFailed):
        sync.clone(master, sync.Credential(BOB, "wrong"), dest)
    assert not dest.exists()


def test_clone_refuses_non_empty_dest(master, cred, tmp_path):
    dest = tmp_path / "busy"
    dest.mkdir()
    (dest / "file").write_text("x")
    with pytest.raises(PathNotEmpty):
        sync.clone(master, cred, dest)


def test_owner_clone_sees_everything(master, tmp_path):
    sync.register_token(master, ALICE, "tok-alice")
    mine = sync.clone(master, sync.Credential(ALICE, "tok-alice"), tmp_path / "mine")
    assert resolve_facts(mine, mine.head()) == resolve_facts(master, master.head())


# ---------------------------------------------------------------------------
# pull


def test_pull_merges_new_permitted_facts(master, local, cred):
    new = frozenset({q("photo2", "type", "Photo"), q("photo2", "secret", '"x"')})
    sync.add(master, new, ALICE, "more photos")
    master_head = master.head()
    old_head = local.head()
    receipt = sync.pull(local, master, cred)
    facts = resolve_facts(local, receipt.new_head)
    assert q("photo2", "type", "Photo") in facts
    assert q("photo2", "secret", '"x"') not in facts  # no read grant on <secret>
    assert receipt.fetched_or_pushed == 1
    tracking = receipt.base_updated_to
    assert local.read_ref("base/origin") == tracking
    assert local.read_ref("remotes/origin") == tracking
    assert read_commit(local, tracking).message == f"pull-of {master_head}"
    head = read_commit(local, receipt.new_head)
    assert head.message == f"merge {tracking}"
    assert set(head.parents) == {old_head, tracking}


def test_pull_is_a_noop_when_the_view_is_unchanged(master, local, cred):
    before = local.head()
    base = local.read_ref("base/origin")
    receipt = sync.pull(local, master, cred)
    assert receipt == sync.SyncReceipt(before, 0, base)
    assert local.head() == before
    # a master commit that does not change the view is still a no-op
    sync.add(master, frozenset(), ALICE, "idle commit")
    sync.add(master, frozenset({q("x", "secret", '"v"')}), ALICE, "invisible")
    receipt = sync.pull(local, master, cred)
    assert receipt == sync.SyncReceipt(before, 0, base)


def test_pull_keeps_local_additions(master, local, cred):
    sync.add(local, COMMENTS, BOB, "mine")
    sync.add(master, frozenset({q("photo2", "type", "Photo")}), ALICE, "new")
    receipt = sync.pull(local, master, cred)
    assert COMMENTS <= resolve_facts(local, receipt.new_head)


def test_pull_requires_a_sync_base(master, cred, tmp_path):
    stranger = sync.init(tmp_path / "stranger", BOB)
    with pytest.raises(UnrelatedHistories):
        sync.pull(stranger, master, cred)


# ---------------------------------------------------------------------------
# push


def test_push_applies_the_permitted_delta(master, local, cred):
    sync.add(local, COMMENTS, BOB, "comments")
    base_before = local.read_ref("base/origin")
    receipt = sync.push(local, master, cred)
    assert receipt.fetched_or_pushed == 2
    assert receipt.base_updated_to == base_before
    assert local.read_ref("base/origin") == base_before  # push never moves base
    assert COMMENTS <= resolve_facts(master, master.head())
    head = read_commit(master, master.head())
    assert head.message == "push-from bob"
    assert head.author == BOB


def test_push_without_local_changes_is_a_noop(master, local, cred):
    head_before = master.head()
    receipt = sync.push(local, master, cred)
    assert receipt == sync.SyncReceipt(head_before, 0, local.read_ref("base/origin"))
    assert master.head() == head_before


def test_push_rejects_the_whole_batch_on_one_bad_quad(master, local, cred):
    bad = frozenset(
        {
            q("mallory", "ssn", '"000"', "bob"),  # predicate not writable
            q("c9", "comment_on", "photo1", "carol"),  # forged author
        }
    )
    sync.add(local, COMMENTS | bad, BOB, "mixed batch")
    head_before = master.head()
    objects_before = sorted(
        p for p in (master.root / "objects").rglob("*") if p.is_file()
    )
    with pytest.raises(PushRejected) as err:
        sync.push(local, master, cred)
    assert err.value.offending == tuple(sorted(bad, key=quad_line))
    assert master.head() == head_before
    after = sorted(p for p in (master.root / "objects").rglob("*") if p.is_file())
    assert after == objects_before
    assert COMMENTS.isdisjoint(resolve_facts(master, master.head()))


def test_push_delta_is_against_base_not_master_head(master, local, cred):
    # facts bob merely pulled are not re-sent as his own
    sync.add(master, frozenset({q("photo2", "type", "Photo")}), ALICE, "new")
    sync.pull(local, master, cred)
    receipt = sync.push(local, master, cred)
    assert receipt.fetched_or_pushed == 0


def test_push_requires_a_sync_base(master, cred, tmp_path):
    stranger = sync.init(tmp_path / "stranger", BOB)
    with pytest.raises(UnrelatedHistories):
        sync.push(stranger, master, cred)


def test_push_then_pull_converges(master, local, cred):
    sync.add(local, COMMENTS, BOB, "comments")
    sync.push(local, master, cred)
    sync.pull(local, master, cred)
    local_facts = resolve_facts(local, local.head())
    master_facts = resolve_facts(master, master.head())
    assert COMMENTS <= master_facts
    assert COMMENTS <= local_facts
    assert PRIVATE.isdisjoint(local_facts)


# ---------------------------------------------------------------------------
# merge


def test_merge_factsets_is_union_and_ignores_base():
    a = frozenset({q("a", "p", "o")})
    b = frozenset({q("b", "p", "o")})
    assert sync.merge_factsets(frozenset(), a, b) == a | b
    assert sync.merge_factsets(a, a, b) == sync.merge_factsets(frozenset(), b, a)
    assert sync.merge_factsets(b, a, a) == a
