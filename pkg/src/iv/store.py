"""Content-addressed, append-only storage of fact-set trees and commits.

Objects are stored as ``<kind> SP <decimal-byte-length> LF <body>`` under
the SHA-256 of those exact bytes, so identical content always lands on the
same key and nothing is ever rewritten. Commits carry no wall-clock data;
a logical ``seq`` counter keeps hashes reproducible.

On-disk layout under a repository root::

    objects/<2 hex>/<62 hex>      raw object bytes, header included
    refs/heads/master             64 hex chars + newline
    refs/remotes/<name>           ditto
    refs/base/<name>              ditto (last synchronized filtered snapshot)
    meta/owner                    principal atom name + newline
    meta/tokens                   lines: principal SP token
    lock                          advisory lock file
"""

from __future__ import annotations

import fcntl
import hashlib
import os
import re
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .errors import (
    CorruptObject,
    MalformedLine,
    MalformedQuery,
    NotARepository,
    PathNotEmpty,
    StorageFailure,
    UnknownObject,
    UnknownParent,
)
from .model import Atom, Literal, Quad, canonical_serialize, parse_fact_line, parse_term
from .model import encode_term

Hash = str

OBJECT_KINDS = ("factset", "commit")
HASH_RE = re.compile(r"[0-9a-f]{64}")
_REF_NAME_RE = re.compile(r"[A-Za-z0-9_.-]+(/[A-Za-z0-9_.-]+)*")

MAX_PARENTS = 2


@dataclass(frozen=True)
class Commit:
    """Immutable snapshot node: parent links, tree hash, author, seq, message."""

    parents: tuple[Hash, ...]
    tree: Hash
    author: Atom
    seq: int
    message: str

    def __post_init__(self):
        if len(self.parents) > MAX_PARENTS:
            raise ValueError(f"at most {MAX_PARENTS} parents")
        if list(self.parents) != sorted(self.parents):
            raise ValueError("parents must be sorted")
        if len(set(self.parents)) != len(self.parents):
            raise ValueError("duplicate parents")
        for p in self.parents + (self.tree,):
            if not HASH_RE.fullmatch(p):
                raise ValueError(f"bad hash: {p!r}")
        if self.seq < 0:
            raise ValueError("seq must be non-negative")


def serialize_commit(c: Commit) -> bytes:
    """Fixed byte layout; the message reuses the literal escape rules."""
    lines = [f"tree {c.tree}"]
    lines += [f"parent {p}" for p in c.parents]
    lines += [
        f"author {c.author.name}",
        f"seq {c.seq}",
        f"msg {encode_term(Literal(c.message))}",
    ]
    return "".join(line + "\n" for line in lines).encode("utf-8")


def parse_commit(body: bytes) -> Commit:
    """Strict inverse of serialize_commit; anything off is CorruptObject."""
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as e:
        raise CorruptObject(f"commit not UTF-8: {e}") from None
    lines = text.split("\n")
    if not lines or lines[-1] != "":
        raise CorruptObject("commit must end with newline")
    lines = lines[:-1]
    try:
        fields = [line.split(" ", 1) for line in lines]
        keys = [f[0] for f in fields]
        if keys[0] != "tree":
            raise ValueError("missing tree")
        tree = fields[0][1]
        parents = []
        i = 1
        while i < len(keys) and keys[i] == "parent":
            parents.append(fields[i][1])
            i += 1
        if keys[i : i + 3] != ["author", "seq", "msg"]:
            raise ValueError("bad field order")
        author = Atom(fields[i][1])
        seq = int(fields[i + 1][1])
        if str(seq) != fields[i + 1][1]:
            raise ValueError("non-canonical seq")
        msg_term = parse_term(fields[i + 2][1])
        if not isinstance(msg_term, Literal):
            raise ValueError("msg must be a quoted string")
        if i + 3 != len(keys):
            raise ValueError("trailing fields")
        return Commit(tuple(parents), tree, author, seq, msg_term.value)
    except (ValueError, IndexError, MalformedQuery) as e:
        raise CorruptObject(f"bad commit object: {e}") from None


class Repo:
    """Handle on an on-disk repository; see the module docstring for layout.

    Head moves are serialized through an advisory lock (flock on ``lock``
    plus an in-process re-entrant lock, since flock is per open file).
    Object writes need no lock: puts are idempotent.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self._rlock = threading.RLock()
        self._lock_depth = 0
        self._lock_fh = None

    # -- lifecycle ----------------------------------------------------------

    @classmethod
    def create(cls, path, owner: Atom) -> "Repo":
        path = Path(path)
        if path.exists():
            if not path.is_dir() or any(path.iterdir()):
                raise PathNotEmpty(str(path))
        try:
            (path / "objects").mkdir(parents=True)
            for sub in ("heads", "remotes", "base"):
                (path / "refs" / sub).mkdir(parents=True)
            (path / "meta").mkdir()
            _atomic_write(path / "meta" / "owner", f"{owner.name}\n".encode())
            _atomic_write(path / "meta" / "tokens", b"")
            (path / "lock").touch()
        except OSError as e:
            raise StorageFailure(f"cannot create repo at {path}: {e}") from None
        return cls(path)

    @classmethod
    def open(cls, path) -> "Repo":
        path = Path(path)
        if not (path / "objects").is_dir() or not (path / "meta" / "owner").is_file():
            raise NotARepository(str(path))
        return cls(path)

    def owner(self) -> Atom:
        try:
            name = (self.root / "meta" / "owner").read_text("utf-8").strip()
        except OSError as e:
            raise StorageFailure(str(e)) from None
        return Atom(name)

    # -- locking ------------------------------------------------------------

    @contextmanager
    def lock(self):
        with self._rlock:
            if self._lock_depth == 0:
                self._lock_fh = open(self.root / "lock", "a+")
                fcntl.flock(self._lock_fh, fcntl.LOCK_EX)
            self._lock_depth += 1
            try:
                yield self
            finally:
                self._lock_depth -= 1
                if self._lock_depth == 0:
                    fcntl.flock(self._lock_fh, fcntl.LOCK_UN)
                    self._lock_fh.close()
                    self._lock_fh = None

    # -- refs ---------------------------------------------------------------

    def _ref_path(self, name: str) -> Path:
        if not _REF_NAME_RE.fullmatch(name) or ".." in name.split("/"):
            raise ValueError(f"bad ref name: {name!r}")
        return self.root / "refs" / name

    def read_ref(self, name: str) -> Optional[Hash]:
        path = self._ref_path(name)
        if not path.is_file():
            return None
        value = path.read_text("utf-8").strip()
        if not HASH_RE.fullmatch(value):
            raise CorruptObject(f"ref {name} holds {value!r}")
        return value

    def write_ref(self, name: str, value: Hash) -> None:
        if not HASH_RE.fullmatch(value):
            raise ValueError(f"bad hash: {value!r}")
        if not self._object_path(value).is_file():
            raise UnknownObject(f"ref target not in store: {value}")
        path = self._ref_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(path, f"{value}\n".encode())

    def head(self) -> Hash:
        value = self.read_ref("heads/master")
        if value is None:
            raise NotARepository(f"{self.root}: no master head")
        return value

    def set_head(self, value: Hash) -> None:
        self.write_ref("heads/master", value)

    # -- token table --------------------------------------------------------

    def tokens(self) -> dict[str, str]:
        out: dict[str, str] = {}
        try:
            text = (self.root / "meta" / "tokens").read_text("utf-8")
        except OSError:
            return out
        for line in text.splitlines():
            if not line.strip():
                continue
            principal, _, token = line.partition(" ")
            if token:
                out[principal] = token
        return out

    def set_token(self, principal: Atom, token: str) -> None:
        if not token:
            raise ValueError("token must be non-empty")
        table = self.tokens()
        table[principal.name] = token
        body = "".join(f"{name} {tok}\n" for name, tok in sorted(table.items()))
        _atomic_write(self.root / "meta" / "tokens", body.encode("utf-8"))

    # -- objects ------------------------------------------------------------

    def _object_path(self, h: Hash) -> Path:
        return self.root / "objects" / h[:2] / h[2:]

    def has_object(self, h: Hash) -> bool:
        return HASH_RE.fullmatch(h) is not None and self._object_path(h).is_file()


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as e:
        raise StorageFailure(f"write {path}: {e}") from None


def put_object(repo: Repo, kind: str, body: bytes) -> Hash:
    """Store bytes under their digest; idempotent, never rewrites."""
    if kind not in OBJECT_KINDS:
        raise ValueError(f"unknown object kind: {kind!r}")
    blob = f"{kind} {len(body)}\n".encode("utf-8") + body
    h = hashlib.sha256(blob).hexdigest()
    path = repo._object_path(h)
    if not path.exists():
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageFailure(str(e)) from None
        _atomic_write(path, blob)
    return h


def get_object(repo: Repo, h: Hash) -> tuple[str, bytes]:
    """Read an object, re-verifying its digest and header on every read."""
    if not HASH_RE.fullmatch(h):
        raise UnknownObject(f"bad hash: {h!r}")
    path = repo._object_path(h)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise UnknownObject(h) from None
    except OSError as e:
        raise StorageFailure(str(e)) from None
    if hashlib.sha256(blob).hexdigest() != h:
        raise CorruptObject(f"digest mismatch for {h}")
    header, _, body = blob.partition(b"\n")
    try:
        kind, length = header.decode("ascii").split(" ")
        if kind not in OBJECT_KINDS or int(length) != len(body):
            raise ValueError
    except ValueError:
        raise CorruptObject(f"bad header for {h}") from None
    return kind, body


def hash_factset(repo: Repo, fs: Iterable[Quad]) -> Hash:
    """Store a fact set; equal sets hash identically however they were built."""
    return put_object(repo, "factset", canonical_serialize(fs))


def read_commit(repo: Repo, h: Hash) -> Commit:
    kind, body = get_object(repo, h)
    if kind != "commit":
        raise CorruptObject(f"{h} is a {kind}, not a commit")
    return parse_commit(body)


def create_commit(
    repo: Repo,
    parents: Iterable[Hash],
    fs: Iterable[Quad],
    author: Atom,
    message: str,
) -> Hash:
    """Store a new commit over fs; seq = max(parent seq) + 1, 0 for roots.

    Parents are sorted before hashing, so parent order never changes the
    commit identity. No ref is moved.
    """
    parents = sorted(parents)
    if len(set(parents)) != len(parents):
        raise ValueError("duplicate parents")
    max_seq = -1
    for p in parents:
        try:
            parent = read_commit(repo, p)
        except UnknownObject:
            raise UnknownParent(p) from None
        max_seq = max(max_seq, parent.seq)
    tree = hash_factset(repo, fs)
    commit = Commit(tuple(parents), tree, author, max_seq + 1, message)
    return put_object(repo, "commit", serialize_commit(commit))


def resolve_facts(repo: Repo, commit: Hash) -> frozenset:
    """Load the fact set a commit points at."""
    c = read_commit(repo, commit)
    kind, body = get_object(repo, c.tree)
    if kind != "factset":
        raise CorruptObject(f"{c.tree} is a {kind}, not a factset")
    quads = []
    for raw in body.split(b"\n"):
        if not raw:
            continue
        try:
            quads.append(parse_fact_line(raw))
        except MalformedLine as e:
            raise CorruptObject(f"bad fact line in {c.tree}: {e}") from None
    return frozenset(quads)


def _ancestors(repo: Repo, head: Hash) -> dict[Hash, Commit]:
    out: dict[Hash, Commit] = {}
    stack = [head]
    while stack:
        h = stack.pop()
        if h in out:
            continue
        c = read_commit(repo, h)
        out[h] = c
        stack.extend(c.parents)
    return out


def log(repo: Repo, head: Hash) -> list[tuple[Hash, Commit]]:
    """All ancestors of head, children first, each exactly once.

    Sorting by (seq desc, hash asc) is a valid reverse-topological order
    because a child's seq is strictly greater than its parents'.
    """
    found = _ancestors(repo, head)
    return sorted(found.items(), key=lambda item: (-item[1].seq, item[0]))


def merge_base(repo: Repo, a: Hash, b: Hash) -> Optional[Hash]:
    """A lowest common ancestor: max seq among common ancestors, min hash tie."""
    anc_a = _ancestors(repo, a)
    anc_b = _ancestors(repo, b)
    common = [(h, c) for h, c in anc_a.items() if h in anc_b]
    if not common:
        return None
    common.sort(key=lambda item: (-item[1].seq, item[0]))
    return common[0][0]
