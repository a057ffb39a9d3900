"""Command-line surface: `iv <subcommand>`.

Every subcommand is a thin mapping onto a library operation; the CLI adds
no semantics of its own. Output is one record per line on stdout; errors
go to stderr as `error: <Name>`. Exit codes: 0 success, 1 domain error,
2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import IvError, MalformedQuery, PushRejected
from .model import (
    Atom,
    MapQuery,
    canonical_serialize,
    encode_term,
    parse_fact_line,
    parse_pattern,
    parse_query,
)
from .policy import chain_eval, policy_view, reify_policies
from .query import binding_text, map_delta
from .store import Repo, log as store_log, resolve_facts
from . import sync


class _CliUsage(Exception):
    """Bad invocation detected after argparse (e.g. empty IV_REPO)."""

USAGE_EXIT = 2
ERROR_EXIT = 1


def _repo_flag(sub, required=True):
    sub.add_argument(
        "--repo",
        default=os.environ.get("IV_REPO"),
        help="repository directory (default: $IV_REPO)",
        required=required and "IV_REPO" not in os.environ,
    )


def _credential_flags(sub):
    sub.add_argument("--from", dest="master", required=True, help="master repo path")
    sub.add_argument("--as", dest="principal", required=True, help="acting principal")
    sub.add_argument("--token", required=True, help="authentication token")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iv",
        description="append-only personal-data repository with policy-filtered sharing",
    )
    subs = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = subs.add_parser("init", help="create a master repository")
    p.add_argument("--owner", required=True)
    p.add_argument("dir")

    p = subs.add_parser("add", help="append facts from a file (or - for stdin)")
    _repo_flag(p)
    p.add_argument("--author", required=True)
    p.add_argument("--message", default="add")
    p.add_argument("factfile")

    p = subs.add_parser("grant", help="record a read or write policy")
    _repo_flag(p)
    p.add_argument("--grantee", required=True)
    p.add_argument("--mode", required=True, choices=["read", "write"])
    p.add_argument(
        "--pattern",
        action="append",
        required=True,
        help="triple pattern, e.g. '?s <type> <Photo>' (repeatable)",
    )
    p.add_argument("--message", default=None)

    p = subs.add_parser("token", help="register a principal's token")
    _repo_flag(p)
    p.add_argument("--principal", required=True)
    p.add_argument("--token", required=True)

    p = subs.add_parser("clone", help="clone the permitted view of a master repo")
    p.add_argument("--from", dest="master", required=True)
    p.add_argument("--as", dest="principal", required=True)
    p.add_argument("--token", required=True)
    p.add_argument("dest")

    p = subs.add_parser("pull", help="merge the master's current permitted view")
    _repo_flag(p)
    _credential_flags(p)

    p = subs.add_parser("push", help="send local additions back to the master")
    _repo_flag(p)
    _credential_flags(p)

    p = subs.add_parser("map", help="evaluate a conjunctive query")
    _repo_flag(p)
    p.add_argument("--as", dest="principal", default=None)
    p.add_argument("--select", default=None, help="comma-separated ?vars to project")
    p.add_argument("query")

    p = subs.add_parser("watch", help="bindings added since a commit")
    _repo_flag(p)
    p.add_argument("--as", dest="principal", default=None)
    p.add_argument("--select", default=None)
    p.add_argument("--since", required=True, metavar="COMMIT")
    p.add_argument("query")

    p = subs.add_parser("log", help="list commits reachable from head")
    _repo_flag(p)

    p = subs.add_parser("show", help="dump a commit's facts in canonical form")
    _repo_flag(p)
    p.add_argument("commit")

    p = subs.add_parser("policies", help="list effective policies")
    _repo_flag(p)

    p = subs.add_parser("demo", help="scripted scenario and property suites")
    demo_subs = p.add_subparsers(dest="demo_command", required=True, metavar="which")

    d = demo_subs.add_parser("social", help="multi-principal sharing walkthrough")
    d.add_argument("--workdir", required=True)
    d.add_argument("--followers", default="bob", help="comma-separated names, may be empty")
    d.add_argument("--no-comment-grant", action="store_true")
    d.add_argument("--no-figures", action="store_true")

    d = demo_subs.add_parser("props", help="randomized property suite")
    d.add_argument("--seed", type=int, default=1)
    d.add_argument("--cases", type=int, default=50)
    d.add_argument("--workdir", default=None)
    d.add_argument("--no-figures", action="store_true")

    return parser


def _usage_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return USAGE_EXIT


def _open_repo(args) -> Repo:
    if not getattr(args, "repo", None):
        raise _CliUsage("--repo is required (or set IV_REPO)")
    return Repo.open(args.repo)


def _parse_select(raw, query) -> MapQuery:
    if raw is None:
        return query
    names = []
    for piece in raw.split(","):
        piece = piece.strip()
        if not piece.startswith("?") or len(piece) < 2:
            raise MalformedQuery(f"select entries look like ?name, got {piece!r}")
        names.append(piece[1:])
    return MapQuery(query.patterns, tuple(names))


def _print_bindings(bindings, prefix: str = "") -> None:
    for line in sorted(binding_text(b) for b in bindings):
        print(f"{prefix}{line}")


def cmd_init(args) -> int:
    repo = sync.init(args.dir, Atom(args.owner))
    print(f"head {repo.head()}")
    return 0


def cmd_add(args) -> int:
    repo = _open_repo(args)
    if args.factfile == "-":
        text = sys.stdin.read()
    else:
        text = Path(args.factfile).read_text("utf-8")
    quads = [parse_fact_line(line) for line in text.splitlines() if line.strip()]
    head = sync.add(repo, quads, Atom(args.author), args.message)
    print(f"head {head}")
    return 0


def cmd_grant(args) -> int:
    repo = _open_repo(args)
    patterns = [parse_pattern(text) for text in args.pattern]
    head = sync.grant(repo, Atom(args.grantee), args.mode, patterns, args.message)
    print(f"head {head}")
    return 0


def cmd_token(args) -> int:
    repo = _open_repo(args)
    sync.register_token(repo, Atom(args.principal), args.token)
    print("ok")
    return 0


def cmd_clone(args) -> int:
    master = Repo.open(args.master)
    cred = sync.Credential(Atom(args.principal), args.token)
    dest = sync.clone(master, cred, args.dest)
    head = dest.head()
    print(f"head {head}")
    print(f"quads {len(resolve_facts(dest, head))}")
    return 0


def cmd_pull(args) -> int:
    local = _open_repo(args)
    master = Repo.open(args.master)
    cred = sync.Credential(Atom(args.principal), args.token)
    receipt = sync.pull(local, master, cred)
    print(f"head {receipt.new_head}")
    print(f"quads {receipt.fetched_or_pushed}")
    return 0


def cmd_push(args) -> int:
    local = _open_repo(args)
    master = Repo.open(args.master)
    cred = sync.Credential(Atom(args.principal), args.token)
    receipt = sync.push(local, master, cred)
    print(f"head {receipt.new_head}")
    print(f"quads {receipt.fetched_or_pushed}")
    return 0


def cmd_map(args) -> int:
    repo = _open_repo(args)
    query = _parse_select(args.select, parse_query(args.query))
    principal = Atom(args.principal) if args.principal else repo.owner()
    facts = resolve_facts(repo, repo.head())
    _print_bindings(chain_eval(facts, principal, repo.owner(), query))
    return 0


def cmd_watch(args) -> int:
    repo = _open_repo(args)
    query = _parse_select(args.select, parse_query(args.query))
    principal = Atom(args.principal) if args.principal else repo.owner()
    owner = repo.owner()
    old = policy_view(resolve_facts(repo, args.since), principal, owner)
    new = policy_view(resolve_facts(repo, repo.head()), principal, owner)
    delta = map_delta(old, new, query)
    _print_bindings(delta.added, prefix="+ ")
    _print_bindings(delta.removed, prefix="- ")
    return 0


def cmd_log(args) -> int:
    repo = _open_repo(args)
    for h, commit in store_log(repo, repo.head()):
        msg = commit.message.replace("\\", "\\\\").replace("\n", "\\n")
        print(f"{h} seq={commit.seq} author={commit.author.name} msg={msg}")
    return 0


def cmd_show(args) -> int:
    repo = _open_repo(args)
    facts = resolve_facts(repo, args.commit)
    sys.stdout.buffer.write(canonical_serialize(facts))
    sys.stdout.buffer.flush()
    return 0


def cmd_policies(args) -> int:
    repo = _open_repo(args)
    facts = resolve_facts(repo, repo.head())
    for pol in reify_policies(facts, repo.owner()):
        pats = " ; ".join(
            " ".join(encode_term(t) for t in p.parts()) for p in pol.patterns
        )
        print(
            f"{pol.id.name} grantee={pol.grantee.name} mode={pol.mode} patterns={pats}"
        )
    return 0


def cmd_demo(args) -> int:
    from . import harness

    if args.demo_command == "social":
        followers = tuple(
            name.strip() for name in args.followers.split(",") if name.strip()
        )
        if len(followers) > 2:
            return _usage_error("demo social supports at most 2 followers")
        report = harness.run_social_scenario(
            args.workdir,
            followers=followers,
            comment_write_grant=not args.no_comment_grant,
            figures=not args.no_figures,
        )
    else:
        if args.cases < 1:
            return _usage_error("--cases must be at least 1")
        report = harness.run_property_suite(
            args.seed,
            args.cases,
            workdir=args.workdir,
            figures=not args.no_figures,
        )
    sys.stdout.write(report.to_text())
    return 0


_HANDLERS = {
    "init": cmd_init,
    "add": cmd_add,
    "grant": cmd_grant,
    "token": cmd_token,
    "clone": cmd_clone,
    "pull": cmd_pull,
    "push": cmd_push,
    "map": cmd_map,
    "watch": cmd_watch,
    "log": cmd_log,
    "show": cmd_show,
    "policies": cmd_policies,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except _CliUsage as e:
        return _usage_error(str(e))
    except PushRejected as e:
        print(f"error: PushRejected {len(e.offending)} quads", file=sys.stderr)
        return ERROR_EXIT
    except MalformedQuery:
        print("error: MalformedQuery", file=sys.stderr)
        return USAGE_EXIT
    except IvError as e:
        from .errors import ScenarioFailure, PropertyViolation

        if isinstance(e, (ScenarioFailure, PropertyViolation)) and e.report is not None:
            sys.stdout.write(e.report.to_text())
        print(f"error: {type(e).__name__}", file=sys.stderr)
        return ERROR_EXIT
    except OSError as e:
        print("error: StorageFailure", file=sys.stderr)
        return ERROR_EXIT


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
