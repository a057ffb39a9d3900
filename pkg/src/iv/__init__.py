"""iv: an append-only, content-addressed personal-data repository.

Facts are (subject, predicate, object, author) quads in a global
information space. Conjunctive queries (map) answer over policy-filtered
views, snapshots are immutable content-addressed commits, and a
git-inspired clone/pull/push protocol shares exactly the permitted view
and nothing else.
"""

from .errors import (
    AuthFailed,
    CorruptObject,
    IvError,
    MalformedLine,
    MalformedQuery,
    NotARepository,
    NotOwner,
    OracleTooLarge,
    PathNotEmpty,
    PropertyViolation,
    PushRejected,
    ScenarioFailure,
    StorageFailure,
    UnboundVariable,
    UnknownObject,
    UnknownParent,
    UnrelatedHistories,
)
from .model import (
    Atom,
    Binding,
    FactSet,
    Literal,
    MapQuery,
    Pattern,
    Quad,
    Variable,
    canonical_serialize,
    encode_term,
    parse_fact_line,
    parse_pattern,
    parse_query,
    parse_term,
    quad_line,
)
from .query import (
    Delta,
    Subscription,
    SessionSubscriptions,
    brute_force_eval,
    eval_map,
    map_delta,
    match_pattern,
    substitute,
)
from .store import (
    Commit,
    Repo,
    create_commit,
    get_object,
    hash_factset,
    log,
    merge_base,
    put_object,
    read_commit,
    resolve_facts,
)
from .policy import (
    AC_PUBLIC,
    Policy,
    SealedView,
    chain_eval,
    permitted_write,
    policy_view,
    reify_policies,
    seal,
)
from .sync import (
    Credential,
    SyncReceipt,
    add,
    authenticate,
    clone,
    grant,
    init,
    merge_factsets,
    pull,
    push,
    register_token,
)
from .harness import (
    CheckResult,
    Scenario,
    ScenarioReport,
    run_property_suite,
    run_scenario,
    run_social_scenario,
    social_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Literal",
    "Variable",
    "Quad",
    "Pattern",
    "MapQuery",
    "Binding",
    "FactSet",
    "Delta",
    "Subscription",
    "SessionSubscriptions",
    "Commit",
    "Repo",
    "Policy",
    "SealedView",
    "Credential",
    "SyncReceipt",
    "Scenario",
    "ScenarioReport",
    "CheckResult",
    "encode_term",
    "quad_line",
    "canonical_serialize",
    "parse_fact_line",
    "parse_term",
    "parse_pattern",
    "parse_query",
    "match_pattern",
    "eval_map",
    "brute_force_eval",
    "map_delta",
    "substitute",
    "put_object",
    "get_object",
    "hash_factset",
    "create_commit",
    "read_commit",
    "resolve_facts",
    "log",
    "merge_base",
    "reify_policies",
    "policy_view",
    "permitted_write",
    "chain_eval",
    "seal",
    "AC_PUBLIC",
    "init",
    "add",
    "grant",
    "register_token",
    "authenticate",
    "clone",
    "pull",
    "push",
    "merge_factsets",
    "run_scenario",
    "social_scenario",
    "run_social_scenario",
    "run_property_suite",
    "IvError",
    "MalformedLine",
    "MalformedQuery",
    "UnboundVariable",
    "OracleTooLarge",
    "StorageFailure",
    "NotARepository",
    "PathNotEmpty",
    "UnknownObject",
    "CorruptObject",
    "UnknownParent",
    "NotOwner",
    "AuthFailed",
    "UnrelatedHistories",
    "PushRejected",
    "ScenarioFailure",
    "PropertyViolation",
    "__version__",
]
