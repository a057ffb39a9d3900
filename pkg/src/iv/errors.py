"""Exception types shared across the package."""

from __future__ import annotations


class IvError(Exception):
    """Base class for every domain error raised by this package."""


class MalformedLine(IvError):
    """A fact line does not follow the canonical grammar."""


class MalformedQuery(IvError):
    """Query text or query structure violates the query grammar."""


class UnboundVariable(IvError):
    """A substitution left a pattern variable without a value."""


class OracleTooLarge(IvError):
    """Input exceeds the brute-force oracle's enumeration guardrail."""


class StorageFailure(IvError):
    """An underlying filesystem operation failed."""


class NotARepository(IvError):
    """The given path does not hold a repository layout."""


class PathNotEmpty(IvError):
    """Refusing to initialize into a non-empty path."""


class UnknownObject(IvError):
    """No object stored under the requested hash."""


class CorruptObject(IvError):
    """Stored bytes do not match their hash or fail to parse."""


class UnknownParent(IvError):
    """A commit references a parent hash that is not in the store."""


class NotOwner(IvError):
    """Operation reserved for the repository owner."""


class AuthFailed(IvError):
    """Credential did not match the repository token table."""


class UnrelatedHistories(IvError):
    """Local repository has no synchronization base for this remote."""


class PushRejected(IvError):
    """A push contained quads the pushing principal may not write.

    The whole push is rejected; `offending` lists the quads that failed
    the write check, in canonical line order.
    """

    def __init__(self, offending):
        self.offending = tuple(offending)
        super().__init__(f"{len(self.offending)} quads rejected")


class ScenarioFailure(IvError):
    """A scripted scenario assertion (or leakage scan) failed."""

    def __init__(self, report, message: str):
        self.report = report
        super().__init__(message)


class PropertyViolation(IvError):
    """A randomized property check found a counterexample."""

    def __init__(self, report, violations):
        self.report = report
        self.violations = tuple(violations)
        detail = self.violations[0] if self.violations else "unknown"
        super().__init__(f"{len(self.violations)} violation(s); first: {detail}")
