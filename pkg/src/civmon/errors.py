"""Exception hierarchy shared by all service modules."""

from __future__ import annotations


class CivmonError(Exception):
    """Base class for every error raised by this package."""


class DomainValidationError(CivmonError):
    """A domain value failed its invariants; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        summary = "; ".join(v.message for v in self.violations) or "invalid value"
        super().__init__(summary)


class GuardViolation(CivmonError):
    """An event kind is not permitted for the current state and role."""

    def __init__(self, reason: str, *, state=None, role=None, kind=None):
        super().__init__(reason)
        self.reason = reason
        self.state = state
        self.role = role
        self.kind = kind
        self.index = None  # position in a replayed event sequence, when known


class TerminalState(GuardViolation):
    """The lifecycle has already reached a terminal state."""


class IllegalState(CivmonError):
    """A (phase, status) pair outside the legal state set."""


class WrongState(CivmonError):
    """Operation invoked while the dossier is in an incompatible state."""


class NotAuthorized(CivmonError):
    """Caller lacks the role, ownership or grant the operation requires."""


class NotOwner(NotAuthorized):
    """Only the owning author may perform this operation."""


class NotSupervisor(NotAuthorized):
    """Reserved to the assigned supervisor."""


class ReportsNotShared(CivmonError):
    """A decision needs both evaluation reports shared first."""


class AlreadySubmitted(CivmonError):
    """The notification was already sealed by a previous submission."""


class SealedNotification(CivmonError):
    """Mutation attempted on a sealed notification."""


class IncompleteSubmission(CivmonError):
    """Submission blocked by completeness or consistency findings."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"submission blocked: {report.describe()}")


class UnknownCatalogCode(CivmonError):
    """A code does not exist in the loaded catalog."""


class UnknownRequest(CivmonError):
    """Reply targets a communication id that does not exist."""


class AlreadyAnswered(CivmonError):
    """The request already has a reply."""


class SameDirection(CivmonError):
    """A reply must flow in the opposite direction of its request."""


class EmptyPayload(CivmonError):
    """Zero-length document content is not storable."""


class MediaTypeNotAllowed(CivmonError):
    """Media type outside the configured allowlist."""


class StaleRevision(CivmonError):
    """Optimistic concurrency check failed: the stored revision moved on."""


class UnknownScheme(CivmonError):
    """Vocabulary scheme is not loaded."""


class SignerUnavailable(CivmonError):
    """Archival rendering requested without a configured signer."""


class SchemaViolation(CivmonError):
    """Serialized dossier does not match the shipped schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class StoreConflict(CivmonError):
    """Store already holds conflicting data (e.g. duplicate registration)."""
