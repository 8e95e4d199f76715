"""Lifecycle states and events of a clinical investigation dossier.

A state is a (phase, status) pair. Early phases carry no status; the
evaluation, investigation and closed phases refine the phase with a
status drawn from a per-phase vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Mapping, Optional

from civmon.domain.model import Role
from civmon.errors import IllegalState


class Phase(str, Enum):
    REGISTRATION = "registration"
    DRAFT = "draft"
    SUBMITTED = "submitted"
    EVALUATION = "evaluation"
    INVESTIGATION = "investigation"
    CLOSED = "closed"


# Status vocabulary per phase. Phases before evaluation are bare.
_STATUSES: dict[Phase, frozenset[Optional[str]]] = {
    Phase.REGISTRATION: frozenset({None}),
    Phase.DRAFT: frozenset({None}),
    Phase.SUBMITTED: frozenset({None}),
    Phase.EVALUATION: frozenset(
        {"in-progress", "info-requested", "oriented-toward-denial", "approved", "denied"}
    ),
    Phase.INVESTIGATION: frozenset({"awaiting-start", "started", "concluded", "concluded-early"}),
    Phase.CLOSED: frozenset({"notification-concluded"}),
}


@dataclass(frozen=True)
class CivState:
    phase: Phase
    status: Optional[str] = None

    def __post_init__(self):
        legal = _STATUSES.get(self.phase)
        if legal is None or self.status not in legal:
            raise IllegalState(f"no legal state {self.phase.value}:{self.status}")

    def render(self) -> str:
        if self.status is None:
            return self.phase.value
        return f"{self.phase.value}:{self.status}"

    @classmethod
    def parse(cls, text: str) -> "CivState":
        phase_text, sep, status = text.partition(":")
        try:
            phase = Phase(phase_text)
        except ValueError:
            raise IllegalState(f"unknown phase {phase_text!r}") from None
        return cls(phase, status if sep else None)

    @property
    def terminal(self) -> bool:
        return self in TERMINAL_STATES


REGISTRATION = CivState(Phase.REGISTRATION)
DRAFT = CivState(Phase.DRAFT)
SUBMITTED = CivState(Phase.SUBMITTED)

# A dossier record begins life as a draft; the registration state exists
# only at the account level, before any dossier is created.
INITIAL_STATE = DRAFT

ALL_STATES: tuple[CivState, ...] = tuple(
    CivState(phase, status) for phase in Phase for status in sorted(_STATUSES[phase], key=lambda s: s or "")
)

TERMINAL_STATES: frozenset[CivState] = frozenset(
    {CivState(Phase.EVALUATION, "denied"), CivState(Phase.CLOSED, "notification-concluded")}
)


class EventKind(str, Enum):
    REGISTER_APPLICANT = "register-applicant"
    GRANT_ACCESS = "grant-access"
    INITIALIZE_NOTIFICATION = "initialize-notification"
    SUBMIT_NOTIFICATION = "submit-notification"
    ASSIGN_TEAM = "assign-team"
    REQUEST_INFO = "request-info"
    PROVIDE_INFO = "provide-info"
    MARK_ORIENTED_DENIAL = "mark-oriented-denial"
    APPROVE = "approve"
    DENY = "deny"
    REPORT_START = "report-start"
    REPORT_END = "report-end"
    REPORT_EARLY_TERMINATION = "report-early-termination"
    SUBMIT_AMENDMENT = "submit-amendment"
    REPORT_SAE_INITIAL = "report-sae-initial"
    REPORT_SAE_FINAL = "report-sae-final"
    ACCEPT_FINAL_REPORT = "accept-final-report"


@dataclass(frozen=True)
class LifecycleEvent:
    kind: EventKind
    actor: str
    role: Role
    at: datetime
    payload: Mapping[str, str] = field(default_factory=dict)
