"""Event-sourced lifecycle engine with a (state x role x action) guard table.

The transition relation is a flat rule list. Everything else — allowed
actions, permission checks, event application, replay and the exported
matrix — is a pure derivation from that list, so the table stays the
single authority on what may happen when, and by whom.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from civmon.domain.model import Role
from civmon.errors import GuardViolation, TerminalState
from civmon.lifecycle.model import (
    ALL_STATES,
    DRAFT,
    INITIAL_STATE,
    REGISTRATION,
    SUBMITTED,
    TERMINAL_STATES,
    CivState,
    EventKind,
    LifecycleEvent,
    Phase,
)

_APPLICANT = frozenset({Role.MANUFACTURER, Role.AUTHORIZED_REPRESENTATIVE})
_NCA_REVIEWERS = frozenset({Role.SUPERVISOR, Role.TECHNICAL_EVALUATOR, Role.MEDICAL_EVALUATOR})
_ASSIGNERS = frozenset({Role.ADMINISTRATIVE_SECRETARY, Role.SUPERVISOR})
_SUPERVISOR_ONLY = frozenset({Role.SUPERVISOR})
_SECRETARY_ONLY = frozenset({Role.ADMINISTRATIVE_SECRETARY})

_EVAL_IN_PROGRESS = CivState(Phase.EVALUATION, "in-progress")
_EVAL_INFO_REQUESTED = CivState(Phase.EVALUATION, "info-requested")
_EVAL_ORIENTED_DENIAL = CivState(Phase.EVALUATION, "oriented-toward-denial")
_EVAL_APPROVED = CivState(Phase.EVALUATION, "approved")
_EVAL_DENIED = CivState(Phase.EVALUATION, "denied")
_INV_AWAITING = CivState(Phase.INVESTIGATION, "awaiting-start")
_INV_STARTED = CivState(Phase.INVESTIGATION, "started")
_INV_CONCLUDED = CivState(Phase.INVESTIGATION, "concluded")
_INV_CONCLUDED_EARLY = CivState(Phase.INVESTIGATION, "concluded-early")
_CLOSED = CivState(Phase.CLOSED, "notification-concluded")

# (state, event kind, permitted roles, successor state)
#
# Post-approval activity belongs to the investigation phase: an amendment
# filed before the first recruitment moves the dossier to awaiting-start,
# and the start report may fire from either side of that edge.
_RULES: tuple[tuple[CivState, EventKind, frozenset[Role], CivState], ...] = (
    (REGISTRATION, EventKind.REGISTER_APPLICANT, _APPLICANT, REGISTRATION),
    (REGISTRATION, EventKind.GRANT_ACCESS, _SECRETARY_ONLY, REGISTRATION),
    (REGISTRATION, EventKind.INITIALIZE_NOTIFICATION, _APPLICANT, DRAFT),
    (DRAFT, EventKind.SUBMIT_NOTIFICATION, _APPLICANT, SUBMITTED),
    (SUBMITTED, EventKind.ASSIGN_TEAM, _ASSIGNERS, _EVAL_IN_PROGRESS),
    (_EVAL_IN_PROGRESS, EventKind.REQUEST_INFO, _NCA_REVIEWERS, _EVAL_INFO_REQUESTED),
    (_EVAL_IN_PROGRESS, EventKind.PROVIDE_INFO, _APPLICANT, _EVAL_IN_PROGRESS),
    (_EVAL_IN_PROGRESS, EventKind.MARK_ORIENTED_DENIAL, _SUPERVISOR_ONLY, _EVAL_ORIENTED_DENIAL),
    (_EVAL_IN_PROGRESS, EventKind.APPROVE, _SUPERVISOR_ONLY, _EVAL_APPROVED),
    (_EVAL_IN_PROGRESS, EventKind.DENY, _SUPERVISOR_ONLY, _EVAL_DENIED),
    (_EVAL_INFO_REQUESTED, EventKind.PROVIDE_INFO, _APPLICANT, _EVAL_IN_PROGRESS),
    (_EVAL_INFO_REQUESTED, EventKind.REQUEST_INFO, _NCA_REVIEWERS, _EVAL_INFO_REQUESTED),
    (_EVAL_ORIENTED_DENIAL, EventKind.PROVIDE_INFO, _APPLICANT, _EVAL_IN_PROGRESS),
    (_EVAL_ORIENTED_DENIAL, EventKind.REQUEST_INFO, _NCA_REVIEWERS, _EVAL_ORIENTED_DENIAL),
    (_EVAL_ORIENTED_DENIAL, EventKind.APPROVE, _SUPERVISOR_ONLY, _EVAL_APPROVED),
    (_EVAL_ORIENTED_DENIAL, EventKind.DENY, _SUPERVISOR_ONLY, _EVAL_DENIED),
    (_EVAL_APPROVED, EventKind.REPORT_START, _APPLICANT, _INV_STARTED),
    (_EVAL_APPROVED, EventKind.SUBMIT_AMENDMENT, _APPLICANT, _INV_AWAITING),
    (_EVAL_APPROVED, EventKind.REPORT_EARLY_TERMINATION, _APPLICANT, _INV_CONCLUDED_EARLY),
    (_EVAL_APPROVED, EventKind.REQUEST_INFO, _NCA_REVIEWERS, _EVAL_APPROVED),
    (_EVAL_APPROVED, EventKind.PROVIDE_INFO, _APPLICANT, _EVAL_APPROVED),
    (_INV_AWAITING, EventKind.REPORT_START, _APPLICANT, _INV_STARTED),
    (_INV_AWAITING, EventKind.SUBMIT_AMENDMENT, _APPLICANT, _INV_AWAITING),
    (_INV_AWAITING, EventKind.REPORT_EARLY_TERMINATION, _APPLICANT, _INV_CONCLUDED_EARLY),
    (_INV_AWAITING, EventKind.REQUEST_INFO, _NCA_REVIEWERS, _INV_AWAITING),
    (_INV_AWAITING, EventKind.PROVIDE_INFO, _APPLICANT, _INV_AWAITING),
    (_INV_STARTED, EventKind.REPORT_SAE_INITIAL, _APPLICANT, _INV_STARTED),
    (_INV_STARTED, EventKind.REPORT_SAE_FINAL, _APPLICANT, _INV_STARTED),
    (_INV_STARTED, EventKind.SUBMIT_AMENDMENT, _APPLICANT, _INV_STARTED),
    (_INV_STARTED, EventKind.REPORT_END, _APPLICANT, _INV_CONCLUDED),
    (_INV_STARTED, EventKind.REPORT_EARLY_TERMINATION, _APPLICANT, _INV_CONCLUDED_EARLY),
    (_INV_STARTED, EventKind.REQUEST_INFO, _NCA_REVIEWERS, _INV_STARTED),
    (_INV_STARTED, EventKind.PROVIDE_INFO, _APPLICANT, _INV_STARTED),
    (_INV_CONCLUDED, EventKind.REQUEST_INFO, _NCA_REVIEWERS, _INV_CONCLUDED),
    (_INV_CONCLUDED, EventKind.PROVIDE_INFO, _APPLICANT, _INV_CONCLUDED),
    (_INV_CONCLUDED, EventKind.ACCEPT_FINAL_REPORT, _SUPERVISOR_ONLY, _CLOSED),
    (_INV_CONCLUDED_EARLY, EventKind.REQUEST_INFO, _NCA_REVIEWERS, _INV_CONCLUDED_EARLY),
    (_INV_CONCLUDED_EARLY, EventKind.PROVIDE_INFO, _APPLICANT, _INV_CONCLUDED_EARLY),
    (_INV_CONCLUDED_EARLY, EventKind.ACCEPT_FINAL_REPORT, _SUPERVISOR_ONLY, _CLOSED),
)

_TABLE: dict[CivState, dict[EventKind, tuple[frozenset[Role], CivState]]] = {}
for _state, _kind, _roles, _next in _RULES:
    _TABLE.setdefault(_state, {})[_kind] = (_roles, _next)
for _state in ALL_STATES:
    _TABLE.setdefault(_state, {})


@dataclass(frozen=True)
class Transition:
    """Audit record of one applied event."""

    event: LifecycleEvent
    from_state: CivState
    to_state: CivState


@dataclass(frozen=True)
class ReplayResult:
    state: CivState
    audit: tuple[Transition, ...]


@dataclass(frozen=True)
class GuardDecision:
    permitted: bool
    reason: str


def _check_state(state: CivState) -> dict[EventKind, tuple[frozenset[Role], CivState]]:
    # CivState construction already rejects illegal pairs; the lookup is total.
    return _TABLE[state]


def allowed_actions(state: CivState, role: Role) -> frozenset[EventKind]:
    """The exact guard-table row for this state and role."""
    row = _check_state(state)
    return frozenset(kind for kind, (roles, _next) in row.items() if role in roles)


def is_action_permitted(state: CivState, role: Role, kind: EventKind) -> GuardDecision:
    """Decide one action and name the blocking rule on denial."""
    row = _check_state(state)
    entry = row.get(kind)
    if entry is not None and role in entry[0]:
        return GuardDecision(True, f"{kind.value} permitted in {state.render()} for {role.value}")
    if state in TERMINAL_STATES:
        return GuardDecision(False, f"{state.render()} is terminal: no further events")
    if kind is EventKind.SUBMIT_NOTIFICATION and state.phase not in (Phase.REGISTRATION, Phase.DRAFT):
        return GuardDecision(False, "already submitted")
    if entry is not None:
        permitted = ", ".join(sorted(r.value for r in entry[0]))
        return GuardDecision(False, f"{kind.value} in {state.render()} is reserved to: {permitted}")
    return GuardDecision(False, f"{kind.value} is not permitted in state {state.render()}")


def apply_event(state: CivState, event: LifecycleEvent, role: Role) -> Transition:
    """Apply one event, returning the audit record with the successor state."""
    if state in TERMINAL_STATES:
        raise TerminalState(
            f"{state.render()} is terminal: no further events",
            state=state,
            role=role,
            kind=event.kind,
        )
    decision = is_action_permitted(state, role, event.kind)
    if not decision.permitted:
        raise GuardViolation(decision.reason, state=state, role=role, kind=event.kind)
    _roles, successor = _TABLE[state][event.kind]
    return Transition(event=event, from_state=state, to_state=successor)


def replay(events: Sequence[LifecycleEvent], initial: CivState = INITIAL_STATE) -> ReplayResult:
    """Fold apply_event over an ordered event list.

    The first guard violation aborts with the index of the offending
    event attached; same-timestamp neighbours keep their input order.
    """
    state = initial
    audit: list[Transition] = []
    last_at = None
    for index, event in enumerate(events):
        if last_at is not None and event.at < last_at:
            exc = GuardViolation(
                f"event {index} ({event.kind.value}) is timestamped before its predecessor",
                state=state,
                role=event.role,
                kind=event.kind,
            )
            exc.index = index
            raise exc
        try:
            transition = apply_event(state, event, event.role)
        except GuardViolation as exc:
            exc.index = index
            raise
        audit.append(transition)
        state = transition.to_state
        last_at = event.at
    return ReplayResult(state=state, audit=tuple(audit))


def guard_table_rows() -> list[tuple[str, str, tuple[str, ...]]]:
    """Flatten the table to (state, role, sorted event kinds) rows."""
    rows = []
    for state in ALL_STATES:
        for role in Role:
            kinds = tuple(sorted(k.value for k in allowed_actions(state, role)))
            rows.append((state.render(), role.value, kinds))
    return rows


def guard_table_tsv() -> str:
    """Matrix export: `phase:status<TAB>role<TAB>kind,kind,...` per line."""
    lines = ["state\trole\tevents"]
    for state_text, role_text, kinds in guard_table_rows():
        lines.append(f"{state_text}\t{role_text}\t{','.join(kinds)}")
    return "\n".join(lines) + "\n"


def reachable_states(initial: CivState = INITIAL_STATE) -> frozenset[CivState]:
    """All states reachable from `initial` under some role assignment."""
    seen = {initial}
    frontier = [initial]
    while frontier:
        state = frontier.pop()
        for _kind, (_roles, successor) in _TABLE[state].items():
            if successor not in seen:
                seen.add(successor)
                frontier.append(successor)
    return frozenset(seen)


def transitions_from(state: CivState) -> dict[EventKind, tuple[frozenset[Role], CivState]]:
    return dict(_TABLE[state])
