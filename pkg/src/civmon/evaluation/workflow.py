"""Evaluation workflow: team assignment, report ownership, decision.

Report access follows a strict matrix: each evaluator writes only the
report they are in charge of, the supervisor reads a report only after
its author shares it, and applicants never see evaluation material.
"""

from __future__ import annotations

from dataclasses import replace
from datetime import datetime
from typing import Optional

from civmon.domain.model import (
    DecisionOutcome,
    EvaluationReport,
    EvaluationTeam,
    FinalDecision,
    Party,
    ReportBody,
    ReportKind,
    Role,
    TeamMember,
    Visibility,
    EXTERNAL_ROLES,
)
from civmon.errors import (
    NotAuthorized,
    NotOwner,
    NotSupervisor,
    ReportsNotShared,
    StaleRevision,
    StoreConflict,
    WrongState,
)
from civmon.export.archival import Signer, render_archival
from civmon.lifecycle import CivState, EventKind, Phase, allowed_actions
from civmon.store.dossiers import DocumentUpload, DossierStore
from civmon.store.enterprise import EnterpriseStore

# kind of report each team seat owns
_SEAT_FOR_KIND = {
    ReportKind.TECHNICAL: Role.TECHNICAL_EVALUATOR,
    ReportKind.MEDICAL: Role.MEDICAL_EVALUATOR,
    ReportKind.FINAL: Role.SUPERVISOR,
}

_ACTIVE_EVALUATION = frozenset({"in-progress", "info-requested", "oriented-toward-denial"})


def _require_internal_actor(enterprise: EnterpriseStore, actor: str, role: Role) -> None:
    if role not in enterprise.roles_of(actor):
        raise NotAuthorized(f"party {actor} holds no {role.value} grant")


def assign_team(
    store: DossierStore,
    enterprise: EnterpriseStore,
    key: str,
    supervisor: str,
    technical: str,
    medical: str,
    actor: str,
    actor_role: Role,
    at: datetime,
) -> EvaluationTeam:
    """Record the evaluation trio and advance the dossier into evaluation."""
    if actor_role not in (Role.ADMINISTRATIVE_SECRETARY, Role.SUPERVISOR):
        raise NotAuthorized("team assignment is reserved to the secretariat or a supervisor")
    _require_internal_actor(enterprise, actor, actor_role)
    state = store.state(key)
    if state != CivState(Phase.SUBMITTED):
        raise WrongState(f"team assignment expects a submitted dossier, found {state.render()}")
    if store.team(key) is not None:
        raise StoreConflict(f"dossier {key} already has an evaluation team")
    for party_id, seat in ((supervisor, Role.SUPERVISOR), (technical, Role.TECHNICAL_EVALUATOR), (medical, Role.MEDICAL_EVALUATOR)):
        if seat not in enterprise.roles_of(party_id):
            raise NotAuthorized(f"party {party_id} holds no {seat.value} grant")
    team = EvaluationTeam(
        supervisor=TeamMember(supervisor, enterprise.party(supervisor).name),
        technical=TeamMember(technical, enterprise.party(technical).name),
        medical=TeamMember(medical, enterprise.party(medical).name),
        assigned_at=at,
    )
    store.apply(key, EventKind.ASSIGN_TEAM, actor=actor, role=actor_role, at=at)
    store.set_team(key, team)
    return team


def _team_or_fail(store: DossierStore, key: str) -> EvaluationTeam:
    team = store.team(key)
    if team is None:
        raise WrongState(f"dossier {key} has no evaluation team yet")
    return team


def _author_for(team: EvaluationTeam, kind: ReportKind) -> TeamMember:
    return {
        ReportKind.TECHNICAL: team.technical,
        ReportKind.MEDICAL: team.medical,
        ReportKind.FINAL: team.supervisor,
    }[kind]


def save_report(
    store: DossierStore,
    key: str,
    kind: ReportKind,
    body: ReportBody,
    actor: str,
    expected_revision: int,
) -> EvaluationReport:
    """Write a report revision; only its author may, only during evaluation."""
    state = store.state(key)
    if state.phase is not Phase.EVALUATION or state.status not in _ACTIVE_EVALUATION:
        raise WrongState(f"reports are editable during evaluation only, found {state.render()}")
    team = _team_or_fail(store, key)
    author = _author_for(team, kind)
    if actor != author.party_id:
        raise NotOwner(f"the {kind.value} report belongs to {author.party_id}")
    current = store.report(key, kind)
    current_revision = current.revision if current else 0
    if expected_revision != current_revision:
        raise StaleRevision(
            f"expected revision {expected_revision}, stored revision is {current_revision}"
        )
    report = EvaluationReport(
        dossier_key=key,
        kind=kind,
        author=actor,
        body=body,
        shared=current.shared if current else False,
        revision=current_revision + 1,
    )
    store.set_report(key, report)
    return report


def share_report(store: DossierStore, key: str, kind: ReportKind, actor: str) -> EvaluationReport:
    """Unlock supervisor read access; one-way and idempotent."""
    team = _team_or_fail(store, key)
    author = _author_for(team, kind)
    if actor != author.party_id:
        raise NotOwner(f"only {author.party_id} may share the {kind.value} report")
    current = store.report(key, kind)
    if current is None:
        raise WrongState(f"no {kind.value} report exists yet")
    if current.shared:
        return current
    shared = replace(current, shared=True)
    store.set_report(key, shared)
    return shared


def can_read_report(
    store: DossierStore,
    key: str,
    kind: ReportKind,
    actor: str,
    actor_roles: frozenset[Role],
) -> tuple[bool, str]:
    """Access matrix for report reads; returns (allowed, reason)."""
    if actor_roles & EXTERNAL_ROLES:
        return False, "applicants never access evaluation reports"
    team = store.team(key)
    if team is None:
        return False, "no evaluation team assigned"
    report = store.report(key, kind)
    if report is None:
        return False, f"no {kind.value} report exists"
    if actor == report.author:
        return True, "author"
    if actor == team.supervisor.party_id:
        if report.shared:
            return True, "shared with the supervisor"
        return False, "report not shared by its author"
    return False, "evaluators access only the report they are in charge of"


def read_report(
    store: DossierStore,
    key: str,
    kind: ReportKind,
    actor: str,
    actor_roles: frozenset[Role],
) -> EvaluationReport:
    allowed, reason = can_read_report(store, key, kind, actor, actor_roles)
    if not allowed:
        raise NotAuthorized(reason)
    report = store.report(key, kind)
    assert report is not None
    return report


def decide(
    store: DossierStore,
    key: str,
    outcome: DecisionOutcome,
    rationale: str,
    actor: str,
    at: datetime,
    signer: Optional[Signer] = None,
    label: Optional[str] = None,
) -> FinalDecision:
    """Supervisor decision: lifecycle event, archival document, outcome notice."""
    team = _team_or_fail(store, key)
    if actor != team.supervisor.party_id:
        raise NotSupervisor("the final decision is reserved to the assigned supervisor")
    kind = EventKind.APPROVE if outcome is DecisionOutcome.APPROVE else EventKind.DENY
    state = store.state(key)
    if kind not in allowed_actions(state, Role.SUPERVISOR):
        raise WrongState(f"cannot {outcome.value} from state {state.render()}")
    for report_kind in (ReportKind.TECHNICAL, ReportKind.MEDICAL):
        report = store.report(key, report_kind)
        if report is None or not report.shared:
            raise ReportsNotShared(f"the {report_kind.value} report must be shared before deciding")
    snapshot = store.snapshot(key)
    if label is None:
        label = "Notification approved" if outcome is DecisionOutcome.APPROVE else "Notification denied"
    document: Optional[DocumentUpload] = None
    if signer is not None:
        archival = render_archival(
            {
                "protocol-code": snapshot.code or snapshot.key,
                "decision": outcome.value,
                "decided-on": at.date().isoformat(),
                "rationale": rationale,
                "supervisor": team.supervisor.name,
            },
            signer,
            title=label,
        )
        document = DocumentUpload(
            content=archival.content,
            media_type="text/plain",
            doc_type="evaluation-outcome",
            label=label,
            visibility=Visibility.PUBLIC,
        )
    # notice first: a denial is terminal and admits no communication after it
    store.open_communication(
        key,
        comm_type="evaluation-outcome",
        body=label,
        actor=actor,
        role=Role.SUPERVISOR,
        at=at,
    )
    store.report_event(
        key,
        kind,
        actor=actor,
        role=Role.SUPERVISOR,
        at=at,
        payload={"outcome": outcome.value, "rationale": rationale},
        document=document,
    )
    decision = FinalDecision(outcome=outcome, rationale=rationale, decided_at=at)
    store.set_decision(key, decision)
    return decision
