"""Submission: authorization, final checks, sealing, code assignment."""

from __future__ import annotations

from datetime import datetime

from civmon.domain.model import Role, Visibility, EXTERNAL_ROLES
from civmon.errors import AlreadySubmitted, IncompleteSubmission, NotAuthorized
from civmon.intake.checks import ValidationReport, check_completeness, check_consistency
from civmon.store.dossiers import DossierStore
from civmon.store.enterprise import EnterpriseStore


def draft_validation(store: DossierStore, key: str) -> ValidationReport:
    """Run both submission gates against the current draft content."""
    snapshot = store.snapshot(key)
    present = (
        d.doc_type for d in snapshot.documents if d.visibility is Visibility.PUBLIC
    )
    return check_completeness(present, store.catalogs).merged(
        check_consistency(snapshot.civ, store.catalogs)
    )


def submit(
    store: DossierStore,
    enterprise: EnterpriseStore,
    key: str,
    actor: str,
    role: Role,
    at: datetime,
) -> str:
    """Seal a complete, consistent draft and return its protocol code."""
    snapshot = store.snapshot(key)
    if snapshot.notification.submitted:
        raise AlreadySubmitted(f"notification {snapshot.code} was already submitted")
    if role not in EXTERNAL_ROLES:
        raise NotAuthorized(f"{role.value} cannot submit a notification")
    if actor != snapshot.applicant.id:
        raise NotAuthorized("only the applicant that initialized the draft may submit it")
    if role not in enterprise.roles_of(actor):
        raise NotAuthorized(f"party {actor} holds no {role.value} grant")
    if role is Role.AUTHORIZED_REPRESENTATIVE:
        if not enterprise.has_valid_delegation(
            delegate=actor, delegator=snapshot.manufacturer.id, when=at.date()
        ):
            raise NotAuthorized(
                "authorized representative needs a delegation valid on the submission date"
            )
    report = draft_validation(store, key)
    if not report.ok:
        raise IncompleteSubmission(report)
    return store.submit(key, actor=actor, role=role, at=at)
