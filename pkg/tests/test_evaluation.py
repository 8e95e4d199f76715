"""Evaluation workflow: team seats, report ownership matrix, decision."""

import pytest

from civmon.domain.model import (
    ClinicalInvestigation,
    DecisionOutcome,
    InvestigationalDevice,
    InvestigationalSite,
    MedicalDevice,
    Party,
    PartyKind,
    ReportBody,
    ReportKind,
    Role,
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
from civmon.evaluation.workflow import (
    assign_team,
    can_read_report,
    decide,
    read_report,
    save_report,
    share_report,
)
from civmon.export.archival import ArchivalDocument, HmacSigner, verify_archival
from civmon.lifecycle.model import EventKind
from civmon.store.dossiers import DocumentUpload
from civmon.timeutil import utc

REQUIRED = (
    "ethics-committee-opinion",
    "declaration",
    "clinical-protocol",
    "investigator-brochure",
    "risk-analysis",
    "literature-analysis",
    "instructions-for-use",
    "payment-proof",
)


@pytest.fixture
def staff(enterprise):
    """Internal accounts: one secretary, two supervisors, two per evaluator seat."""
    users = {}
    roster = (
        ("sec", Role.ADMINISTRATIVE_SECRETARY),
        ("sup", Role.SUPERVISOR),
        ("sup2", Role.SUPERVISOR),
        ("tech", Role.TECHNICAL_EVALUATOR),
        ("tech2", Role.TECHNICAL_EVALUATOR),
        ("med", Role.MEDICAL_EVALUATOR),
        ("med2", Role.MEDICAL_EVALUATOR),
    )
    for username, role in roster:
        users[username] = enterprise.add_internal_user(
            username, f"{username}-pw", username.upper(), [role]
        ).id
    return users


@pytest.fixture
def submitted(store, enterprise):
    party = enterprise.add_party(
        Party(id="m-1", kind=PartyKind.APPLICANT_ORGANIZATION, name="Acme Devices")
    )
    enterprise.grant(party.id, Role.MANUFACTURER)
    civ = ClinicalInvestigation(
        title="Stent study",
        device=InvestigationalDevice.single(MedicalDevice(name="Stent", risk_class="III")),
        sites=(InvestigationalSite(code="s-1", name="Clinic", country="IT", investigator="P. I."),),
        intended_use="support",
    )
    key = store.create_draft(party, party, Role.MANUFACTURER, civ, actor=party.id, at=utc(2009, 3, 1))
    for doc_type in REQUIRED:
        store.put_document(
            key,
            DocumentUpload(content=doc_type.encode(), doc_type=doc_type),
            actor=party.id,
            role=Role.MANUFACTURER,
            at=utc(2009, 3, 2),
        )
    store.submit(key, actor=party.id, role=Role.MANUFACTURER, at=utc(2009, 3, 5))
    return key


def _assign(store, enterprise, staff, key, at=None):
    return assign_team(
        store,
        enterprise,
        key,
        supervisor=staff["sup"],
        technical=staff["tech"],
        medical=staff["med"],
        actor=staff["sec"],
        actor_role=Role.ADMINISTRATIVE_SECRETARY,
        at=at or utc(2009, 3, 6),
    )


def _body(text="fine"):
    return ReportBody(device_characteristics=text, risk_analysis=text, patient_safety=text)


def _share_both(store, staff, key):
    save_report(store, key, ReportKind.TECHNICAL, _body(), actor=staff["tech"], expected_revision=0)
    save_report(store, key, ReportKind.MEDICAL, _body(), actor=staff["med"], expected_revision=0)
    share_report(store, key, ReportKind.TECHNICAL, actor=staff["tech"])
    share_report(store, key, ReportKind.MEDICAL, actor=staff["med"])


# -- team assignment --------------------------------------------------------


def test_assign_team_moves_to_evaluation(store, enterprise, staff, submitted):
    team = _assign(store, enterprise, staff, submitted)
    assert store.state(submitted).render() == "evaluation:in-progress"
    assert store.team(submitted) == team
    assert team.technical.name == "TECH"


def test_assign_team_requires_secretariat_or_supervisor(store, enterprise, staff, submitted):
    with pytest.raises(NotAuthorized):
        assign_team(
            store, enterprise, submitted,
            supervisor=staff["sup"], technical=staff["tech"], medical=staff["med"],
            actor=staff["tech"], actor_role=Role.TECHNICAL_EVALUATOR, at=utc(2009, 3, 6),
        )


def test_assign_team_checks_seat_grants(store, enterprise, staff, submitted):
    with pytest.raises(NotAuthorized):
        assign_team(
            store, enterprise, submitted,
            supervisor=staff["tech"],  # not a supervisor
            technical=staff["tech"], medical=staff["med"],
            actor=staff["sec"], actor_role=Role.ADMINISTRATIVE_SECRETARY, at=utc(2009, 3, 6),
        )


def test_assign_team_once(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    with pytest.raises(WrongState):
        _assign(store, enterprise, staff, submitted, at=utc(2009, 3, 7))


def test_assign_team_needs_submitted_state(store, enterprise, staff):
    party = Party(id="m-3", kind=PartyKind.APPLICANT_ORGANIZATION, name="Early Bird")
    enterprise.add_party(party)
    enterprise.grant(party.id, Role.MANUFACTURER)
    civ = ClinicalInvestigation(
        title="Draft only",
        device=InvestigationalDevice.single(MedicalDevice(name="Stent", risk_class="III")),
        sites=(InvestigationalSite(code="s-1", name="Clinic", country="IT", investigator="X"),),
        intended_use="support",
    )
    key = store.create_draft(party, party, Role.MANUFACTURER, civ, actor=party.id, at=utc(2009, 3, 1))
    with pytest.raises(WrongState):
        _assign(store, enterprise, staff, key)


# -- report ownership --------------------------------------------------------


def test_author_writes_and_revisions_advance(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    first = save_report(store, submitted, ReportKind.TECHNICAL, _body("v1"), actor=staff["tech"], expected_revision=0)
    assert first.revision == 1
    second = save_report(store, submitted, ReportKind.TECHNICAL, _body("v2"), actor=staff["tech"], expected_revision=1)
    assert second.revision == 2
    assert store.report(submitted, ReportKind.TECHNICAL).body.device_characteristics == "v2"


def test_stale_revision_rejected(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    save_report(store, submitted, ReportKind.TECHNICAL, _body(), actor=staff["tech"], expected_revision=0)
    with pytest.raises(StaleRevision):
        save_report(store, submitted, ReportKind.TECHNICAL, _body("late"), actor=staff["tech"], expected_revision=0)


def test_only_the_seat_owner_writes(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    for intruder in ("med", "sup", "tech2"):
        with pytest.raises(NotOwner):
            save_report(
                store, submitted, ReportKind.TECHNICAL, _body(), actor=staff[intruder], expected_revision=0
            )


def test_reports_locked_outside_active_evaluation(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    _share_both(store, staff, submitted)
    decide(store, submitted, DecisionOutcome.APPROVE, "ok", actor=staff["sup"], at=utc(2009, 4, 1))
    with pytest.raises(WrongState):
        save_report(store, submitted, ReportKind.TECHNICAL, _body("late"), actor=staff["tech"], expected_revision=1)


def test_share_is_one_way_and_idempotent(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    save_report(store, submitted, ReportKind.MEDICAL, _body(), actor=staff["med"], expected_revision=0)
    shared = share_report(store, submitted, ReportKind.MEDICAL, actor=staff["med"])
    assert shared.shared is True
    again = share_report(store, submitted, ReportKind.MEDICAL, actor=staff["med"])
    assert again == shared
    # a later revision keeps the shared flag
    bumped = save_report(store, submitted, ReportKind.MEDICAL, _body("v2"), actor=staff["med"], expected_revision=1)
    assert bumped.shared is True


def test_share_requires_author_and_existing_report(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    with pytest.raises(WrongState):
        share_report(store, submitted, ReportKind.TECHNICAL, actor=staff["tech"])
    save_report(store, submitted, ReportKind.TECHNICAL, _body(), actor=staff["tech"], expected_revision=0)
    with pytest.raises(NotOwner):
        share_report(store, submitted, ReportKind.TECHNICAL, actor=staff["sup"])


# -- read-access matrix --------------------------------------------------------


def test_read_matrix_before_and_after_share(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    save_report(store, submitted, ReportKind.TECHNICAL, _body(), actor=staff["tech"], expected_revision=0)

    # (actor, roles, expected-before-share, expected-after-share)
    matrix = (
        (staff["tech"], frozenset({Role.TECHNICAL_EVALUATOR}), True, True),
        (staff["med"], frozenset({Role.MEDICAL_EVALUATOR}), False, False),
        (staff["tech2"], frozenset({Role.TECHNICAL_EVALUATOR}), False, False),
        (staff["sup"], frozenset({Role.SUPERVISOR}), False, True),
        (staff["sup2"], frozenset({Role.SUPERVISOR}), False, False),
        ("m-1", frozenset({Role.MANUFACTURER}), False, False),
    )
    for actor, roles, before, _ in matrix:
        allowed, _reason = can_read_report(store, submitted, ReportKind.TECHNICAL, actor, roles)
        assert allowed is before, (actor, "before share")
    share_report(store, submitted, ReportKind.TECHNICAL, actor=staff["tech"])
    for actor, roles, _, after in matrix:
        allowed, _reason = can_read_report(store, submitted, ReportKind.TECHNICAL, actor, roles)
        assert allowed is after, (actor, "after share")


def test_read_report_raises_with_reason(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    save_report(store, submitted, ReportKind.TECHNICAL, _body(), actor=staff["tech"], expected_revision=0)
    with pytest.raises(NotAuthorized, match="not shared"):
        read_report(store, submitted, ReportKind.TECHNICAL, staff["sup"], frozenset({Role.SUPERVISOR}))
    with pytest.raises(NotAuthorized, match="applicants never"):
        read_report(store, submitted, ReportKind.TECHNICAL, "m-1", frozenset({Role.MANUFACTURER}))
    report = read_report(store, submitted, ReportKind.TECHNICAL, staff["tech"], frozenset({Role.TECHNICAL_EVALUATOR}))
    assert report.revision == 1


# -- decision ------------------------------------------------------------------


def test_decision_needs_both_reports_shared(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    with pytest.raises(ReportsNotShared):
        decide(store, submitted, DecisionOutcome.APPROVE, "ok", actor=staff["sup"], at=utc(2009, 4, 1))
    save_report(store, submitted, ReportKind.TECHNICAL, _body(), actor=staff["tech"], expected_revision=0)
    share_report(store, submitted, ReportKind.TECHNICAL, actor=staff["tech"])
    save_report(store, submitted, ReportKind.MEDICAL, _body(), actor=staff["med"], expected_revision=0)
    with pytest.raises(ReportsNotShared):
        decide(store, submitted, DecisionOutcome.APPROVE, "ok", actor=staff["sup"], at=utc(2009, 4, 1))
    share_report(store, submitted, ReportKind.MEDICAL, actor=staff["med"])
    decision = decide(store, submitted, DecisionOutcome.APPROVE, "ok", actor=staff["sup"], at=utc(2009, 4, 1))
    assert decision.outcome is DecisionOutcome.APPROVE
    assert store.state(submitted).render() == "evaluation:approved"
    assert store.decision(submitted) == decision


def test_decision_reserved_to_assigned_supervisor(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    _share_both(store, staff, submitted)
    with pytest.raises(NotSupervisor):
        decide(store, submitted, DecisionOutcome.APPROVE, "ok", actor=staff["sup2"], at=utc(2009, 4, 1))
    with pytest.raises(NotSupervisor):
        decide(store, submitted, DecisionOutcome.APPROVE, "ok", actor=staff["tech"], at=utc(2009, 4, 1))


def test_denial_is_terminal_and_still_notifies(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    _share_both(store, staff, submitted)
    decide(
        store, submitted, DecisionOutcome.DENY, "insufficient evidence",
        actor=staff["sup"], at=utc(2009, 4, 1), label="Notifica respinta",
    )
    assert store.state(submitted).render() == "evaluation:denied"
    notices = [
        c for c in store.snapshot(submitted).communications if c.comm_type == "evaluation-outcome"
    ]
    assert [n.body for n in notices] == ["Notifica respinta"]


def test_decide_from_oriented_toward_denial(store, enterprise, staff, submitted):
    _assign(store, enterprise, staff, submitted)
    _share_both(store, staff, submitted)
    store.apply(
        submitted, EventKind.MARK_ORIENTED_DENIAL, actor=staff["sup"], role=Role.SUPERVISOR, at=utc(2009, 3, 20)
    )
    decision = decide(store, submitted, DecisionOutcome.APPROVE, "doubts resolved", actor=staff["sup"], at=utc(2009, 4, 1))
    assert decision.outcome is DecisionOutcome.APPROVE


def test_decision_with_signer_files_signed_outcome(store, enterprise, staff, submitted, signer):
    _assign(store, enterprise, staff, submitted)
    _share_both(store, staff, submitted)
    decide(
        store, submitted, DecisionOutcome.APPROVE, "well supported",
        actor=staff["sup"], at=utc(2009, 4, 1), signer=signer, label="Notifica approvata",
    )
    outcomes = [d for d in store.documents(submitted) if d.doc_type == "evaluation-outcome"]
    assert len(outcomes) == 1
    content = store.blobs.get(outcomes[0].digest)
    text = content.decode("utf-8")
    assert "Notifica approvata" in text
    assert "well supported" in text
    # the render is deterministic, so the detached signature can be
    # recomputed from the stored bytes at any time
    from civmon.export.archival import render_archival

    rendered = render_archival(
        {
            "protocol-code": store.snapshot(submitted).code,
            "decision": "approve",
            "decided-on": "2009-04-01",
            "rationale": "well supported",
            "supervisor": "SUP",
        },
        signer,
        title="Notifica approvata",
    )
    assert rendered.content == content
    assert verify_archival(rendered, signer) is True


def test_archival_verification_and_tamper_detection(signer):
    from civmon.export.archival import render_archival

    document = render_archival({"decision": "approve", "code": "i.5.i.m.2/1/2009"}, signer)
    assert verify_archival(document, signer) is True
    # identical input, identical bytes
    again = render_archival({"decision": "approve", "code": "i.5.i.m.2/1/2009"}, signer)
    assert again.content == document.content
    tampered = ArchivalDocument(
        content=document.content.replace(b"approve", b"deny"),
        source_digest=document.source_digest,
        signature=document.signature,
    )
    assert verify_archival(tampered, signer) is False
    other_key = HmacSigner(b"some-other-key")
    assert verify_archival(document, other_key) is False
