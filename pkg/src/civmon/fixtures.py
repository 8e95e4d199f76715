"""Deterministic store populations for demos, operator seeding and tests.

Three profiles:

* ``fig4``  one dossier whose document timeline and request ledger match
  the reference screenshot of the dossier view, ending in an early
  termination with one unanswered information request.
* ``fig5``  the 2009 cohort behind the reference monitoring search:
  twenty submitted dossiers, four of which are concluded manufacturer
  investigations, plus off-year and off-role distractors.
* ``random``  a reproducible population driven by a seeded RNG walking
  the lifecycle through the public store APIs only.

All profiles drive the same store entry points the HTTP layer uses, so
seeded data is indistinguishable from organically submitted data.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Optional, Sequence

from civmon.domain.model import (
    ClinicalInvestigation,
    ComparatorProduct,
    Delegation,
    DecisionOutcome,
    InvestigationalDevice,
    InvestigationalSite,
    MedicalDevice,
    Party,
    PartyKind,
    ReportBody,
    ReportKind,
    Role,
    StudyDesign,
)
from civmon.evaluation.workflow import assign_team, decide, save_report, share_report
from civmon.export.archival import HmacSigner
from civmon.intake.submission import submit
from civmon.lifecycle.model import EventKind
from civmon.store.dossiers import DocumentUpload, DossierStore
from civmon.store.enterprise import EnterpriseStore
from civmon.timeutil import utc

# Internal accounts provisioned by every profile. Initials match the
# evaluator facet of the reference search view.
INTERNAL_USERS: tuple[tuple[str, str, str, Role], ...] = (
    ("secretary", "secretary-pw", "R. Secchi", Role.ADMINISTRATIVE_SECRETARY),
    ("supervisor", "supervisor-pw", "S. Viola", Role.SUPERVISOR),
    ("tech1", "tech1-pw", "A. B.", Role.TECHNICAL_EVALUATOR),
    ("tech2", "tech2-pw", "C. D.", Role.TECHNICAL_EVALUATOR),
    ("tech3", "tech3-pw", "E. F.", Role.TECHNICAL_EVALUATOR),
    ("med1", "med1-pw", "I. L.", Role.MEDICAL_EVALUATOR),
    ("med2", "med2-pw", "M. N.", Role.MEDICAL_EVALUATOR),
    ("med3", "med3-pw", "G. H.", Role.MEDICAL_EVALUATOR),
)

# Fig. 4 upper table: label of each submission attachment by doc type.
FIG4_ATTACHMENTS: tuple[tuple[str, str], ...] = (
    ("ethics-committee-opinion", "Parere comitato etico"),
    ("declaration", "Dichiarazione.pdf"),
    ("clinical-protocol", "Protocollo clinico ver.1.pdf"),
    ("investigator-brochure", "Brochure.pdf"),
    ("risk-analysis", "Analisi rischi.pdf"),
    ("literature-analysis", "Analisi letteratura.pdf"),
    ("instructions-for-use", "Istruzioni uso.pdf"),
    ("payment-proof", "Versamento.pdf"),
)


@dataclass
class SeedUsers:
    """Party handles for the provisioned internal accounts."""

    secretary: Party
    supervisor: Party
    technical: dict[str, Party]  # keyed by display name
    medical: dict[str, Party]


def seed_internal_users(enterprise: EnterpriseStore) -> SeedUsers:
    technical: dict[str, Party] = {}
    medical: dict[str, Party] = {}
    secretary = supervisor = None
    for username, secret, name, role in INTERNAL_USERS:
        party = enterprise.add_internal_user(username, secret, name, {role})
        if role is Role.ADMINISTRATIVE_SECRETARY:
            secretary = party
        elif role is Role.SUPERVISOR:
            supervisor = party
        elif role is Role.TECHNICAL_EVALUATOR:
            technical[name] = party
        else:
            medical[name] = party
    return SeedUsers(secretary=secretary, supervisor=supervisor, technical=technical, medical=medical)


def _applicant(
    enterprise: EnterpriseStore,
    name: str,
    role: Role,
    delegator: Optional[Party] = None,
) -> Party:
    party = enterprise.add_party(
        Party(id=enterprise.next_party_id(), name=name, kind=PartyKind.APPLICANT_ORGANIZATION, country="IT")
    )
    enterprise.grant(party.id, {role})
    if role is Role.AUTHORIZED_REPRESENTATIVE and delegator is not None:
        enterprise.add_delegation(
            Delegation(
                delegator=delegator.id,
                delegate=party.id,
                valid_from=date(2008, 1, 1),
                valid_to=date(2030, 12, 31),
            )
        )
    return party


def _pdf(text: str) -> bytes:
    return f"%PDF-1.4 {text}".encode("utf-8")


def _upload_required(store: DossierStore, key: str, actor: str, role: Role, at: datetime) -> None:
    for doc_type, label in FIG4_ATTACHMENTS:
        store.put_document(
            key,
            DocumentUpload(content=_pdf(f"{key} {doc_type}"), doc_type=doc_type, label=label),
            actor=actor,
            role=role,
            at=at,
        )


def _stent_civ(title: str, **extra) -> ClinicalInvestigation:
    device = InvestigationalDevice.single(
        MedicalDevice(
            name=extra.pop("device_name", "Coronary stent"),
            risk_class=extra.pop("risk_class", "III"),
            classification_code=extra.pop("classification_code", "C0201"),
            anatomical_location=extra.pop("anatomical_location", "A07.231.114.207"),
            characteristics=extra.pop("characteristics", frozenset({"single-use"})),
        )
    )
    return ClinicalInvestigation(
        title=title,
        device=device,
        sites=extra.pop(
            "sites",
            (InvestigationalSite(code="site-1", name="Policlinico Centrale", country="IT", investigator="P. I."),),
        ),
        intended_use=extra.pop("intended_use", "coronary artery support"),
        design=extra.pop("design", StudyDesign.RANDOMIZED_DOUBLE_BLIND),
        population=extra.pop("population", frozenset({"adults"})),
        multi_centric=extra.pop("multi_centric", False),
        application_field=extra.pop("application_field", "Cardiosurgery"),
        comparator=extra.pop("comparator", None),
        **extra,
    )


# -- fig4 ---------------------------------------------------------------


def seed_fig4(
    enterprise: EnterpriseStore,
    store: DossierStore,
    users: Optional[SeedUsers] = None,
    signer: Optional[HmacSigner] = None,
) -> str:
    """One dossier matching the reference timeline; returns its code."""
    users = users or seed_internal_users(enterprise)
    signer = signer or HmacSigner(b"fixture-signing-key")
    applicant = _applicant(enterprise, "Medica Italiana S.p.A.", Role.MANUFACTURER)

    civ = _stent_civ("Percutaneous valve pilot study", design=StudyDesign.NON_RANDOMIZED)
    key = store.create_draft(
        applicant,
        applicant,
        Role.MANUFACTURER,
        civ,
        form_data={"contact": "trials@medicaitaliana.it"},
        actor=applicant.id,
        at=utc(2009, 10, 1, 9, 0),
    )
    _upload_required(store, key, applicant.id, Role.MANUFACTURER, utc(2009, 10, 2, 10, 0))

    # the reference dossier is the 6th notification of 2009
    store.reserve_code_seqs(2009, 5)
    submit(store, enterprise, key, actor=applicant.id, role=Role.MANUFACTURER, at=utc(2009, 10, 8, 9, 0))

    assign_team(
        store,
        enterprise,
        key,
        supervisor=users.supervisor.id,
        technical=users.technical["A. B."].id,
        medical=users.medical["I. L."].id,
        actor=users.secretary.id,
        actor_role=Role.ADMINISTRATIVE_SECRETARY,
        at=utc(2009, 10, 12, 9, 0),
    )
    request = store.open_communication(
        key,
        "info-request",
        "Delucidazioni su Analisi dei rischi",
        actor=users.supervisor.id,
        role=Role.SUPERVISOR,
        at=utc(2009, 10, 20, 9, 0),
    )
    store.reply(
        request.id,
        "Delucidazioni su Analisi dei rischi",
        actor=applicant.id,
        role=Role.MANUFACTURER,
        at=utc(2009, 10, 23, 9, 0),
        attachments=(DocumentUpload(content=_pdf("clarifications"), label="Documento di delucidazioni"),),
    )
    save_report(
        store,
        key,
        ReportKind.TECHNICAL,
        ReportBody(device_characteristics="conforms", risk_analysis="acceptable"),
        actor=users.technical["A. B."].id,
        expected_revision=0,
    )
    share_report(store, key, ReportKind.TECHNICAL, actor=users.technical["A. B."].id)
    save_report(
        store,
        key,
        ReportKind.MEDICAL,
        ReportBody(patient_safety="no objection"),
        actor=users.medical["I. L."].id,
        expected_revision=0,
    )
    share_report(store, key, ReportKind.MEDICAL, actor=users.medical["I. L."].id)
    decide(
        store,
        key,
        DecisionOutcome.APPROVE,
        rationale="requirements satisfied",
        actor=users.supervisor.id,
        at=utc(2009, 12, 1, 9, 0),
        signer=signer,
        label="Notifica approvata",
    )
    store.report_event(
        key,
        EventKind.REPORT_START,
        actor=applicant.id,
        role=Role.MANUFACTURER,
        at=utc(2009, 12, 20, 9, 0),
        document=DocumentUpload(content=_pdf("start"), label="Inizio sperimentazione"),
    )
    store.report_event(
        key,
        EventKind.REPORT_SAE_INITIAL,
        actor=applicant.id,
        role=Role.MANUFACTURER,
        at=utc(2010, 5, 2, 9, 0),
        payload={"seq": "1", "narrative": "first adverse event"},
        document=DocumentUpload(content=_pdf("sae 1 initial"), label="Evento avverso iniziale 1"),
    )
    store.report_event(
        key,
        EventKind.REPORT_SAE_INITIAL,
        actor=applicant.id,
        role=Role.MANUFACTURER,
        at=utc(2010, 5, 5, 9, 0),
        payload={"seq": "2", "narrative": "second adverse event"},
        document=DocumentUpload(content=_pdf("sae 2 initial"), label="Evento avverso iniziale 2"),
    )
    store.report_event(
        key,
        EventKind.REPORT_SAE_FINAL,
        actor=applicant.id,
        role=Role.MANUFACTURER,
        at=utc(2010, 5, 5, 9, 0),
        payload={"seq": "2", "narrative": "second adverse event resolved", "final_for": "2"},
        document=DocumentUpload(content=_pdf("sae 2 final"), label="Evento avverso finale 2"),
    )
    store.report_event(
        key,
        EventKind.REPORT_EARLY_TERMINATION,
        actor=applicant.id,
        role=Role.MANUFACTURER,
        at=utc(2010, 5, 9, 9, 0),
        document=DocumentUpload(content=_pdf("early end"), label="Conclusione anticipata"),
    )
    store.open_communication(
        key,
        "info-request",
        "Motivazioni conclusione anticipata",
        actor=users.supervisor.id,
        role=Role.SUPERVISOR,
        at=utc(2010, 5, 9, 10, 0),
    )
    store.save()
    enterprise.save()
    return store.snapshot(key).code


# -- fig5 ---------------------------------------------------------------


@dataclass(frozen=True)
class _Fig5Row:
    title: str
    company: str
    role: Role
    submitted: datetime
    deadline: Optional[date]
    team: Optional[tuple[str, str]]  # technical name, medical name
    target_state: str
    civ_kwargs: dict


def _fig5_rows() -> list[_Fig5Row]:
    """The 2009 cohort in submission order; list position fixes the code seq.

    Rows 1, 3, 8 and 20 are the reference search hits (manufacturer,
    2009, investigation concluded). Every other row misses at least one
    of those three filters.
    """
    r = []

    def row(title, company, submitted, state, team=None, deadline=None, role=Role.MANUFACTURER, **kw):
        r.append(_Fig5Row(title, company, role, submitted, deadline, team, state, kw))

    row(
        "Stent efficacy: a controlled clinical trial",
        "Devices & Co.",
        utc(2009, 2, 7, 9, 0),
        "investigation:concluded",
        team=("A. B.", "I. L."),
        deadline=date(2009, 4, 1),
    )
    row("Peripheral stent registry", "Devices & Co.", utc(2009, 2, 10, 9, 0), "submitted")
    row(
        "Stent investigation in over eighty patients",
        "Drug & Devices S.r.l.",
        utc(2009, 2, 20, 9, 0),
        "investigation:concluded",
        team=("C. D.", "M. N."),
        deadline=date(2009, 4, 10),
        population=frozenset({"over-eighty"}),
    )
    row(
        "Valve delegation study",
        "Rappresentanze Mediche S.r.l.",
        utc(2009, 2, 25, 9, 0),
        "investigation:concluded",
        team=("C. D.", "I. L."),
        role=Role.AUTHORIZED_REPRESENTATIVE,
    )
    row("Catheter handling study", "Alpha Medica", utc(2009, 3, 1, 9, 0), "evaluation:in-progress", team=("A. B.", "M. N."))
    row("Imaging comparative study", "Beta Diagnostics", utc(2009, 3, 5, 9, 0), "evaluation:denied", team=("C. D.", "G. H."))
    row("Pacemaker follow-up", "Gamma Impianti", utc(2009, 3, 10, 9, 0), "investigation:started", team=("E. F.", "I. L."))
    row(
        "Comparison study for palliative treatments",
        "Devices Inc.",
        utc(2009, 3, 12, 9, 0),
        "investigation:concluded",
        team=("E. F.", "G. H."),
        deadline=date(2009, 5, 1),
        comparator=ComparatorProduct(
            device=MedicalDevice(name="Marketed palliative device", risk_class="IIb")
        ),
        design=StudyDesign.RANDOMIZED_OPEN,
    )
    row(
        "Laparoscopic closure study",
        "Alpha Medica",
        utc(2009, 3, 20, 9, 0),
        "closed:notification-concluded",
        team=("A. B.", "I. L."),
    )
    row(
        "Stent comparison abroad",
        "Rappresentanze Mediche S.r.l.",
        utc(2009, 4, 1, 9, 0),
        "investigation:started",
        team=("C. D.", "M. N."),
        role=Role.AUTHORIZED_REPRESENTATIVE,
    )
    row("Dental arch survey", "Gamma Impianti", utc(2009, 4, 15, 9, 0), "evaluation:approved", team=("E. F.", "M. N."))
    row(
        "Defibrillator stress study",
        "Beta Diagnostics",
        utc(2009, 5, 1, 9, 0),
        "investigation:concluded-early",
        team=("A. B.", "G. H."),
    )
    row("Skeleton imaging pilot", "Alpha Medica", utc(2009, 5, 20, 9, 0), "evaluation:info-requested", team=("C. D.", "I. L."))
    row(
        "Prosthesis wear study",
        "Rappresentanze Mediche S.r.l.",
        utc(2009, 6, 1, 9, 0),
        "submitted",
        role=Role.AUTHORIZED_REPRESENTATIVE,
    )
    row("Amended protocol study", "Gamma Impianti", utc(2009, 6, 15, 9, 0), "investigation:awaiting-start", team=("E. F.", "I. L."))
    row("Eye pressure monitor study", "Beta Diagnostics", utc(2009, 7, 1, 9, 0), "evaluation:oriented-toward-denial", team=("A. B.", "M. N."))
    row("Heart valve coating study", "Alpha Medica", utc(2009, 8, 1, 9, 0), "investigation:started", team=("C. D.", "G. H."))
    row(
        "Tooth implant surface study",
        "Rappresentanze Mediche S.r.l.",
        utc(2009, 9, 1, 9, 0),
        "investigation:concluded-early",
        team=("E. F.", "M. N."),
        role=Role.AUTHORIZED_REPRESENTATIVE,
    )
    row("Vascular imaging registry", "Gamma Impianti", utc(2009, 9, 15, 9, 0), "evaluation:in-progress", team=("A. B.", "I. L."))
    row(
        "Dental device XXX",
        "Stent S.r.l.",
        utc(2009, 10, 1, 9, 0),
        "investigation:concluded",
        team=("A. B.", "M. N."),
        deadline=date(2009, 11, 10),
        device_name="Dental implant XXX",
        risk_class="IIb",
        classification_code="Q01",
        anatomical_location="A14.254.646",
        application_field="Dental surgery",
    )
    return r


# off-year distractors: concluded manufacturer dossiers outside 2009
_FIG5_2010_ROWS = (
    ("Stent follow-up cohort", "Devices & Co.", utc(2010, 1, 10, 9, 0), "investigation:concluded", ("A. B.", "I. L.")),
    ("Catheter second wave", "Alpha Medica", utc(2010, 2, 1, 9, 0), "investigation:started", ("C. D.", "M. N.")),
)


def seed_fig5(
    enterprise: EnterpriseStore,
    store: DossierStore,
    users: Optional[SeedUsers] = None,
    signer: Optional[HmacSigner] = None,
) -> list[str]:
    """The 2009 search cohort; returns the four reference codes."""
    users = users or seed_internal_users(enterprise)
    signer = signer or HmacSigner(b"fixture-signing-key")
    manufacturers: dict[str, Party] = {}
    representatives: dict[str, Party] = {}

    def applicant_for(row_company: str, role: Role) -> Party:
        pool = representatives if role is Role.AUTHORIZED_REPRESENTATIVE else manufacturers
        if row_company not in pool:
            if role is Role.AUTHORIZED_REPRESENTATIVE:
                delegator = _applicant(enterprise, row_company + " (delegating manufacturer)", Role.MANUFACTURER)
                pool[row_company] = _applicant(enterprise, row_company, role, delegator=delegator)
            else:
                pool[row_company] = _applicant(enterprise, row_company, role)
        return pool[row_company]

    targets: list[str] = []
    rows = _fig5_rows()
    for row in rows:
        code = _seed_fig5_row(enterprise, store, users, signer, row, applicant_for)
        if row.target_state == "investigation:concluded" and row.role is Role.MANUFACTURER and row.submitted.year == 2009:
            targets.append(code)
    for title, company, submitted, state, team in _FIG5_2010_ROWS:
        extra = _Fig5Row(title, company, Role.MANUFACTURER, submitted, None, team, state, {})
        _seed_fig5_row(enterprise, store, users, signer, extra, applicant_for)
    store.save()
    enterprise.save()
    return targets


def _seed_fig5_row(enterprise, store, users, signer, row: _Fig5Row, applicant_for) -> str:
    applicant = applicant_for(row.company, row.role)
    manufacturer = applicant
    if row.role is Role.AUTHORIZED_REPRESENTATIVE:
        delegations = [d for d in enterprise.delegations() if d.delegate == applicant.id]
        manufacturer = enterprise.party(delegations[0].delegator)
    civ = _stent_civ(row.title, **dict(row.civ_kwargs))
    draft_at = row.submitted - timedelta(days=5)
    key = store.create_draft(
        applicant,
        manufacturer,
        row.role,
        civ,
        form_data={"company": row.company},
        actor=applicant.id,
        at=draft_at,
        expected_deadline=row.deadline,
    )
    _upload_required(store, key, applicant.id, row.role, draft_at + timedelta(days=1))
    submit(store, enterprise, key, actor=applicant.id, role=row.role, at=row.submitted)
    _drive_to_state(store, enterprise, users, signer, key, row, applicant)
    return store.snapshot(key).code


def _drive_to_state(store, enterprise, users, signer, key: str, row: _Fig5Row, applicant: Party) -> None:
    """Advance a freshly submitted dossier to the row's target state."""
    state = row.target_state
    if state == "submitted":
        return
    tech_name, med_name = row.team if row.team else ("A. B.", "I. L.")
    technical = users.technical[tech_name]
    medical = users.medical[med_name]
    t = row.submitted
    step = timedelta(days=3)

    def tick() -> datetime:
        nonlocal t
        t = t + step
        return t

    assign_team(
        store,
        enterprise,
        key,
        supervisor=users.supervisor.id,
        technical=technical.id,
        medical=medical.id,
        actor=users.secretary.id,
        actor_role=Role.ADMINISTRATIVE_SECRETARY,
        at=tick(),
    )
    if state == "evaluation:in-progress":
        return
    if state == "evaluation:info-requested":
        store.open_communication(
            key, "info-request", "Ulteriori informazioni", actor=users.supervisor.id, role=Role.SUPERVISOR, at=tick()
        )
        return
    if state == "evaluation:oriented-toward-denial":
        store.apply(key, EventKind.MARK_ORIENTED_DENIAL, actor=users.supervisor.id, role=Role.SUPERVISOR, at=tick())
        return
    # every remaining target passes through a final decision
    save_report(
        store, key, ReportKind.TECHNICAL, ReportBody(device_characteristics="reviewed"), actor=technical.id, expected_revision=0
    )
    share_report(store, key, ReportKind.TECHNICAL, actor=technical.id)
    save_report(store, key, ReportKind.MEDICAL, ReportBody(patient_safety="reviewed"), actor=medical.id, expected_revision=0)
    share_report(store, key, ReportKind.MEDICAL, actor=medical.id)
    if state == "evaluation:denied":
        decide(
            store,
            key,
            DecisionOutcome.DENY,
            rationale="requirements not met",
            actor=users.supervisor.id,
            at=tick(),
            signer=signer,
            label="Notifica respinta",
        )
        return
    decide(
        store,
        key,
        DecisionOutcome.APPROVE,
        rationale="requirements satisfied",
        actor=users.supervisor.id,
        at=tick(),
        signer=signer,
        label="Notifica approvata",
    )
    if state == "evaluation:approved":
        return
    if state == "investigation:awaiting-start":
        store.report_event(
            key,
            EventKind.SUBMIT_AMENDMENT,
            actor=applicant.id,
            role=row.role,
            at=tick(),
            payload={"summary": "protocol amendment"},
            document=DocumentUpload(content=_pdf("amendment"), doc_type="clinical-protocol", label="Protocollo emendato"),
        )
        return
    store.report_event(
        key,
        EventKind.REPORT_START,
        actor=applicant.id,
        role=row.role,
        at=tick(),
        document=DocumentUpload(content=_pdf("start"), label="Inizio sperimentazione"),
    )
    if state == "investigation:started":
        return
    if state == "investigation:concluded-early":
        store.report_event(
            key,
            EventKind.REPORT_EARLY_TERMINATION,
            actor=applicant.id,
            role=row.role,
            at=tick(),
            document=DocumentUpload(content=_pdf("early end"), label="Conclusione anticipata"),
        )
        return
    store.report_event(
        key,
        EventKind.REPORT_END,
        actor=applicant.id,
        role=row.role,
        at=tick(),
        document=DocumentUpload(content=_pdf("end"), label="Fine sperimentazione.pdf"),
    )
    if state == "investigation:concluded":
        return
    if state == "closed:notification-concluded":
        store.apply(key, EventKind.ACCEPT_FINAL_REPORT, actor=users.supervisor.id, role=Role.SUPERVISOR, at=tick())
        return
    raise ValueError(f"fixture cannot reach state {state!r}")


# -- random profile -------------------------------------------------------


_RANDOM_FIELDS = ("Cardiosurgery", "Dental surgery", "Thoracic surgery", "Imaging")
_RANDOM_CHARACTERISTICS = ("single-use", "software-driven", "animal-tissue", "implantable")
_RANDOM_POPS = ("adults", "children", "in-hospital", "healthy-volunteers")
_RANDOM_LOCATIONS = ("A07.231.114.207", "A07.541", "A14.254.646", "A02.835", "A09.371")
_RANDOM_CODES = ("C0101", "C0201", "C0202", "J01", "K01", "P09", "Q01", "Z11")


def seed_random(
    enterprise: EnterpriseStore,
    store: DossierStore,
    n: int,
    seed: int,
    users: Optional[SeedUsers] = None,
    signer: Optional[HmacSigner] = None,
) -> list[str]:
    """Reproducible population of n dossiers; returns their keys."""
    users = users or seed_internal_users(enterprise)
    signer = signer or HmacSigner(b"fixture-signing-key")
    rng = random.Random(seed)
    risk_classes = sorted(store.catalogs.risk_classes)
    evaluator_names = sorted(users.technical), sorted(users.medical)
    manufacturers = [
        _applicant(enterprise, f"Random Devices {i} S.p.A.", Role.MANUFACTURER) for i in range(1, 6)
    ]
    t = utc(2009, 1, 5, 8, 0)

    def tick() -> datetime:
        nonlocal t
        t = t + timedelta(hours=1)
        return t

    keys: list[str] = []
    for i in range(n):
        applicant = rng.choice(manufacturers)
        variant = rng.random() < 0.25
        if variant:
            items = tuple(
                MedicalDevice(
                    name=f"Kit device {i}.{j}",
                    risk_class=rng.choice(risk_classes),
                    classification_code=rng.choice(_RANDOM_CODES),
                    anatomical_location=rng.choice(_RANDOM_LOCATIONS),
                    characteristics=frozenset(rng.sample(_RANDOM_CHARACTERISTICS, rng.randint(0, 2))),
                )
                for j in range(rng.randint(1, 3))
            )
            device = InvestigationalDevice.kit(items)
        else:
            device = InvestigationalDevice.single(
                MedicalDevice(
                    name=f"Device {i}",
                    risk_class=rng.choice(risk_classes),
                    classification_code=rng.choice(_RANDOM_CODES),
                    anatomical_location=rng.choice(_RANDOM_LOCATIONS),
                    characteristics=frozenset(rng.sample(_RANDOM_CHARACTERISTICS, rng.randint(0, 2))),
                )
            )
        sites = tuple(
            InvestigationalSite(code=f"site-{i}-{s}", name=f"Site {i}.{s}", country=rng.choice(("IT", "FR", "DE")), investigator=f"Inv {s}")
            for s in range(rng.randint(1, 3))
        )
        civ = ClinicalInvestigation(
            title=f"Random study {i}",
            device=device,
            sites=sites,
            intended_use="investigational use",
            design=rng.choice(tuple(StudyDesign)),
            population=frozenset(rng.sample(_RANDOM_POPS, rng.randint(1, 2))),
            multi_centric=len(sites) > 1,
            application_field=rng.choice(_RANDOM_FIELDS),
        )
        key = store.create_draft(
            applicant, applicant, Role.MANUFACTURER, civ, form_data={}, actor=applicant.id, at=tick()
        )
        keys.append(key)
        if rng.random() < 0.1:
            continue  # stays a draft
        _upload_required(store, key, applicant.id, Role.MANUFACTURER, tick())
        submit(store, enterprise, key, actor=applicant.id, role=Role.MANUFACTURER, at=tick())
        depth = rng.randint(0, 6)
        if depth == 0:
            continue
        tech = users.technical[rng.choice(evaluator_names[0])]
        med = users.medical[rng.choice(evaluator_names[1])]
        assign_team(
            store,
            enterprise,
            key,
            supervisor=users.supervisor.id,
            technical=tech.id,
            medical=med.id,
            actor=users.secretary.id,
            actor_role=Role.ADMINISTRATIVE_SECRETARY,
            at=tick(),
        )
        if depth <= 1:
            continue
        if rng.random() < 0.3:
            request = store.open_communication(
                key, "info-request", f"Request {i}", actor=users.supervisor.id, role=Role.SUPERVISOR, at=tick()
            )
            if rng.random() < 0.7:
                store.reply(request.id, f"Response {i}", actor=applicant.id, role=Role.MANUFACTURER, at=tick())
            else:
                continue  # leave the request open
        if depth <= 2:
            continue
        save_report(store, key, ReportKind.TECHNICAL, ReportBody(device_characteristics="ok"), actor=tech.id, expected_revision=0)
        share_report(store, key, ReportKind.TECHNICAL, actor=tech.id)
        save_report(store, key, ReportKind.MEDICAL, ReportBody(patient_safety="ok"), actor=med.id, expected_revision=0)
        share_report(store, key, ReportKind.MEDICAL, actor=med.id)
        outcome = DecisionOutcome.DENY if rng.random() < 0.15 else DecisionOutcome.APPROVE
        decide(
            store,
            key,
            outcome,
            rationale="fixture decision",
            actor=users.supervisor.id,
            at=tick(),
            signer=signer,
            label="Notifica approvata" if outcome is DecisionOutcome.APPROVE else "Notifica respinta",
        )
        if outcome is DecisionOutcome.DENY or depth <= 3:
            continue
        store.report_event(
            key,
            EventKind.REPORT_START,
            actor=applicant.id,
            role=Role.MANUFACTURER,
            at=tick(),
            document=DocumentUpload(content=_pdf("start"), label="Inizio sperimentazione"),
        )
        if depth <= 4:
            continue
        for sae_seq in range(1, rng.randint(0, 2) + 1):
            store.report_event(
                key,
                EventKind.REPORT_SAE_INITIAL,
                actor=applicant.id,
                role=Role.MANUFACTURER,
                at=tick(),
                payload={"seq": str(sae_seq), "narrative": f"event {sae_seq}"},
                document=DocumentUpload(content=_pdf(f"sae {sae_seq}"), label=f"Evento avverso iniziale {sae_seq}"),
            )
        if rng.random() < 0.5:
            store.report_event(
                key,
                EventKind.REPORT_END,
                actor=applicant.id,
                role=Role.MANUFACTURER,
                at=tick(),
                document=DocumentUpload(content=_pdf("end"), label="Fine sperimentazione.pdf"),
            )
        else:
            store.report_event(
                key,
                EventKind.REPORT_EARLY_TERMINATION,
                actor=applicant.id,
                role=Role.MANUFACTURER,
                at=tick(),
                document=DocumentUpload(content=_pdf("early end"), label="Conclusione anticipata"),
            )
        if depth <= 5:
            continue
        store.apply(key, EventKind.ACCEPT_FINAL_REPORT, actor=users.supervisor.id, role=Role.SUPERVISOR, at=tick())
    store.save()
    enterprise.save()
    return keys
