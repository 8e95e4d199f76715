"""Entities and relations of the clinical-investigation domain.

Every type here is an immutable value: mutation happens by constructing a
new value, which keeps the model safe for unrestricted concurrent reads.
Constructors enforce cheap structural invariants; relational rules that
need surrounding context (catalogs, sibling documents) are expressed as
violation lists by the validate_* helpers so callers can surface them as
data instead of failures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from typing import Mapping, Optional, Union

from civmon.errors import DomainValidationError


class Role(str, Enum):
    MANUFACTURER = "manufacturer"
    AUTHORIZED_REPRESENTATIVE = "authorized-representative"
    SUPERVISOR = "supervisor"
    TECHNICAL_EVALUATOR = "technical-evaluator"
    MEDICAL_EVALUATOR = "medical-evaluator"
    ADMINISTRATIVE_SECRETARY = "administrative-secretary"


EXTERNAL_ROLES = frozenset({Role.MANUFACTURER, Role.AUTHORIZED_REPRESENTATIVE})
INTERNAL_ROLES = frozenset(
    {
        Role.SUPERVISOR,
        Role.TECHNICAL_EVALUATOR,
        Role.MEDICAL_EVALUATOR,
        Role.ADMINISTRATIVE_SECRETARY,
    }
)


class PartyKind(str, Enum):
    APPLICANT_ORGANIZATION = "applicant-organization"
    NCA_USER = "nca-user"


class StudyDesign(str, Enum):
    NON_RANDOMIZED = "non-randomized"
    RANDOMIZED_OPEN = "randomized-open"
    RANDOMIZED_SINGLE_BLIND = "randomized-single-blind"
    RANDOMIZED_DOUBLE_BLIND = "randomized-double-blind"


class CommDirection(str, Enum):
    NCA_TO_APPLICANT = "nca-to-applicant"
    APPLICANT_TO_NCA = "applicant-to-nca"

    @property
    def opposite(self) -> "CommDirection":
        if self is CommDirection.NCA_TO_APPLICANT:
            return CommDirection.APPLICANT_TO_NCA
        return CommDirection.NCA_TO_APPLICANT


class AssociationKind(str, Enum):
    AMENDS = "amends"
    RESPONDS_TO = "responds-to"
    ATTACHES = "attaches"
    LISTS_AMENDMENTS = "lists-amendments"


class Visibility(str, Enum):
    PUBLIC = "public"
    INTERNAL = "internal"


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a structural check. Violations are data, not failures."""

    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def describe(self) -> str:
        return "; ".join(v.message for v in self.violations) or "ok"


def _require(condition: bool, rule: str, message: str, sink: list[Violation]) -> None:
    if not condition:
        sink.append(Violation(rule, message))


# ---------------------------------------------------------------------------
# Parties and mandates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Party:
    id: str
    kind: PartyKind
    name: str
    contact: str = ""
    country: str = "IT"

    def __post_init__(self):
        if not self.name.strip():
            raise DomainValidationError([Violation("party.name", "party name must be non-empty")])
        if len(self.country) != 2 or not self.country.isalpha():
            raise DomainValidationError(
                [Violation("party.country", f"country must be a two-letter code, got {self.country!r}")]
            )
        object.__setattr__(self, "country", self.country.upper())


@dataclass(frozen=True)
class Delegation:
    """Mandate of a manufacturer to an authorized representative."""

    delegator: str  # manufacturer party id
    delegate: str  # authorized representative party id
    valid_from: date
    valid_to: date

    def __post_init__(self):
        problems: list[Violation] = []
        _require(self.delegate != self.delegator, "delegation.parties", "delegate must differ from delegator", problems)
        _require(self.valid_from <= self.valid_to, "delegation.interval", "delegation interval is empty", problems)
        if problems:
            raise DomainValidationError(problems)

    def covers(self, when: date) -> bool:
        return self.valid_from <= when <= self.valid_to


# ---------------------------------------------------------------------------
# Catalog value records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Drug:
    code: str
    name: str


@dataclass(frozen=True)
class Component:
    code: str
    name: str


@dataclass(frozen=True)
class InvestigationalSite:
    code: str
    name: str
    country: str
    investigator: str


# ---------------------------------------------------------------------------
# Devices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CEMark:
    certificate_id: str
    intended_use: str
    issued: date


@dataclass(frozen=True)
class MedicalDevice:
    name: str
    risk_class: str
    characteristics: frozenset[str] = frozenset()
    classification_code: Optional[str] = None
    anatomical_location: Optional[str] = None
    ce_mark: Optional[CEMark] = None
    releases_drug: Optional[Drug] = None


@dataclass(frozen=True)
class SimilarityLink:
    """Ties the investigated device to an already marketed one."""

    marketed_device: str
    rationale: str


class DeviceVariant(str, Enum):
    SINGLE = "single"
    KIT = "kit"


KitItem = Union[MedicalDevice, Component]


@dataclass(frozen=True)
class InvestigationalDevice:
    variant: DeviceVariant
    items: tuple[KitItem, ...]
    similar_to: Optional[SimilarityLink] = None

    @classmethod
    def single(cls, device: MedicalDevice, similar_to: Optional[SimilarityLink] = None) -> "InvestigationalDevice":
        return cls(DeviceVariant.SINGLE, (device,), similar_to)

    @classmethod
    def kit(cls, items: tuple[KitItem, ...], similar_to: Optional[SimilarityLink] = None) -> "InvestigationalDevice":
        return cls(DeviceVariant.KIT, tuple(items), similar_to)

    @property
    def devices(self) -> tuple[MedicalDevice, ...]:
        return tuple(item for item in self.items if isinstance(item, MedicalDevice))


@dataclass(frozen=True)
class ComparatorProduct:
    """Benchmark product: a device or a drug, never both."""

    device: Optional[MedicalDevice] = None
    drug: Optional[Drug] = None

    def violations(self) -> list[Violation]:
        populated = sum(1 for member in (self.device, self.drug) if member is not None)
        if populated != 1:
            return [Violation("comparator.exclusive", "comparator is exclusive: exactly one of device or drug")]
        return []


def validate_device(
    device: InvestigationalDevice,
    *,
    comparator: Optional[ComparatorProduct] = None,
    investigated_intended_use: Optional[str] = None,
    risk_classes: Optional[frozenset[str]] = None,
) -> ValidationReport:
    """Check the composition rules of an investigational device.

    `risk_classes` is the loaded risk-class catalog; when omitted the
    membership check is skipped. `investigated_intended_use` enables the
    rule that a CE-marked device must be investigated for a different use
    than the one certified.
    """
    problems: list[Violation] = []

    if device.variant is DeviceVariant.KIT:
        _require(len(device.items) >= 1, "device.kit", "kit must contain >=1 element", problems)
        seen: set[KitItem] = set()
        for item in device.items:
            if item in seen:
                problems.append(Violation("device.kit-duplicate", f"kit lists {item.name!r} twice"))
            seen.add(item)
    else:
        if len(device.items) != 1 or not isinstance(device.items[0], MedicalDevice):
            problems.append(Violation("device.single", "single variant must hold exactly one medical device"))

    for md in device.devices:
        if risk_classes is not None and md.risk_class not in risk_classes:
            problems.append(Violation("device.risk-class", f"risk class {md.risk_class!r} not in catalog"))
        if md.ce_mark is not None:
            _require(
                bool(md.ce_mark.intended_use.strip()),
                "ce-mark.intended-use",
                "CE mark must state its certified intended use",
                problems,
            )
            if investigated_intended_use is not None and _same_text(
                md.ce_mark.intended_use, investigated_intended_use
            ):
                problems.append(
                    Violation(
                        "ce-mark.distinct-use",
                        "CE-marked device requires different intended use",
                    )
                )

    if device.similar_to is not None and not device.similar_to.rationale.strip():
        problems.append(Violation("similarity.rationale", "similarity link needs a rationale"))

    if comparator is not None:
        problems.extend(comparator.violations())

    return ValidationReport(tuple(problems))


def _same_text(a: str, b: str) -> bool:
    return " ".join(a.split()).lower() == " ".join(b.split()).lower()


def link_similarity(
    device: InvestigationalDevice, marketed_device: str, rationale: str
) -> InvestigationalDevice:
    """Attach (or replace) the similarity link of a device."""
    if not rationale.strip():
        raise DomainValidationError([Violation("similarity.rationale", "similarity rationale must be non-empty")])
    return InvestigationalDevice(device.variant, device.items, SimilarityLink(marketed_device, rationale))


# ---------------------------------------------------------------------------
# Adverse events
# ---------------------------------------------------------------------------


class SaeKind(str, Enum):
    INITIAL = "initial"
    FINAL = "final"


@dataclass(frozen=True)
class SaeReport:
    seq: int
    kind: SaeKind
    reported_at: datetime
    narrative: str
    final_for: Optional[int] = None


def validate_sae_set(reports: tuple[SaeReport, ...]) -> list[Violation]:
    """Finals must pair 1:1 with existing initials of the same sequence number."""
    problems: list[Violation] = []
    initials = {r.seq for r in reports if r.kind is SaeKind.INITIAL}
    if len(initials) != sum(1 for r in reports if r.kind is SaeKind.INITIAL):
        problems.append(Violation("sae.initial-unique", "duplicate initial adverse-event sequence number"))
    finals_seen: set[int] = set()
    for report in reports:
        if report.kind is not SaeKind.FINAL:
            continue
        target = report.final_for if report.final_for is not None else report.seq
        if target not in initials:
            problems.append(Violation("sae.pairing", f"final report {report.seq} has no initial report {target}"))
        if target in finals_seen:
            problems.append(Violation("sae.single-final", f"initial report {target} already has a final report"))
        finals_seen.add(target)
    return problems


# ---------------------------------------------------------------------------
# Clinical investigation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClinicalInvestigation:
    title: str
    device: InvestigationalDevice
    sites: tuple[InvestigationalSite, ...]
    intended_use: str = ""
    design: Optional[StudyDesign] = None
    population: frozenset[str] = frozenset()
    comparator: Optional[ComparatorProduct] = None
    multi_centric: bool = False
    application_field: Optional[str] = None
    started_on: Optional[date] = None
    ended_on: Optional[date] = None
    terminated_early_on: Optional[date] = None
    sae_reports: tuple[SaeReport, ...] = ()


def validate_clinical_investigation(civ: ClinicalInvestigation) -> list[Violation]:
    problems: list[Violation] = []
    _require(bool(civ.title.strip()), "civ.title", "title must be non-empty", problems)
    _require(len(civ.sites) >= 1, "civ.sites", "sites non-empty", problems)
    if civ.started_on and civ.ended_on:
        _require(civ.ended_on >= civ.started_on, "civ.dates", "end date must not precede start date", problems)
    if civ.ended_on and civ.terminated_early_on:
        problems.append(Violation("civ.termination", "early termination and regular end are mutually exclusive"))
    if civ.comparator is not None:
        problems.extend(civ.comparator.violations())
    problems.extend(validate_sae_set(civ.sae_reports))
    problems.extend(validate_device(civ.device).violations)
    return problems


def new_clinical_investigation(
    title: str,
    device: InvestigationalDevice,
    sites: tuple[InvestigationalSite, ...],
    **extra,
) -> ClinicalInvestigation:
    """Build a clinical investigation, or raise with the violation list."""
    civ = ClinicalInvestigation(title=title, device=device, sites=tuple(sites), **extra)
    problems = validate_clinical_investigation(civ)
    if problems:
        raise DomainValidationError(problems)
    return civ


# ---------------------------------------------------------------------------
# Documents and communications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DocumentAssociation:
    kind: AssociationKind
    target: str


@dataclass(frozen=True)
class Document:
    id: str
    doc_type: str
    version: int
    digest: str
    media_type: str
    size: int
    received_at: datetime
    label: str = ""
    visibility: Visibility = Visibility.PUBLIC
    associations: tuple[DocumentAssociation, ...] = ()

    def __post_init__(self):
        if self.version < 1:
            raise DomainValidationError([Violation("document.version", "document version must be >= 1")])


@dataclass(frozen=True)
class Communication:
    id: str
    direction: CommDirection
    comm_type: str
    sent_at: datetime
    body: str
    attachments: tuple[str, ...] = ()
    in_reply_to: Optional[str] = None


@dataclass(frozen=True)
class Notification:
    """The sealed regulatory submission: frozen form data plus documents."""

    code: Optional[str]
    submitted_at: Optional[datetime]
    form_data: Mapping[str, str]
    documents: tuple[str, ...]
    applicant: str
    applicant_role: Role

    @property
    def submitted(self) -> bool:
        return self.submitted_at is not None


# ---------------------------------------------------------------------------
# Evaluation team, reports and audit trail
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TeamMember:
    party_id: str
    name: str


@dataclass(frozen=True)
class EvaluationTeam:
    supervisor: TeamMember
    technical: TeamMember
    medical: TeamMember
    assigned_at: datetime

    def __post_init__(self):
        ids = {self.supervisor.party_id, self.technical.party_id, self.medical.party_id}
        if len(ids) != 3:
            raise DomainValidationError(
                [Violation("team.distinct", "evaluation team needs three distinct parties")]
            )

    def member_for(self, role: Role) -> Optional[TeamMember]:
        return {
            Role.SUPERVISOR: self.supervisor,
            Role.TECHNICAL_EVALUATOR: self.technical,
            Role.MEDICAL_EVALUATOR: self.medical,
        }.get(role)


class ReportKind(str, Enum):
    TECHNICAL = "technical"
    MEDICAL = "medical"
    FINAL = "final"


@dataclass(frozen=True)
class ReportBody:
    """The three sections every evaluation report must address."""

    device_characteristics: str = ""
    risk_analysis: str = ""
    patient_safety: str = ""


@dataclass(frozen=True)
class EvaluationReport:
    dossier_key: str
    kind: ReportKind
    author: str  # party id
    body: ReportBody = ReportBody()
    shared: bool = False
    revision: int = 1


class DecisionOutcome(str, Enum):
    APPROVE = "approve"
    DENY = "deny"


@dataclass(frozen=True)
class FinalDecision:
    outcome: DecisionOutcome
    rationale: str
    decided_at: datetime


@dataclass(frozen=True)
class AuditEntry:
    seq: int
    at: datetime
    actor: str
    role: Role
    kind: str
    from_state: str
    to_state: str
    payload: Mapping[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Dossier snapshot
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dossier:
    """Immutable snapshot of one dossier: the full container of a CIV.

    `state` is kept as its rendered form so the snapshot has no import
    dependency on the lifecycle engine.
    """

    key: str
    code: Optional[str]
    state: str
    applicant: Party
    manufacturer: Party
    notification: Notification
    civ: ClinicalInvestigation
    documents: tuple[Document, ...]
    communications: tuple[Communication, ...]
    audit: tuple[AuditEntry, ...]
    team: Optional[EvaluationTeam] = None
    expected_deadline: Optional[date] = None
    created_at: Optional[datetime] = None
