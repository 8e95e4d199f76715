"""Search, aggregation and monitoring over submitted dossiers.

Scope rules: internal (NCA) staff see every submitted dossier; external
parties see only the dossiers they applied for. Drafts are never
searchable. All matching runs against immutable snapshots so a search
can never mutate store state.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Optional

from civmon.domain.catalogs import Catalogs, default_catalogs
from civmon.domain.model import (
    Communication,
    Dossier,
    DeviceVariant,
    Role,
    StudyDesign,
    INTERNAL_ROLES,
)
from civmon.errors import UnknownCatalogCode
from civmon.export.vocab import VocabularyIndex
from civmon.lifecycle.model import CivState
from civmon.search.query import Query
from civmon.store.dossiers import DossierStore


@dataclass(frozen=True)
class ResultRow:
    """One line of the monitoring console."""

    key: str
    code: str
    title: str
    manufacturer: str
    applicant_role: str
    submitted_at: datetime
    expected_deadline: Optional[date]
    state: str
    evaluators: tuple[str, ...]
    last_document: str
    link: str


@dataclass(frozen=True)
class OverdueRequest:
    key: str
    code: str
    request: Communication
    age: timedelta


def validate_query(query: Query, catalogs: Optional[Catalogs] = None) -> None:
    """Reject filter values that can never match anything legal."""
    catalogs = catalogs or default_catalogs()
    for text in query.states:
        CivState.parse(text)  # raises IllegalState
    for value in query.applicant_roles:
        Role(value)  # raises ValueError on unknown role names
    for value in query.risk_classes:
        if value not in catalogs.risk_classes:
            raise UnknownCatalogCode(f"unknown risk class {value!r}")
    for value in query.study_designs:
        StudyDesign(value)
    if query.product_type is not None and query.product_type not in ("device", "kit"):
        raise ValueError(f"product-type must be device or kit, got {query.product_type!r}")


def _ci(text: Optional[str]) -> str:
    return (text or "").casefold()


def _anatomical_codes(term: str, vocab: Optional[VocabularyIndex]) -> frozenset[str]:
    if vocab is None or "mesh" not in vocab.schemes():
        return frozenset()
    return frozenset(vocab.codes_for_term("mesh", term))


def matches(dossier: Dossier, query: Query, vocab: Optional[VocabularyIndex] = None) -> bool:
    civ = dossier.civ
    devices = civ.device.devices
    if query.notification_number is not None and dossier.code != query.notification_number:
        return False
    if query.years:
        sent = dossier.notification.submitted_at
        if sent is None or sent.year not in query.years:
            return False
    if query.states and dossier.state not in query.states:
        return False
    if query.applicant_roles and dossier.notification.applicant_role.value not in query.applicant_roles:
        return False
    if query.company_name is not None and _ci(query.company_name) not in _ci(dossier.manufacturer.name):
        return False
    if query.evaluators:
        team = dossier.team
        members = () if team is None else (team.supervisor, team.technical, team.medical)
        hit = any(
            wanted == member.party_id or _ci(wanted) == _ci(member.name)
            for wanted in query.evaluators
            for member in members
        )
        if not hit:
            return False
    if query.product_name is not None:
        needle = _ci(query.product_name)
        names = [item.name for item in civ.device.items]
        if not any(needle in _ci(name) for name in names):
            return False
    if query.product_type is not None:
        # wire vocabulary says "device" where the model says "single"
        wanted = DeviceVariant.KIT if query.product_type == "kit" else DeviceVariant.SINGLE
        if civ.device.variant is not wanted:
            return False
    if query.risk_classes and not any(d.risk_class in query.risk_classes for d in devices):
        return False
    if query.application_field is not None and _ci(civ.application_field) != _ci(query.application_field):
        return False
    if query.characteristics:
        present = {c for d in devices for c in d.characteristics}
        if not any(c in present for c in query.characteristics):
            return False
    if query.releases_drug is not None:
        any_release = any(d.releases_drug is not None for d in devices)
        if any_release is not query.releases_drug:
            return False
    if query.classification_prefix is not None:
        if not any(
            d.classification_code is not None and d.classification_code.startswith(query.classification_prefix)
            for d in devices
        ):
            return False
    if query.anatomical_location is not None:
        codes = _anatomical_codes(query.anatomical_location, vocab)
        hit = any(
            d.anatomical_location is not None
            and (d.anatomical_location in codes or _ci(d.anatomical_location) == _ci(query.anatomical_location))
            for d in devices
        )
        if not hit:
            return False
    if query.title is not None and _ci(query.title) not in _ci(civ.title):
        return False
    if query.study_designs:
        if civ.design is None or civ.design.value not in query.study_designs:
            return False
    if query.population and not any(tag in civ.population for tag in query.population):
        return False
    if query.site_country is not None:
        wanted = query.site_country.upper()
        if not any(site.country == wanted for site in civ.sites):
            return False
    return True


def _viewer_sees(dossier: Dossier, viewer_party: Optional[str], viewer_roles: frozenset[Role]) -> bool:
    if viewer_roles & INTERNAL_ROLES:
        return True
    return viewer_party is not None and dossier.applicant.id == viewer_party


def visible_dossiers(
    store: DossierStore,
    viewer_party: Optional[str],
    viewer_roles: Iterable[Role] = (),
) -> list[Dossier]:
    """Submitted dossiers the viewer may see, in submission order."""
    roles = frozenset(viewer_roles)
    rows = [
        snap
        for snap in store.snapshots()
        if snap.notification.submitted and _viewer_sees(snap, viewer_party, roles)
    ]
    rows.sort(key=lambda snap: (snap.notification.submitted_at, snap.code or ""))
    return rows


def _last_document_label(dossier: Dossier) -> str:
    for doc in reversed(dossier.documents):
        if doc.visibility.value == "public":
            return doc.label or doc.doc_type
    return ""


def _to_row(dossier: Dossier) -> ResultRow:
    team = dossier.team
    evaluators = ()
    if team is not None:
        # the monitoring grid lists the two evaluators, not the supervisor
        evaluators = (team.technical.name, team.medical.name)
    return ResultRow(
        key=dossier.key,
        code=dossier.code or "",
        title=dossier.civ.title,
        manufacturer=dossier.manufacturer.name,
        applicant_role=dossier.notification.applicant_role.value,
        submitted_at=dossier.notification.submitted_at,
        expected_deadline=dossier.expected_deadline,
        state=dossier.state,
        evaluators=evaluators,
        last_document=_last_document_label(dossier),
        link=f"/dossiers/{dossier.code}",
    )


def search(
    store: DossierStore,
    query: Query,
    viewer_party: Optional[str] = None,
    viewer_roles: Iterable[Role] = (),
    vocab: Optional[VocabularyIndex] = None,
    catalogs: Optional[Catalogs] = None,
) -> list[ResultRow]:
    """Filtered monitoring rows ordered by (submitted_at, code)."""
    validate_query(query, catalogs)
    return [
        _to_row(snap)
        for snap in visible_dossiers(store, viewer_party, viewer_roles)
        if matches(snap, query, vocab)
    ]


def summary_stats(
    store: DossierStore,
    query: Query = Query(),
    viewer_party: Optional[str] = None,
    viewer_roles: Iterable[Role] = (),
    vocab: Optional[VocabularyIndex] = None,
    catalogs: Optional[Catalogs] = None,
) -> dict[str, dict[str, int]]:
    """Facet counts over the filtered population.

    Each count equals the size of the same search narrowed to that facet
    value. A kit spanning several risk classes therefore contributes to
    each of its classes, while the state facets partition the population.
    """
    validate_query(query, catalogs)
    buckets: dict[str, dict[str, int]] = {
        "state": {},
        "year": {},
        "applicant-role": {},
        "risk-class": {},
    }
    total = 0
    for snap in visible_dossiers(store, viewer_party, viewer_roles):
        if not matches(snap, query, vocab):
            continue
        total += 1
        _bump(buckets["state"], snap.state)
        _bump(buckets["year"], str(snap.notification.submitted_at.year))
        _bump(buckets["applicant-role"], snap.notification.applicant_role.value)
        for risk_class in sorted({d.risk_class for d in snap.civ.device.devices}):
            _bump(buckets["risk-class"], risk_class)
    return {"total": {"dossiers": total}, **buckets}


def _bump(bucket: dict[str, int], key: str) -> None:
    bucket[key] = bucket.get(key, 0) + 1


def overdue_requests(
    store: DossierStore,
    max_age: timedelta,
    now: datetime,
    viewer_party: Optional[str] = None,
    viewer_roles: Iterable[Role] = (),
) -> list[OverdueRequest]:
    """Open information requests at least max_age old, oldest first."""
    rows: list[OverdueRequest] = []
    for snap in visible_dossiers(store, viewer_party, viewer_roles):
        for request in store.open_requests(snap.key):
            age = now - request.sent_at
            if age >= max_age:
                rows.append(OverdueRequest(key=snap.key, code=snap.code or "", request=request, age=age))
    rows.sort(key=lambda row: (row.request.sent_at, row.code))
    return rows
