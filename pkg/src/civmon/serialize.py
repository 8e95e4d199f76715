"""JSON-shaped encoding of the domain model.

One mapping serves persistence files and HTTP payloads alike, so a stored
record and a wire response never disagree about field names. Encoders
produce plain dicts/lists/strings; decoders rebuild the frozen dataclasses
and therefore re-run their constructor checks.
"""

from __future__ import annotations

from typing import Any, Mapping, Optional

from civmon.domain.model import (
    AssociationKind,
    AuditEntry,
    CEMark,
    ClinicalInvestigation,
    CommDirection,
    Communication,
    ComparatorProduct,
    Component,
    DecisionOutcome,
    DeviceVariant,
    Document,
    DocumentAssociation,
    Dossier,
    Drug,
    EvaluationReport,
    EvaluationTeam,
    FinalDecision,
    InvestigationalDevice,
    InvestigationalSite,
    MedicalDevice,
    Notification,
    Party,
    PartyKind,
    ReportBody,
    ReportKind,
    Role,
    SaeKind,
    SaeReport,
    SimilarityLink,
    StudyDesign,
    TeamMember,
    Visibility,
)
from civmon.timeutil import iso, iso_date, parse_iso, parse_iso_date


def _opt(value, encode):
    return None if value is None else encode(value)


# ---------------------------------------------------------------------------
# Parties
# ---------------------------------------------------------------------------


def party_to_dict(party: Party) -> dict:
    return {
        "id": party.id,
        "kind": party.kind.value,
        "name": party.name,
        "contact": party.contact,
        "country": party.country,
    }


def party_from_dict(data: Mapping) -> Party:
    return Party(
        id=data["id"],
        kind=PartyKind(data["kind"]),
        name=data["name"],
        contact=data.get("contact", ""),
        country=data.get("country", "IT"),
    )


# ---------------------------------------------------------------------------
# Devices
# ---------------------------------------------------------------------------


def drug_to_dict(drug: Drug) -> dict:
    return {"code": drug.code, "name": drug.name}


def drug_from_dict(data: Mapping) -> Drug:
    return Drug(code=data["code"], name=data["name"])


def device_to_dict(device: MedicalDevice) -> dict:
    return {
        "name": device.name,
        "risk_class": device.risk_class,
        "characteristics": sorted(device.characteristics),
        "classification_code": device.classification_code,
        "anatomical_location": device.anatomical_location,
        "ce_mark": _opt(
            device.ce_mark,
            lambda m: {
                "certificate_id": m.certificate_id,
                "intended_use": m.intended_use,
                "issued": iso_date(m.issued),
            },
        ),
        "releases_drug": _opt(device.releases_drug, drug_to_dict),
    }


def device_from_dict(data: Mapping) -> MedicalDevice:
    mark = data.get("ce_mark")
    return MedicalDevice(
        name=data["name"],
        risk_class=data["risk_class"],
        characteristics=frozenset(data.get("characteristics", ())),
        classification_code=data.get("classification_code"),
        anatomical_location=data.get("anatomical_location"),
        ce_mark=None
        if mark is None
        else CEMark(
            certificate_id=mark["certificate_id"],
            intended_use=mark["intended_use"],
            issued=parse_iso_date(mark["issued"]),
        ),
        releases_drug=_opt(data.get("releases_drug"), drug_from_dict),
    )


def investigational_device_to_dict(device: InvestigationalDevice) -> dict:
    items = []
    for item in device.items:
        if isinstance(item, MedicalDevice):
            items.append({"item": "medical-device", **device_to_dict(item)})
        else:
            items.append({"item": "component", "code": item.code, "name": item.name})
    return {
        "variant": device.variant.value,
        "items": items,
        "similar_to": _opt(
            device.similar_to,
            lambda link: {"marketed_device": link.marketed_device, "rationale": link.rationale},
        ),
    }


def investigational_device_from_dict(data: Mapping) -> InvestigationalDevice:
    items: list = []
    for entry in data["items"]:
        if entry.get("item") == "component":
            items.append(Component(code=entry["code"], name=entry["name"]))
        else:
            items.append(device_from_dict(entry))
    link = data.get("similar_to")
    return InvestigationalDevice(
        variant=DeviceVariant(data["variant"]),
        items=tuple(items),
        similar_to=None
        if link is None
        else SimilarityLink(marketed_device=link["marketed_device"], rationale=link["rationale"]),
    )


def comparator_to_dict(comparator: ComparatorProduct) -> dict:
    return {
        "device": _opt(comparator.device, device_to_dict),
        "drug": _opt(comparator.drug, drug_to_dict),
    }


def comparator_from_dict(data: Mapping) -> ComparatorProduct:
    return ComparatorProduct(
        device=_opt(data.get("device"), device_from_dict),
        drug=_opt(data.get("drug"), drug_from_dict),
    )


# ---------------------------------------------------------------------------
# Clinical investigation
# ---------------------------------------------------------------------------


def sae_to_dict(report: SaeReport) -> dict:
    return {
        "seq": report.seq,
        "kind": report.kind.value,
        "reported_at": iso(report.reported_at),
        "narrative": report.narrative,
        "final_for": report.final_for,
    }


def sae_from_dict(data: Mapping) -> SaeReport:
    return SaeReport(
        seq=data["seq"],
        kind=SaeKind(data["kind"]),
        reported_at=parse_iso(data["reported_at"]),
        narrative=data["narrative"],
        final_for=data.get("final_for"),
    )


def site_to_dict(site: InvestigationalSite) -> dict:
    return {
        "code": site.code,
        "name": site.name,
        "country": site.country,
        "investigator": site.investigator,
    }


def site_from_dict(data: Mapping) -> InvestigationalSite:
    return InvestigationalSite(
        code=data["code"],
        name=data["name"],
        country=data["country"],
        investigator=data["investigator"],
    )


def civ_to_dict(civ: ClinicalInvestigation) -> dict:
    return {
        "title": civ.title,
        "device": investigational_device_to_dict(civ.device),
        "sites": [site_to_dict(site) for site in civ.sites],
        "intended_use": civ.intended_use,
        "design": _opt(civ.design, lambda d: d.value),
        "population": sorted(civ.population),
        "comparator": _opt(civ.comparator, comparator_to_dict),
        "multi_centric": civ.multi_centric,
        "application_field": civ.application_field,
        "started_on": _opt(civ.started_on, iso_date),
        "ended_on": _opt(civ.ended_on, iso_date),
        "terminated_early_on": _opt(civ.terminated_early_on, iso_date),
        "sae_reports": [sae_to_dict(r) for r in civ.sae_reports],
    }


def civ_from_dict(data: Mapping) -> ClinicalInvestigation:
    return ClinicalInvestigation(
        title=data["title"],
        device=investigational_device_from_dict(data["device"]),
        sites=tuple(site_from_dict(s) for s in data["sites"]),
        intended_use=data.get("intended_use", ""),
        design=_opt(data.get("design"), StudyDesign),
        population=frozenset(data.get("population", ())),
        comparator=_opt(data.get("comparator"), comparator_from_dict),
        multi_centric=data.get("multi_centric", False),
        application_field=data.get("application_field"),
        started_on=_opt(data.get("started_on"), parse_iso_date),
        ended_on=_opt(data.get("ended_on"), parse_iso_date),
        terminated_early_on=_opt(data.get("terminated_early_on"), parse_iso_date),
        sae_reports=tuple(sae_from_dict(r) for r in data.get("sae_reports", ())),
    )


# ---------------------------------------------------------------------------
# Documents, communications, notification
# ---------------------------------------------------------------------------


def document_to_dict(doc: Document) -> dict:
    return {
        "id": doc.id,
        "doc_type": doc.doc_type,
        "version": doc.version,
        "digest": doc.digest,
        "media_type": doc.media_type,
        "size": doc.size,
        "received_at": iso(doc.received_at),
        "label": doc.label,
        "visibility": doc.visibility.value,
        "associations": [{"kind": a.kind.value, "target": a.target} for a in doc.associations],
    }


def document_from_dict(data: Mapping) -> Document:
    return Document(
        id=data["id"],
        doc_type=data["doc_type"],
        version=data["version"],
        digest=data["digest"],
        media_type=data["media_type"],
        size=data["size"],
        received_at=parse_iso(data["received_at"]),
        label=data.get("label", ""),
        visibility=Visibility(data.get("visibility", "public")),
        associations=tuple(
            DocumentAssociation(kind=AssociationKind(a["kind"]), target=a["target"])
            for a in data.get("associations", ())
        ),
    )


def communication_to_dict(comm: Communication) -> dict:
    return {
        "id": comm.id,
        "direction": comm.direction.value,
        "comm_type": comm.comm_type,
        "sent_at": iso(comm.sent_at),
        "body": comm.body,
        "attachments": list(comm.attachments),
        "in_reply_to": comm.in_reply_to,
    }


def communication_from_dict(data: Mapping) -> Communication:
    return Communication(
        id=data["id"],
        direction=CommDirection(data["direction"]),
        comm_type=data["comm_type"],
        sent_at=parse_iso(data["sent_at"]),
        body=data["body"],
        attachments=tuple(data.get("attachments", ())),
        in_reply_to=data.get("in_reply_to"),
    )


def notification_to_dict(notification: Notification) -> dict:
    return {
        "code": notification.code,
        "submitted_at": _opt(notification.submitted_at, iso),
        "form_data": dict(sorted(notification.form_data.items())),
        "documents": list(notification.documents),
        "applicant": notification.applicant,
        "applicant_role": notification.applicant_role.value,
    }


def notification_from_dict(data: Mapping) -> Notification:
    return Notification(
        code=data.get("code"),
        submitted_at=_opt(data.get("submitted_at"), parse_iso),
        form_data=dict(data.get("form_data", {})),
        documents=tuple(data.get("documents", ())),
        applicant=data["applicant"],
        applicant_role=Role(data["applicant_role"]),
    )


# ---------------------------------------------------------------------------
# Team, reports, audit
# ---------------------------------------------------------------------------


def team_to_dict(team: EvaluationTeam) -> dict:
    def member(m: TeamMember) -> dict:
        return {"party_id": m.party_id, "name": m.name}

    return {
        "supervisor": member(team.supervisor),
        "technical": member(team.technical),
        "medical": member(team.medical),
        "assigned_at": iso(team.assigned_at),
    }


def team_from_dict(data: Mapping) -> EvaluationTeam:
    def member(d: Mapping) -> TeamMember:
        return TeamMember(party_id=d["party_id"], name=d["name"])

    return EvaluationTeam(
        supervisor=member(data["supervisor"]),
        technical=member(data["technical"]),
        medical=member(data["medical"]),
        assigned_at=parse_iso(data["assigned_at"]),
    )


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "dossier_key": report.dossier_key,
        "kind": report.kind.value,
        "author": report.author,
        "body": {
            "device_characteristics": report.body.device_characteristics,
            "risk_analysis": report.body.risk_analysis,
            "patient_safety": report.body.patient_safety,
        },
        "shared": report.shared,
        "revision": report.revision,
    }


def report_from_dict(data: Mapping) -> EvaluationReport:
    body = data.get("body", {})
    return EvaluationReport(
        dossier_key=data["dossier_key"],
        kind=ReportKind(data["kind"]),
        author=data["author"],
        body=ReportBody(
            device_characteristics=body.get("device_characteristics", ""),
            risk_analysis=body.get("risk_analysis", ""),
            patient_safety=body.get("patient_safety", ""),
        ),
        shared=data.get("shared", False),
        revision=data.get("revision", 1),
    )


def decision_to_dict(decision: FinalDecision) -> dict:
    return {
        "outcome": decision.outcome.value,
        "rationale": decision.rationale,
        "decided_at": iso(decision.decided_at),
    }


def decision_from_dict(data: Mapping) -> FinalDecision:
    return FinalDecision(
        outcome=DecisionOutcome(data["outcome"]),
        rationale=data["rationale"],
        decided_at=parse_iso(data["decided_at"]),
    )


def audit_to_dict(entry: AuditEntry) -> dict:
    return {
        "seq": entry.seq,
        "at": iso(entry.at),
        "actor": entry.actor,
        "role": entry.role.value,
        "kind": entry.kind,
        "from_state": entry.from_state,
        "to_state": entry.to_state,
        "payload": dict(sorted(entry.payload.items())),
    }


def audit_from_dict(data: Mapping) -> AuditEntry:
    return AuditEntry(
        seq=data["seq"],
        at=parse_iso(data["at"]),
        actor=data["actor"],
        role=Role(data["role"]),
        kind=data["kind"],
        from_state=data["from_state"],
        to_state=data["to_state"],
        payload=dict(data.get("payload", {})),
    )


# ---------------------------------------------------------------------------
# Dossier snapshot
# ---------------------------------------------------------------------------


def dossier_to_dict(dossier: Dossier) -> dict:
    return {
        "key": dossier.key,
        "code": dossier.code,
        "state": dossier.state,
        "applicant": party_to_dict(dossier.applicant),
        "manufacturer": party_to_dict(dossier.manufacturer),
        "notification": notification_to_dict(dossier.notification),
        "civ": civ_to_dict(dossier.civ),
        "documents": [document_to_dict(d) for d in dossier.documents],
        "communications": [communication_to_dict(c) for c in dossier.communications],
        "audit": [audit_to_dict(a) for a in dossier.audit],
        "team": _opt(dossier.team, team_to_dict),
        "expected_deadline": _opt(dossier.expected_deadline, iso_date),
        "created_at": _opt(dossier.created_at, iso),
    }


def dossier_from_dict(data: Mapping) -> Dossier:
    return Dossier(
        key=data["key"],
        code=data.get("code"),
        state=data["state"],
        applicant=party_from_dict(data["applicant"]),
        manufacturer=party_from_dict(data["manufacturer"]),
        notification=notification_from_dict(data["notification"]),
        civ=civ_from_dict(data["civ"]),
        documents=tuple(document_from_dict(d) for d in data.get("documents", ())),
        communications=tuple(communication_from_dict(c) for c in data.get("communications", ())),
        audit=tuple(audit_from_dict(a) for a in data.get("audit", ())),
        team=_opt(data.get("team"), team_from_dict),
        expected_deadline=_opt(data.get("expected_deadline"), parse_iso_date),
        created_at=_opt(data.get("created_at"), parse_iso),
    )
