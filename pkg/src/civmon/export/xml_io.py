"""Canonical XML serialization of dossiers, with a structural schema.

Export is deterministic: fixed element order, sorted sets, UTC
timestamps, two-space indentation. Import validates against the shipped
schema (element/attribute structure), then re-checks referential and
ordering invariants before handing back the reconstructed value.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from importlib import resources
from typing import Mapping, Optional

from civmon.domain.model import (
    AssociationKind,
    AuditEntry,
    CEMark,
    ClinicalInvestigation,
    CommDirection,
    Communication,
    ComparatorProduct,
    Component,
    DeviceVariant,
    Document,
    DocumentAssociation,
    Dossier,
    Drug,
    EvaluationTeam,
    InvestigationalDevice,
    InvestigationalSite,
    MedicalDevice,
    Notification,
    Party,
    PartyKind,
    Role,
    SaeKind,
    SaeReport,
    SimilarityLink,
    StudyDesign,
    TeamMember,
    ValidationReport,
    Visibility,
    validate_clinical_investigation,
)
from civmon.errors import DomainValidationError, IllegalState, SchemaViolation
from civmon.domain.model import Violation
from civmon.lifecycle import CivState
from civmon.timeutil import iso, iso_date, parse_iso, parse_iso_date

_DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")

SCHEMA_RESOURCE = "dossier-schema.json"


def load_schema() -> dict:
    text = resources.files("civmon").joinpath("data/schema").joinpath(SCHEMA_RESOURCE).read_text("utf-8")
    return json.loads(text)


# ---------------------------------------------------------------------------
# Building
# ---------------------------------------------------------------------------


def _sub(parent: ET.Element, tag: str, attrs: Optional[Mapping[str, str]] = None, text: Optional[str] = None) -> ET.Element:
    element = ET.SubElement(parent, tag)
    for key, value in (attrs or {}).items():
        element.set(key, value)
    if text is not None:
        element.text = text
    return element


def _party_el(parent: ET.Element, party: Party) -> None:
    _sub(
        parent,
        "party",
        {
            "id": party.id,
            "kind": party.kind.value,
            "name": party.name,
            "contact": party.contact,
            "country": party.country,
        },
    )


def _medical_device_el(parent: ET.Element, device: MedicalDevice) -> None:
    attrs = {"name": device.name, "risk-class": device.risk_class}
    if device.classification_code is not None:
        attrs["classification-code"] = device.classification_code
    if device.anatomical_location is not None:
        attrs["anatomical-location"] = device.anatomical_location
    element = _sub(parent, "medical-device", attrs)
    if device.characteristics:
        characteristics = _sub(element, "characteristics")
        for value in sorted(device.characteristics):
            _sub(characteristics, "c", text=value)
    if device.ce_mark is not None:
        _sub(
            element,
            "ce-mark",
            {
                "certificate-id": device.ce_mark.certificate_id,
                "issued": iso_date(device.ce_mark.issued),
            },
            text=device.ce_mark.intended_use,
        )
    if device.releases_drug is not None:
        _sub(element, "releases-drug", {"code": device.releases_drug.code, "name": device.releases_drug.name})


def export_dossier(dossier: Dossier) -> bytes:
    """Serialize to canonical bytes; equal dossiers yield equal bytes."""
    root = ET.Element("dossier", {"key": dossier.key, "state": dossier.state})
    if dossier.code is not None:
        root.set("code", dossier.code)
    if dossier.created_at is not None:
        _sub(root, "created-at", text=iso(dossier.created_at))
    if dossier.expected_deadline is not None:
        _sub(root, "expected-deadline", text=iso_date(dossier.expected_deadline))

    applicant = _sub(root, "applicant", {"role": dossier.notification.applicant_role.value})
    _party_el(applicant, dossier.applicant)
    manufacturer = _sub(root, "manufacturer")
    _party_el(manufacturer, dossier.manufacturer)

    notification = _sub(root, "notification")
    if dossier.notification.code is not None:
        notification.set("code", dossier.notification.code)
    if dossier.notification.submitted_at is not None:
        notification.set("submitted-at", iso(dossier.notification.submitted_at))
    form = _sub(notification, "form")
    for key in sorted(dossier.notification.form_data):
        _sub(form, "field", {"key": key}, text=dossier.notification.form_data[key])
    attachments = _sub(notification, "documents")
    for doc_id in dossier.notification.documents:
        _sub(attachments, "ref", {"id": doc_id})

    civ = dossier.civ
    investigation = _sub(root, "investigation")
    _sub(investigation, "title", text=civ.title)
    _sub(investigation, "intended-use", text=civ.intended_use)
    if civ.design is not None:
        _sub(investigation, "design", text=civ.design.value)
    _sub(investigation, "multi-centric", text="true" if civ.multi_centric else "false")
    if civ.application_field is not None:
        _sub(investigation, "application-field", text=civ.application_field)
    if civ.population:
        population = _sub(investigation, "population")
        for tag in sorted(civ.population):
            _sub(population, "tag", text=tag)

    device = _sub(investigation, "device", {"variant": civ.device.variant.value})
    for item in civ.device.items:
        if isinstance(item, MedicalDevice):
            _medical_device_el(device, item)
        else:
            _sub(device, "component", {"code": item.code, "name": item.name})
    if civ.device.similar_to is not None:
        _sub(
            device,
            "similar-to",
            {"marketed-device": civ.device.similar_to.marketed_device},
            text=civ.device.similar_to.rationale,
        )

    if civ.comparator is not None:
        comparator = _sub(investigation, "comparator")
        if civ.comparator.device is not None:
            _medical_device_el(comparator, civ.comparator.device)
        if civ.comparator.drug is not None:
            _sub(comparator, "drug", {"code": civ.comparator.drug.code, "name": civ.comparator.drug.name})

    sites = _sub(investigation, "sites")
    for site in civ.sites:
        _sub(
            sites,
            "site",
            {
                "code": site.code,
                "name": site.name,
                "country": site.country,
                "investigator": site.investigator,
            },
        )
    if civ.started_on is not None:
        _sub(investigation, "started-on", text=iso_date(civ.started_on))
    if civ.ended_on is not None:
        _sub(investigation, "ended-on", text=iso_date(civ.ended_on))
    if civ.terminated_early_on is not None:
        _sub(investigation, "terminated-early-on", text=iso_date(civ.terminated_early_on))
    if civ.sae_reports:
        saes = _sub(investigation, "sae-reports")
        for report in civ.sae_reports:
            attrs = {
                "seq": str(report.seq),
                "kind": report.kind.value,
                "reported-at": iso(report.reported_at),
            }
            if report.final_for is not None:
                attrs["final-for"] = str(report.final_for)
            _sub(saes, "sae", attrs, text=report.narrative)

    documents = _sub(root, "documents")
    for document in dossier.documents:
        element = _sub(
            documents,
            "document",
            {
                "id": document.id,
                "doc-type": document.doc_type,
                "version": str(document.version),
                "digest": document.digest,
                "media-type": document.media_type,
                "size": str(document.size),
                "received-at": iso(document.received_at),
                "visibility": document.visibility.value,
            },
        )
        if document.label:
            _sub(element, "label", text=document.label)
        for association in document.associations:
            _sub(element, "association", {"kind": association.kind.value, "target": association.target})

    communications = _sub(root, "communications")
    for communication in dossier.communications:
        attrs = {
            "id": communication.id,
            "direction": communication.direction.value,
            "comm-type": communication.comm_type,
            "sent-at": iso(communication.sent_at),
        }
        if communication.in_reply_to is not None:
            attrs["in-reply-to"] = communication.in_reply_to
        element = _sub(communications, "communication", attrs)
        _sub(element, "body", text=communication.body)
        for doc_id in communication.attachments:
            _sub(element, "attachment", {"ref": doc_id})

    if dossier.team is not None:
        team = _sub(root, "team", {"assigned-at": iso(dossier.team.assigned_at)})
        for seat, member in (
            ("supervisor", dossier.team.supervisor),
            ("technical", dossier.team.technical),
            ("medical", dossier.team.medical),
        ):
            _sub(team, "member", {"seat": seat, "party-id": member.party_id, "name": member.name})

    audit = _sub(root, "audit")
    for entry in dossier.audit:
        element = _sub(
            audit,
            "entry",
            {
                "seq": str(entry.seq),
                "at": iso(entry.at),
                "actor": entry.actor,
                "role": entry.role.value,
                "kind": entry.kind,
                "from-state": entry.from_state,
                "to-state": entry.to_state,
            },
        )
        for key in sorted(entry.payload):
            _sub(element, "payload-field", {"key": key}, text=entry.payload[key])

    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


# ---------------------------------------------------------------------------
# Structural schema checking
# ---------------------------------------------------------------------------


def _check_element(element: ET.Element, spec: dict, schema: dict, path: str) -> None:
    for name, mode in spec.get("attrs", {}).items():
        if mode == "required" and element.get(name) is None:
            raise SchemaViolation(f"{path}/@{name}", "required attribute missing")
    known_attrs = set(spec.get("attrs", {}))
    for name in element.attrib:
        if name not in known_attrs:
            raise SchemaViolation(f"{path}/@{name}", "unknown attribute")
    values = spec.get("values", {})
    for name, allowed in values.items():
        value = element.get(name)
        if value is not None and value not in allowed:
            raise SchemaViolation(f"{path}/@{name}", f"value {value!r} not in {allowed}")
    children_spec = spec.get("children", {})
    counts: dict[str, int] = {}
    for index, child in enumerate(element):
        if child.tag not in children_spec:
            raise SchemaViolation(f"{path}/{child.tag}", "unexpected element")
        counts[child.tag] = counts.get(child.tag, 0) + 1
        child_path = f"{path}/{child.tag}[{counts[child.tag]}]"
        child_spec = schema["elements"].get(children_spec[child.tag].get("ref", child.tag), {})
        _check_element(child, child_spec, schema, child_path)
    for tag, rule in children_spec.items():
        cardinality = rule.get("count", "many")
        have = counts.get(tag, 0)
        if cardinality == "one" and have != 1:
            raise SchemaViolation(f"{path}/{tag}", f"expected exactly one, found {have}")
        if cardinality == "opt" and have > 1:
            raise SchemaViolation(f"{path}/{tag}", f"expected at most one, found {have}")
    if spec.get("text") == "none":
        if element.text is not None and element.text.strip():
            raise SchemaViolation(path, "element does not allow text content")


def validate_against_schema(root: ET.Element, schema: Optional[dict] = None) -> None:
    schema = schema or load_schema()
    root_tag = schema["root"]
    if root.tag != root_tag:
        raise SchemaViolation(f"/{root.tag}", f"root element must be <{root_tag}>")
    _check_element(root, schema["elements"][root_tag], schema, f"/{root_tag}")


# ---------------------------------------------------------------------------
# Importing
# ---------------------------------------------------------------------------


def _text(element: Optional[ET.Element], default: str = "") -> str:
    if element is None or element.text is None:
        return default
    return element.text


def _import_party(element: ET.Element, path: str) -> Party:
    try:
        return Party(
            id=element.get("id", ""),
            kind=PartyKind(element.get("kind", "")),
            name=element.get("name", ""),
            contact=element.get("contact", ""),
            country=element.get("country", "IT"),
        )
    except ValueError as exc:
        raise SchemaViolation(path, str(exc)) from None


def _import_medical_device(element: ET.Element, path: str) -> MedicalDevice:
    characteristics = frozenset(
        _text(c) for c in element.findall("characteristics/c")
    )
    mark_el = element.find("ce-mark")
    mark = None
    if mark_el is not None:
        mark = CEMark(
            certificate_id=mark_el.get("certificate-id", ""),
            intended_use=_text(mark_el),
            issued=parse_iso_date(mark_el.get("issued", "")),
        )
    drug_el = element.find("releases-drug")
    drug = None
    if drug_el is not None:
        drug = Drug(code=drug_el.get("code", ""), name=drug_el.get("name", ""))
    return MedicalDevice(
        name=element.get("name", ""),
        risk_class=element.get("risk-class", ""),
        characteristics=characteristics,
        classification_code=element.get("classification-code"),
        anatomical_location=element.get("anatomical-location"),
        ce_mark=mark,
        releases_drug=drug,
    )


def import_dossier(payload: bytes) -> tuple[Dossier, ValidationReport]:
    """Parse, schema-check and reconstruct a dossier from canonical XML.

    Structural problems raise SchemaViolation; broken referential or
    ordering invariants raise DomainValidationError. Data-quality
    findings (domain rule violations that a draft could also carry) come
    back in the report instead of failing the import.
    """
    try:
        root = ET.fromstring(payload)
    except ET.ParseError as exc:
        raise SchemaViolation("/", f"not well-formed: {exc}") from None
    validate_against_schema(root)

    path = "/dossier"
    state_text = root.get("state", "")
    try:
        CivState.parse(state_text)
    except IllegalState as exc:
        raise SchemaViolation(f"{path}/@state", str(exc)) from None

    applicant_el = root.find("applicant")
    assert applicant_el is not None
    applicant = _import_party(applicant_el.find("party"), f"{path}/applicant/party")  # type: ignore[arg-type]
    manufacturer = _import_party(root.find("manufacturer/party"), f"{path}/manufacturer/party")  # type: ignore[arg-type]
    try:
        applicant_role = Role(applicant_el.get("role", ""))
    except ValueError:
        raise SchemaViolation(f"{path}/applicant/@role", "unknown role") from None

    notification_el = root.find("notification")
    assert notification_el is not None
    submitted_at = notification_el.get("submitted-at")
    form_data = {
        field.get("key", ""): _text(field) for field in notification_el.findall("form/field")
    }
    notification = Notification(
        code=notification_el.get("code"),
        submitted_at=parse_iso(submitted_at) if submitted_at else None,
        form_data=form_data,
        documents=tuple(ref.get("id", "") for ref in notification_el.findall("documents/ref")),
        applicant=applicant.id,
        applicant_role=applicant_role,
    )

    inv = root.find("investigation")
    assert inv is not None
    device_el = inv.find("device")
    assert device_el is not None
    items: list = []
    for child in device_el:
        if child.tag == "medical-device":
            items.append(_import_medical_device(child, f"{path}/investigation/device/medical-device"))
        elif child.tag == "component":
            items.append(Component(code=child.get("code", ""), name=child.get("name", "")))
    similar_el = device_el.find("similar-to")
    similar = None
    if similar_el is not None:
        similar = SimilarityLink(
            marketed_device=similar_el.get("marketed-device", ""), rationale=_text(similar_el)
        )
    try:
        variant = DeviceVariant(device_el.get("variant", ""))
    except ValueError:
        raise SchemaViolation(f"{path}/investigation/device/@variant", "unknown variant") from None
    device = InvestigationalDevice(variant=variant, items=tuple(items), similar_to=similar)

    comparator_el = inv.find("comparator")
    comparator = None
    if comparator_el is not None:
        comp_device_el = comparator_el.find("medical-device")
        comp_drug_el = comparator_el.find("drug")
        comparator = ComparatorProduct(
            device=_import_medical_device(comp_device_el, f"{path}/investigation/comparator/medical-device")
            if comp_device_el is not None
            else None,
            drug=Drug(code=comp_drug_el.get("code", ""), name=comp_drug_el.get("name", ""))
            if comp_drug_el is not None
            else None,
        )

    design_el = inv.find("design")
    try:
        design = StudyDesign(_text(design_el)) if design_el is not None else None
    except ValueError:
        raise SchemaViolation(f"{path}/investigation/design", "unknown study design") from None

    saes = []
    for sae_el in inv.findall("sae-reports/sae"):
        final_for = sae_el.get("final-for")
        try:
            saes.append(
                SaeReport(
                    seq=int(sae_el.get("seq", "")),
                    kind=SaeKind(sae_el.get("kind", "")),
                    reported_at=parse_iso(sae_el.get("reported-at", "")),
                    narrative=_text(sae_el),
                    final_for=int(final_for) if final_for is not None else None,
                )
            )
        except ValueError as exc:
            raise SchemaViolation(f"{path}/investigation/sae-reports/sae", str(exc)) from None

    civ = ClinicalInvestigation(
        title=_text(inv.find("title")),
        device=device,
        sites=tuple(
            InvestigationalSite(
                code=site.get("code", ""),
                name=site.get("name", ""),
                country=site.get("country", ""),
                investigator=site.get("investigator", ""),
            )
            for site in inv.findall("sites/site")
        ),
        intended_use=_text(inv.find("intended-use")),
        design=design,
        population=frozenset(_text(tag) for tag in inv.findall("population/tag")),
        comparator=comparator,
        multi_centric=_text(inv.find("multi-centric")) == "true",
        application_field=_text(inv.find("application-field")) if inv.find("application-field") is not None else None,
        started_on=parse_iso_date(_text(inv.find("started-on"))) if inv.find("started-on") is not None else None,
        ended_on=parse_iso_date(_text(inv.find("ended-on"))) if inv.find("ended-on") is not None else None,
        terminated_early_on=parse_iso_date(_text(inv.find("terminated-early-on")))
        if inv.find("terminated-early-on") is not None
        else None,
        sae_reports=tuple(saes),
    )

    documents = []
    for index, doc_el in enumerate(root.findall("documents/document"), start=1):
        doc_path = f"{path}/documents/document[{index}]"
        digest = doc_el.get("digest", "")
        if not _DIGEST_RE.match(digest):
            raise SchemaViolation(f"{doc_path}/@digest", "not a sha-256 hex digest")
        try:
            documents.append(
                Document(
                    id=doc_el.get("id", ""),
                    doc_type=doc_el.get("doc-type", ""),
                    version=int(doc_el.get("version", "")),
                    digest=digest,
                    media_type=doc_el.get("media-type", ""),
                    size=int(doc_el.get("size", "")),
                    received_at=parse_iso(doc_el.get("received-at", "")),
                    label=_text(doc_el.find("label")),
                    visibility=Visibility(doc_el.get("visibility", "public")),
                    associations=tuple(
                        DocumentAssociation(kind=AssociationKind(a.get("kind", "")), target=a.get("target", ""))
                        for a in doc_el.findall("association")
                    ),
                )
            )
        except ValueError as exc:
            raise SchemaViolation(doc_path, str(exc)) from None

    communications = []
    for index, comm_el in enumerate(root.findall("communications/communication"), start=1):
        comm_path = f"{path}/communications/communication[{index}]"
        try:
            communications.append(
                Communication(
                    id=comm_el.get("id", ""),
                    direction=CommDirection(comm_el.get("direction", "")),
                    comm_type=comm_el.get("comm-type", ""),
                    sent_at=parse_iso(comm_el.get("sent-at", "")),
                    body=_text(comm_el.find("body")),
                    attachments=tuple(a.get("ref", "") for a in comm_el.findall("attachment")),
                    in_reply_to=comm_el.get("in-reply-to"),
                )
            )
        except ValueError as exc:
            raise SchemaViolation(comm_path, str(exc)) from None

    team_el = root.find("team")
    team = None
    if team_el is not None:
        members = {m.get("seat"): m for m in team_el.findall("member")}
        missing = {"supervisor", "technical", "medical"} - set(members)
        if missing:
            raise SchemaViolation(f"{path}/team", f"missing member seats: {sorted(missing)}")
        team = EvaluationTeam(
            supervisor=TeamMember(members["supervisor"].get("party-id", ""), members["supervisor"].get("name", "")),
            technical=TeamMember(members["technical"].get("party-id", ""), members["technical"].get("name", "")),
            medical=TeamMember(members["medical"].get("party-id", ""), members["medical"].get("name", "")),
            assigned_at=parse_iso(team_el.get("assigned-at", "")),
        )

    audit = []
    for index, entry_el in enumerate(root.findall("audit/entry"), start=1):
        entry_path = f"{path}/audit/entry[{index}]"
        try:
            audit.append(
                AuditEntry(
                    seq=int(entry_el.get("seq", "")),
                    at=parse_iso(entry_el.get("at", "")),
                    actor=entry_el.get("actor", ""),
                    role=Role(entry_el.get("role", "")),
                    kind=entry_el.get("kind", ""),
                    from_state=entry_el.get("from-state", ""),
                    to_state=entry_el.get("to-state", ""),
                    payload={f.get("key", ""): _text(f) for f in entry_el.findall("payload-field")},
                )
            )
        except ValueError as exc:
            raise SchemaViolation(entry_path, str(exc)) from None

    created_el = root.find("created-at")
    deadline_el = root.find("expected-deadline")
    dossier = Dossier(
        key=root.get("key", ""),
        code=root.get("code"),
        state=state_text,
        applicant=applicant,
        manufacturer=manufacturer,
        notification=notification,
        civ=civ,
        documents=tuple(documents),
        communications=tuple(communications),
        audit=tuple(audit),
        team=team,
        expected_deadline=parse_iso_date(_text(deadline_el)) if deadline_el is not None else None,
        created_at=parse_iso(_text(created_el)) if created_el is not None else None,
    )
    _check_invariants(dossier)
    findings = validate_clinical_investigation(dossier.civ)
    return dossier, ValidationReport(tuple(findings))


def _check_invariants(dossier: Dossier) -> None:
    problems: list[Violation] = []
    doc_ids = [d.id for d in dossier.documents]
    if len(set(doc_ids)) != len(doc_ids):
        problems.append(Violation("dossier.documents", "duplicate document ids"))
    known_docs = set(doc_ids)
    for ref in dossier.notification.documents:
        if ref not in known_docs:
            problems.append(Violation("notification.documents", f"attachment {ref!r} does not resolve"))
    comms = {c.id: c for c in dossier.communications}
    if len(comms) != len(dossier.communications):
        problems.append(Violation("dossier.communications", "duplicate communication ids"))
    for communication in dossier.communications:
        for ref in communication.attachments:
            if ref not in known_docs:
                problems.append(
                    Violation("communication.attachments", f"attachment {ref!r} does not resolve")
                )
        if communication.in_reply_to is not None:
            request = comms.get(communication.in_reply_to)
            if request is None:
                problems.append(
                    Violation("communication.reply", f"reply target {communication.in_reply_to!r} missing")
                )
            else:
                if communication.sent_at < request.sent_at:
                    problems.append(Violation("communication.reply", "reply predates its request"))
                if communication.direction is request.direction:
                    problems.append(Violation("communication.reply", "reply shares the request direction"))
    for association in (a for d in dossier.documents for a in d.associations):
        if association.kind is AssociationKind.AMENDS and association.target not in known_docs:
            problems.append(Violation("document.amends", f"amends target {association.target!r} missing"))
    expected_seq = list(range(1, len(dossier.audit) + 1))
    if [entry.seq for entry in dossier.audit] != expected_seq:
        problems.append(Violation("audit.seq", "audit sequence numbers must be dense from 1"))
    for earlier, later in zip(dossier.audit, dossier.audit[1:]):
        if later.at < earlier.at:
            problems.append(Violation("audit.order", "audit timestamps must be non-decreasing"))
    if problems:
        raise DomainValidationError(problems)
