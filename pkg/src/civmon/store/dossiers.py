"""Dossier store: lifecycle-guarded, append-only dossier records.

Each record accumulates the notification, its documents, the
communication threads and the full audit trail of lifecycle events.
Mutations serialize under one lock; reads hand out immutable snapshots.
Identifiers are store-issued counters, so a population seeded twice with
the same inputs is byte-identical when exported.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from civmon import serialize
from civmon.domain.catalogs import Catalogs, default_catalogs
from civmon.domain.model import (
    AssociationKind,
    AuditEntry,
    ClinicalInvestigation,
    CommDirection,
    Communication,
    Document,
    DocumentAssociation,
    Dossier,
    EvaluationReport,
    EvaluationTeam,
    FinalDecision,
    Notification,
    Party,
    ReportKind,
    Role,
    SaeKind,
    SaeReport,
    Visibility,
    EXTERNAL_ROLES,
    validate_clinical_investigation,
)
from civmon.errors import (
    AlreadyAnswered,
    AlreadySubmitted,
    DomainValidationError,
    EmptyPayload,
    GuardViolation,
    MediaTypeNotAllowed,
    SameDirection,
    SealedNotification,
    StoreConflict,
    TerminalState,
    UnknownRequest,
)
from civmon.lifecycle import (
    DRAFT,
    INITIAL_STATE,
    REGISTRATION,
    CivState,
    EventKind,
    LifecycleEvent,
    Phase,
    apply_event,
    replay,
)
from civmon.store.blobs import BlobStore
from civmon.timeutil import iso, parse_iso

DEFAULT_MEDIA_TYPES = frozenset(
    {
        "application/pdf",
        "application/xml",
        "text/plain",
        "text/html",
        "application/json",
    }
)

# Event kinds that carry a report document, and the default document type
# each one files under.
EVENT_DOCUMENT_TYPES: dict[EventKind, str] = {
    EventKind.REPORT_START: "start-report",
    EventKind.REPORT_END: "end-report",
    EventKind.REPORT_EARLY_TERMINATION: "early-termination-report",
    EventKind.REPORT_SAE_INITIAL: "sae-initial-report",
    EventKind.REPORT_SAE_FINAL: "sae-final-report",
    EventKind.SUBMIT_AMENDMENT: "clinical-protocol",
}


class TimelineKind(str, Enum):
    DOCUMENT = "document"
    COMMUNICATION = "communication"
    STATE_CHANGE = "state-change"


@dataclass(frozen=True)
class TimelineEntry:
    at: datetime
    kind: TimelineKind
    label: str
    refs: tuple[str, ...] = ()


@dataclass(frozen=True)
class DocumentUpload:
    """Inbound document payload before it becomes a stored Document."""

    content: bytes
    media_type: str = "application/pdf"
    doc_type: Optional[str] = None
    label: str = ""
    visibility: Visibility = Visibility.PUBLIC
    amends_previous: bool = False


class _Record:
    """Mutable per-dossier record; snapshots are materialized on read."""

    def __init__(
        self,
        key: str,
        applicant: Party,
        manufacturer: Party,
        applicant_role: Role,
        civ: ClinicalInvestigation,
        form_data: dict[str, str],
        created_at: datetime,
    ) -> None:
        self.key = key
        self.code: Optional[str] = None
        self.state: CivState = DRAFT
        self.applicant = applicant
        self.manufacturer = manufacturer
        self.applicant_role = applicant_role
        self.civ = civ
        self.form_data = form_data
        self.submitted_at: Optional[datetime] = None
        self.notification_documents: tuple[str, ...] = ()
        self.documents: list[Document] = []
        self.communications: list[Communication] = []
        self.audit: list[AuditEntry] = []
        self.team: Optional[EvaluationTeam] = None
        self.reports: dict[ReportKind, EvaluationReport] = {}
        self.decision: Optional[FinalDecision] = None
        self.expected_deadline: Optional[date] = None
        self.created_at = created_at
        # chronological stamp list driving timeline order
        self.order: list[tuple[str, str]] = []

    @property
    def sealed(self) -> bool:
        return self.submitted_at is not None

    def notification(self) -> Notification:
        return Notification(
            code=self.code,
            submitted_at=self.submitted_at,
            form_data=dict(self.form_data),
            documents=self.notification_documents,
            applicant=self.applicant.id,
            applicant_role=self.applicant_role,
        )

    def snapshot(self) -> Dossier:
        return Dossier(
            key=self.key,
            code=self.code,
            state=self.state.render(),
            applicant=self.applicant,
            manufacturer=self.manufacturer,
            notification=self.notification(),
            civ=self.civ,
            documents=tuple(self.documents),
            communications=tuple(self.communications),
            audit=tuple(self.audit),
            team=self.team,
            expected_deadline=self.expected_deadline,
            created_at=self.created_at,
        )


class DossierStore:
    def __init__(
        self,
        blobs: BlobStore,
        catalogs: Optional[Catalogs] = None,
        path: Optional[Path] = None,
        code_prefix: str = "i.5.i.m.2",
        media_types: frozenset[str] = DEFAULT_MEDIA_TYPES,
    ) -> None:
        self.blobs = blobs
        self.catalogs = catalogs or default_catalogs()
        self.path = Path(path) if path is not None else None
        self.code_prefix = code_prefix
        self.media_types = media_types
        self._records: dict[str, _Record] = {}
        self._by_code: dict[str, str] = {}
        self._comm_index: dict[str, str] = {}  # communication id -> dossier key
        self._counters: dict[str, int] = {}
        self._idempotency: dict[str, dict] = {}
        self._lock = threading.RLock()
        if self.path is not None and self.path.exists():
            self._load()

    # -- counters -----------------------------------------------------

    def _next(self, counter: str) -> int:
        with self._lock:
            value = self._counters.get(counter, 0) + 1
            self._counters[counter] = value
            return value

    def allocate_code_seq(self, year: int, prefix: Optional[str] = None) -> int:
        """Atomically take the next dense sequence number for (prefix, year)."""
        prefix = prefix or self.code_prefix
        return self._next(f"code|{prefix}|{year}")

    def reserve_code_seqs(self, year: int, count: int, prefix: Optional[str] = None) -> None:
        """Advance the code counter, e.g. to model codes issued elsewhere."""
        for _ in range(count):
            self.allocate_code_seq(year, prefix)

    # -- record access ------------------------------------------------

    def _record(self, key: str) -> _Record:
        try:
            return self._records[key]
        except KeyError:
            raise KeyError(f"no dossier with key {key!r}") from None

    def exists(self, key: str) -> bool:
        return key in self._records

    def keys(self) -> list[str]:
        return list(self._records)

    def key_for_code(self, code: str) -> str:
        try:
            return self._by_code[code]
        except KeyError:
            raise KeyError(f"no dossier with code {code!r}") from None

    def snapshot(self, key: str) -> Dossier:
        with self._lock:
            return self._record(key).snapshot()

    def snapshots(self) -> list[Dossier]:
        with self._lock:
            return [record.snapshot() for record in self._records.values()]

    def state(self, key: str) -> CivState:
        return self._record(key).state

    # -- drafting -----------------------------------------------------

    def create_draft(
        self,
        applicant: Party,
        manufacturer: Party,
        applicant_role: Role,
        civ: ClinicalInvestigation,
        form_data: Optional[Mapping[str, str]] = None,
        actor: str = "",
        at: Optional[datetime] = None,
        expected_deadline: Optional[date] = None,
    ) -> str:
        if applicant_role not in EXTERNAL_ROLES:
            raise GuardViolation(
                f"{applicant_role.value} cannot initialize a notification",
                state=REGISTRATION,
                role=applicant_role,
                kind=EventKind.INITIALIZE_NOTIFICATION,
            )
        if at is None:
            raise ValueError("create_draft needs an explicit timestamp")
        with self._lock:
            key = f"n-{self._next('dossier')}"
            record = _Record(
                key=key,
                applicant=applicant,
                manufacturer=manufacturer,
                applicant_role=applicant_role,
                civ=civ,
                form_data=dict(form_data or {}),
                created_at=at,
            )
            record.expected_deadline = expected_deadline
            self._records[key] = record
            event = LifecycleEvent(
                kind=EventKind.INITIALIZE_NOTIFICATION,
                actor=actor or applicant.id,
                role=applicant_role,
                at=at,
            )
            transition = apply_event(REGISTRATION, event, applicant_role)
            self._append_audit(record, event, transition.from_state, transition.to_state)
            record.state = transition.to_state
            return key

    def _require_unsealed(self, record: _Record) -> None:
        if record.sealed:
            raise SealedNotification(f"notification {record.code} is sealed: no change is allowed")

    def update_form(self, key: str, form_data: Mapping[str, str], merge: bool = True) -> None:
        with self._lock:
            record = self._record(key)
            self._require_unsealed(record)
            if merge:
                record.form_data.update({str(k): str(v) for k, v in form_data.items()})
            else:
                record.form_data = {str(k): str(v) for k, v in form_data.items()}

    def update_civ(self, key: str, civ: ClinicalInvestigation) -> None:
        with self._lock:
            record = self._record(key)
            self._require_unsealed(record)
            record.civ = civ

    def set_expected_deadline(self, key: str, deadline: Optional[date]) -> None:
        with self._lock:
            self._record(key).expected_deadline = deadline

    # -- documents ----------------------------------------------------

    def _next_version(self, record: _Record, doc_type: str) -> int:
        return 1 + sum(1 for d in record.documents if d.doc_type == doc_type)

    def _precheck_upload(self, upload: DocumentUpload, fallback_type: Optional[str] = None) -> str:
        """Validate an upload before any state is touched."""
        doc_type = upload.doc_type or fallback_type
        if doc_type is None:
            raise ValueError("upload does not name a document type")
        self.catalogs.document_type(doc_type)
        if upload.media_type not in self.media_types:
            raise MediaTypeNotAllowed(f"media type {upload.media_type!r} is not accepted")
        if not upload.content:
            raise EmptyPayload("refusing to store a zero-length blob")
        return doc_type

    def _store_document(
        self,
        record: _Record,
        upload: DocumentUpload,
        at: datetime,
        doc_type: str,
        extra_associations: tuple[DocumentAssociation, ...] = (),
    ) -> Document:
        self.catalogs.document_type(doc_type)
        if upload.media_type not in self.media_types:
            raise MediaTypeNotAllowed(f"media type {upload.media_type!r} is not accepted")
        blob = self.blobs.put(upload.content, upload.media_type)
        version = self._next_version(record, doc_type)
        associations = list(extra_associations)
        if upload.amends_previous and version > 1:
            previous = [d for d in record.documents if d.doc_type == doc_type][-1]
            associations.append(DocumentAssociation(AssociationKind.AMENDS, previous.id))
        document = Document(
            id=f"doc-{self._next('doc')}",
            doc_type=doc_type,
            version=version,
            digest=blob.digest,
            media_type=upload.media_type,
            size=blob.size,
            received_at=at,
            label=upload.label,
            visibility=upload.visibility,
            associations=tuple(associations),
        )
        record.documents.append(document)
        record.order.append(("document", document.id))
        return document

    def put_document(
        self,
        key: str,
        upload: DocumentUpload,
        actor: str,
        role: Role,
        at: datetime,
    ) -> Document:
        """Store a free-standing document on the dossier.

        In draft, uploads build up the notification attachment set. After
        sealing, only internal working documents may be added this way;
        everything else arrives through a lifecycle action, a
        communication or a reply.
        """
        if upload.doc_type is None:
            raise ValueError("free-standing uploads must name their document type")
        with self._lock:
            record = self._record(key)
            if record.state.terminal:
                raise TerminalState(
                    f"{record.state.render()} is terminal: dossier history is closed",
                    state=record.state,
                    role=role,
                )
            if record.state.phase is Phase.DRAFT:
                return self._store_document(record, upload, at, upload.doc_type)
            if upload.visibility is Visibility.INTERNAL and role not in EXTERNAL_ROLES:
                return self._store_document(record, upload, at, upload.doc_type)
            raise GuardViolation(
                "document upload after submission must accompany a lifecycle action",
                state=record.state,
                role=role,
            )

    def documents(self, key: str) -> tuple[Document, ...]:
        return tuple(self._record(key).documents)

    def document_by_id(self, key: str, doc_id: str) -> Document:
        for document in self._record(key).documents:
            if document.id == doc_id:
                return document
        raise KeyError(f"no document {doc_id!r} in dossier {key!r}")

    # -- lifecycle events ----------------------------------------------

    def _append_audit(
        self,
        record: _Record,
        event: LifecycleEvent,
        from_state: CivState,
        to_state: CivState,
    ) -> AuditEntry:
        entry = AuditEntry(
            seq=len(record.audit) + 1,
            at=event.at,
            actor=event.actor,
            role=event.role,
            kind=event.kind.value,
            from_state=from_state.render(),
            to_state=to_state.render(),
            payload={str(k): str(v) for k, v in event.payload.items()},
        )
        record.audit.append(entry)
        record.order.append(("audit", str(entry.seq)))
        return entry

    def _advance_civ(self, record: _Record, event: LifecycleEvent) -> None:
        """Fold an investigation event into the clinical-investigation value."""
        civ = record.civ
        payload = event.payload
        if event.kind is EventKind.REPORT_START:
            civ = replace(civ, started_on=event.at.date())
        elif event.kind is EventKind.REPORT_END:
            civ = replace(civ, ended_on=event.at.date())
        elif event.kind is EventKind.REPORT_EARLY_TERMINATION:
            civ = replace(civ, terminated_early_on=event.at.date())
        elif event.kind in (EventKind.REPORT_SAE_INITIAL, EventKind.REPORT_SAE_FINAL):
            kind = SaeKind.INITIAL if event.kind is EventKind.REPORT_SAE_INITIAL else SaeKind.FINAL
            seq = int(payload.get("seq", len(civ.sae_reports) + 1))
            final_for = payload.get("final_for")
            report = SaeReport(
                seq=seq,
                kind=kind,
                reported_at=event.at,
                narrative=payload.get("narrative", ""),
                final_for=int(final_for) if final_for is not None else None,
            )
            civ = replace(civ, sae_reports=civ.sae_reports + (report,))
        else:
            return
        problems = validate_clinical_investigation(civ)
        if problems:
            raise DomainValidationError(problems)
        record.civ = civ

    def _apply_locked(self, record: _Record, event: LifecycleEvent) -> AuditEntry:
        if record.audit and event.at < record.audit[-1].at:
            raise GuardViolation(
                f"{event.kind.value} is timestamped before the last recorded event",
                state=record.state,
                role=event.role,
                kind=event.kind,
            )
        transition = apply_event(record.state, event, event.role)
        self._advance_civ(record, event)  # domain check before any append
        entry = self._append_audit(record, event, transition.from_state, transition.to_state)
        record.state = transition.to_state
        return entry

    def apply(
        self,
        key: str,
        kind: EventKind,
        actor: str,
        role: Role,
        at: datetime,
        payload: Optional[Mapping[str, str]] = None,
    ) -> AuditEntry:
        event = LifecycleEvent(kind=kind, actor=actor, role=role, at=at, payload=dict(payload or {}))
        with self._lock:
            return self._apply_locked(self._record(key), event)

    def report_event(
        self,
        key: str,
        kind: EventKind,
        actor: str,
        role: Role,
        at: datetime,
        payload: Optional[Mapping[str, str]] = None,
        document: Optional[DocumentUpload] = None,
    ) -> tuple[AuditEntry, Optional[Document]]:
        """Apply a lifecycle event together with the report that carries it."""
        with self._lock:
            record = self._record(key)
            doc_type = ""
            if document is not None:
                doc_type = self._precheck_upload(document, EVENT_DOCUMENT_TYPES.get(kind))
            entry = self._apply_locked(
                record,
                LifecycleEvent(kind=kind, actor=actor, role=role, at=at, payload=dict(payload or {})),
            )
            stored: Optional[Document] = None
            if document is not None:
                amends = document.amends_previous or kind is EventKind.SUBMIT_AMENDMENT
                stored = self._store_document(
                    record,
                    replace(document, amends_previous=amends),
                    at,
                    doc_type,
                )
            return entry, stored

    def submit(
        self,
        key: str,
        actor: str,
        role: Role,
        at: datetime,
        code: Optional[str] = None,
    ) -> str:
        """Seal the notification and record the submission event atomically.

        When `code` is omitted the next dense protocol code for the
        submission year is allocated inside the same critical section, so
        concurrent submissions cannot burn or duplicate sequence numbers.
        """
        with self._lock:
            record = self._record(key)
            if record.sealed:
                raise AlreadySubmitted(f"notification {record.code} was already submitted")
            event = LifecycleEvent(kind=EventKind.SUBMIT_NOTIFICATION, actor=actor, role=role, at=at)
            # guard first: an illegal submit must not consume a code
            transition = apply_event(record.state, event, role)
            if code is None:
                seq = self.allocate_code_seq(at.year)
                code = f"{self.code_prefix}/{seq}/{at.year}"
            if code in self._by_code:
                raise StoreConflict(f"protocol code {code} already assigned")
            record.code = code
            record.submitted_at = at
            record.notification_documents = tuple(
                d.id for d in record.documents if d.visibility is Visibility.PUBLIC
            )
            self._by_code[code] = key
            self._append_audit(record, event, transition.from_state, transition.to_state)
            record.state = transition.to_state
            record.order.append(("notification", key))
            return code

    def verify_replay(self, key: str) -> bool:
        """Re-run the audit trail through the engine; True iff it reproduces
        the stored state with identical intermediate transitions."""
        record = self._record(key)
        events = [
            LifecycleEvent(
                kind=EventKind(entry.kind),
                actor=entry.actor,
                role=entry.role,
                at=entry.at,
                payload=dict(entry.payload),
            )
            for entry in record.audit
        ]
        result = replay(events, initial=REGISTRATION)
        if result.state != record.state:
            return False
        for entry, transition in zip(record.audit, result.audit):
            if entry.from_state != transition.from_state.render():
                return False
            if entry.to_state != transition.to_state.render():
                return False
        return True

    # -- evaluation data ----------------------------------------------

    def set_team(self, key: str, team: EvaluationTeam) -> None:
        with self._lock:
            self._record(key).team = team

    def team(self, key: str) -> Optional[EvaluationTeam]:
        return self._record(key).team

    def set_report(self, key: str, report: EvaluationReport) -> None:
        with self._lock:
            self._record(key).reports[report.kind] = report

    def report(self, key: str, kind: ReportKind) -> Optional[EvaluationReport]:
        return self._record(key).reports.get(kind)

    def reports(self, key: str) -> dict[ReportKind, EvaluationReport]:
        return dict(self._record(key).reports)

    def set_decision(self, key: str, decision: FinalDecision) -> None:
        with self._lock:
            self._record(key).decision = decision

    def decision(self, key: str) -> Optional[FinalDecision]:
        return self._record(key).decision

    # -- communications -------------------------------------------------

    def _direction_for_role(self, role: Role) -> CommDirection:
        if role in EXTERNAL_ROLES:
            return CommDirection.APPLICANT_TO_NCA
        return CommDirection.NCA_TO_APPLICANT

    def open_communication(
        self,
        key: str,
        comm_type: str,
        body: str,
        actor: str,
        role: Role,
        at: datetime,
        attachments: Sequence[DocumentUpload] = (),
    ) -> Communication:
        ctype = self.catalogs.communication_type(comm_type)
        direction = self._direction_for_role(role)
        with self._lock:
            record = self._record(key)
            if record.state.terminal:
                raise TerminalState(
                    f"{record.state.render()} is terminal: no further communications",
                    state=record.state,
                    role=role,
                )
            if record.state.phase in (Phase.REGISTRATION, Phase.DRAFT):
                raise GuardViolation(
                    "communications open once the notification is submitted",
                    state=record.state,
                    role=role,
                )
            if ctype.direction is not None and ctype.direction is not direction:
                raise GuardViolation(
                    f"{comm_type} flows {ctype.direction.value}, not {direction.value}",
                    state=record.state,
                    role=role,
                )
            for upload in attachments:
                self._precheck_upload(upload, "clarification")
            if ctype.event_kind is not None:
                self._apply_locked(
                    record,
                    LifecycleEvent(
                        kind=EventKind(ctype.event_kind),
                        actor=actor,
                        role=role,
                        at=at,
                        payload={"comm_type": comm_type},
                    ),
                )
            attachment_ids = tuple(
                self._store_document(record, upload, at, upload.doc_type or "clarification").id
                for upload in attachments
            )
            communication = Communication(
                id=f"c-{self._next('comm')}",
                direction=direction,
                comm_type=comm_type,
                sent_at=at,
                body=body,
                attachments=attachment_ids,
            )
            record.communications.append(communication)
            record.order.append(("communication", communication.id))
            self._comm_index[communication.id] = key
            return communication

    def reply(
        self,
        request_id: str,
        body: str,
        actor: str,
        role: Role,
        at: datetime,
        comm_type: Optional[str] = None,
        attachments: Sequence[DocumentUpload] = (),
    ) -> Communication:
        with self._lock:
            key = self._comm_index.get(request_id)
            if key is None:
                raise UnknownRequest(f"no communication with id {request_id!r}")
            record = self._record(key)
            request = next(c for c in record.communications if c.id == request_id)
            rtype = self.catalogs.communication_type(request.comm_type)
            if not rtype.expects_reply:
                raise UnknownRequest(f"communication {request_id} does not expect a reply")
            if any(c.in_reply_to == request_id for c in record.communications):
                raise AlreadyAnswered(f"request {request_id} already has a reply")
            direction = self._direction_for_role(role)
            if direction is request.direction:
                raise SameDirection("a reply must flow opposite to its request")
            if at < request.sent_at:
                raise GuardViolation(
                    "a reply cannot predate its request",
                    state=record.state,
                    role=role,
                )
            if comm_type is None:
                comm_type = (
                    "info-response" if direction is CommDirection.APPLICANT_TO_NCA else "nca-notice"
                )
            ctype = self.catalogs.communication_type(comm_type)
            for upload in attachments:
                self._precheck_upload(upload, "clarification")
            if ctype.event_kind is not None:
                self._apply_locked(
                    record,
                    LifecycleEvent(
                        kind=EventKind(ctype.event_kind),
                        actor=actor,
                        role=role,
                        at=at,
                        payload={"comm_type": comm_type, "in_reply_to": request_id},
                    ),
                )
            attachment_ids = tuple(
                self._store_document(record, upload, at, upload.doc_type or "clarification").id
                for upload in attachments
            )
            response = Communication(
                id=f"c-{self._next('comm')}",
                direction=direction,
                comm_type=comm_type,
                sent_at=at,
                body=body,
                attachments=attachment_ids,
                in_reply_to=request_id,
            )
            record.communications.append(response)
            record.order.append(("communication", response.id))
            self._comm_index[response.id] = key
            return response

    def communication_by_id(self, comm_id: str) -> tuple[str, Communication]:
        key = self._comm_index.get(comm_id)
        if key is None:
            raise UnknownRequest(f"no communication with id {comm_id!r}")
        record = self._record(key)
        return key, next(c for c in record.communications if c.id == comm_id)

    def open_requests(self, key: str) -> list[Communication]:
        """Unanswered reply-expecting communications, oldest first."""
        record = self._record(key)
        answered = {c.in_reply_to for c in record.communications if c.in_reply_to}
        out = []
        for communication in record.communications:
            ctype = self.catalogs.communication_type(communication.comm_type)
            if ctype.expects_reply and communication.id not in answered:
                out.append(communication)
        out.sort(key=lambda c: c.sent_at)
        return out

    # -- timeline -------------------------------------------------------

    def timeline(self, key: str, ascending: bool = False, include_internal: bool = True) -> list[TimelineEntry]:
        """Merge documents, communications and state changes.

        Documents absorbed elsewhere (notification attachments,
        communication attachments) ride along in that entry's refs
        instead of getting their own row.
        """
        record = self._record(key)
        documents = {d.id: d for d in record.documents}
        absorbed = set(record.notification_documents)
        for communication in record.communications:
            absorbed.update(communication.attachments)

        entries: list[TimelineEntry] = []
        for stamp_kind, ref in record.order:
            if stamp_kind == "document":
                document = documents[ref]
                if document.id in absorbed:
                    continue
                if not include_internal and document.visibility is Visibility.INTERNAL:
                    continue
                label = document.label or self.catalogs.document_type(document.doc_type).label
                entries.append(
                    TimelineEntry(at=document.received_at, kind=TimelineKind.DOCUMENT, label=label, refs=(ref,))
                )
            elif stamp_kind == "notification":
                entries.append(
                    TimelineEntry(
                        at=record.submitted_at,  # type: ignore[arg-type]
                        kind=TimelineKind.DOCUMENT,
                        label=f"Notification {record.code}",
                        refs=record.notification_documents,
                    )
                )
            elif stamp_kind == "communication":
                communication = next(c for c in record.communications if c.id == ref)
                label = self.catalogs.communication_type(communication.comm_type).label
                entries.append(
                    TimelineEntry(
                        at=communication.sent_at,
                        kind=TimelineKind.COMMUNICATION,
                        label=communication.body or label,
                        refs=(ref,) + communication.attachments,
                    )
                )
            else:  # audit
                entry = record.audit[int(ref) - 1]
                entries.append(
                    TimelineEntry(
                        at=entry.at,
                        kind=TimelineKind.STATE_CHANGE,
                        label=f"{entry.kind} -> {entry.to_state}",
                        refs=(f"audit:{entry.seq}",),
                    )
                )
        # stamp order is chronological by construction; the sort is a
        # stability net for equal timestamps from merged histories
        indexed = list(enumerate(entries))
        indexed.sort(key=lambda pair: (pair[1].at, pair[0]))
        ordered = [entry for _, entry in indexed]
        if not ascending:
            ordered.reverse()
        return ordered

    # -- idempotency ----------------------------------------------------

    def idempotency_get(self, token: str) -> Optional[dict]:
        return self._idempotency.get(token)

    def idempotency_put(self, token: str, value: dict) -> None:
        with self._lock:
            self._idempotency[token] = value

    # -- persistence ----------------------------------------------------

    def _record_to_dict(self, record: _Record) -> dict:
        return {
            "key": record.key,
            "code": record.code,
            "state": record.state.render(),
            "applicant": serialize.party_to_dict(record.applicant),
            "manufacturer": serialize.party_to_dict(record.manufacturer),
            "applicant_role": record.applicant_role.value,
            "civ": serialize.civ_to_dict(record.civ),
            "form_data": dict(sorted(record.form_data.items())),
            "submitted_at": iso(record.submitted_at) if record.submitted_at else None,
            "notification_documents": list(record.notification_documents),
            "documents": [serialize.document_to_dict(d) for d in record.documents],
            "communications": [serialize.communication_to_dict(c) for c in record.communications],
            "audit": [serialize.audit_to_dict(a) for a in record.audit],
            "team": serialize.team_to_dict(record.team) if record.team else None,
            "reports": [serialize.report_to_dict(r) for r in record.reports.values()],
            "decision": serialize.decision_to_dict(record.decision) if record.decision else None,
            "expected_deadline": record.expected_deadline.isoformat() if record.expected_deadline else None,
            "created_at": iso(record.created_at),
            "order": [list(stamp) for stamp in record.order],
        }

    def _record_from_dict(self, data: dict) -> _Record:
        record = _Record(
            key=data["key"],
            applicant=serialize.party_from_dict(data["applicant"]),
            manufacturer=serialize.party_from_dict(data["manufacturer"]),
            applicant_role=Role(data["applicant_role"]),
            civ=serialize.civ_from_dict(data["civ"]),
            form_data=dict(data.get("form_data", {})),
            created_at=parse_iso(data["created_at"]),
        )
        record.code = data.get("code")
        record.state = CivState.parse(data["state"])
        submitted = data.get("submitted_at")
        record.submitted_at = parse_iso(submitted) if submitted else None
        record.notification_documents = tuple(data.get("notification_documents", ()))
        record.documents = [serialize.document_from_dict(d) for d in data.get("documents", ())]
        record.communications = [serialize.communication_from_dict(c) for c in data.get("communications", ())]
        record.audit = [serialize.audit_from_dict(a) for a in data.get("audit", ())]
        team = data.get("team")
        record.team = serialize.team_from_dict(team) if team else None
        for report_data in data.get("reports", ()):
            report = serialize.report_from_dict(report_data)
            record.reports[report.kind] = report
        decision = data.get("decision")
        record.decision = serialize.decision_from_dict(decision) if decision else None
        deadline = data.get("expected_deadline")
        record.expected_deadline = date.fromisoformat(deadline) if deadline else None
        record.order = [tuple(stamp) for stamp in data.get("order", ())]
        return record

    def to_json(self) -> str:
        with self._lock:
            payload = {
                "dossiers": [self._record_to_dict(r) for r in self._records.values()],
                "counters": dict(sorted(self._counters.items())),
                "idempotency": self._idempotency,
            }
        return json.dumps(payload, indent=2, sort_keys=False, ensure_ascii=False) + "\n"

    def save(self) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(self.to_json(), encoding="utf-8")

    def _load(self) -> None:
        payload = json.loads(self.path.read_text(encoding="utf-8"))  # type: ignore[union-attr]
        for data in payload.get("dossiers", ()):
            record = self._record_from_dict(data)
            self._records[record.key] = record
            if record.code:
                self._by_code[record.code] = record.key
            for communication in record.communications:
                self._comm_index[communication.id] = record.key
        self._counters = dict(payload.get("counters", {}))
        self._idempotency = dict(payload.get("idempotency", {}))
