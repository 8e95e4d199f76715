"""HTTP application: endpoint surface for both portals.

All mutating endpoints run through the same funnel: resolve session,
authorize, then hand off to the store or workflow layer which applies
its own lifecycle guard. The handlers own no business rules; they
translate HTTP to domain calls and domain errors to status codes.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass, field as dataclass_field
from datetime import date, datetime, timedelta
from enum import Enum
from typing import Callable, Optional

from fastapi import Depends, FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from civmon import serialize, timeutil
from civmon.domain.catalogs import Catalogs, default_catalogs, load_catalogs
from civmon.domain.model import (
    DecisionOutcome,
    Party,
    PartyKind,
    ReportBody,
    ReportKind,
    Role,
    Violation,
    Visibility,
    EXTERNAL_ROLES,
)
from civmon.errors import (
    AlreadyAnswered,
    AlreadySubmitted,
    CivmonError,
    DomainValidationError,
    EmptyPayload,
    GuardViolation,
    IllegalState,
    IncompleteSubmission,
    MediaTypeNotAllowed,
    NotAuthorized,
    ReportsNotShared,
    SameDirection,
    SchemaViolation,
    SealedNotification,
    SignerUnavailable,
    StaleRevision,
    StoreConflict,
    UnknownCatalogCode,
    UnknownRequest,
    UnknownScheme,
    WrongState,
)
from civmon.evaluation import workflow
from civmon.export.archival import HmacSigner
from civmon.export.extract import registry_extract
from civmon.export.vocab import VocabularyIndex
from civmon.export.xml_io import export_dossier
from civmon.intake.checks import ValidationReport
from civmon.intake.submission import draft_validation, submit as submit_notification
from civmon.lifecycle.engine import allowed_actions, transitions_from
from civmon.lifecycle.model import EventKind
from civmon.search import Query, from_query_string, overdue_requests, search, summary_stats
from civmon.service.auth import Session, SessionRegistry, authorize_event, authorize_internal, authorize_read
from civmon.service.config import ServiceConfig
from civmon.store.blobs import DiskBlobStore
from civmon.store.dossiers import DocumentUpload, DossierStore
from civmon.store.enterprise import EnterpriseStore, RegistrationStatus


@dataclass
class AppState:
    """Everything the handlers need, wired once at startup."""

    config: ServiceConfig
    enterprise: EnterpriseStore
    store: DossierStore
    blobs: DiskBlobStore
    sessions: SessionRegistry
    signer: HmacSigner
    catalogs: Catalogs
    vocab: VocabularyIndex
    clock: Callable[[], datetime] = dataclass_field(default=timeutil.now)


def build_state(config: ServiceConfig, clock: Callable[[], datetime] = timeutil.now) -> AppState:
    config.data_dir.mkdir(parents=True, exist_ok=True)
    blobs = DiskBlobStore(config.blobs_root)
    catalogs = load_catalogs(config.catalogs_dir) if config.catalogs_dir else default_catalogs()
    vocab = VocabularyIndex.from_dir(config.vocab_dir) if config.vocab_dir else VocabularyIndex.default()
    enterprise = EnterpriseStore(config.enterprise_file)
    store = DossierStore(
        blobs,
        catalogs=catalogs,
        path=config.dossiers_file,
        code_prefix=config.code_prefix,
    )
    sessions = SessionRegistry(enterprise, config.sso_key, ttl=timedelta(minutes=config.session_ttl_minutes))
    signer = HmacSigner(config.signer_key.encode("utf-8"), key_id=config.signer_key_id)
    return AppState(
        config=config,
        enterprise=enterprise,
        store=store,
        blobs=blobs,
        sessions=sessions,
        signer=signer,
        catalogs=catalogs,
        vocab=vocab,
        clock=clock,
    )


# -- request bodies ---------------------------------------------------------


class InternalLoginIn(BaseModel):
    username: str
    secret: str


class SsoLoginIn(BaseModel):
    token: str


class PartyIn(BaseModel):
    name: str
    country: str
    contact: str = ""


class RegistrationIn(BaseModel):
    organization: PartyIn
    roles: list[str]
    delegating_manufacturer: Optional[PartyIn] = None


class DraftIn(BaseModel):
    applicant_role: str
    civ: dict
    form: dict[str, str] = {}
    manufacturer_id: Optional[str] = None
    expected_deadline: Optional[str] = None


class FormIn(BaseModel):
    form: Optional[dict[str, str]] = None
    merge: bool = True
    civ: Optional[dict] = None
    expected_deadline: Optional[str] = None


class DocumentIn(BaseModel):
    content_base64: str
    doc_type: Optional[str] = None
    label: str = ""
    media_type: str = "application/pdf"
    visibility: str = "public"
    amends_previous: bool = False


class TeamIn(BaseModel):
    supervisor: str
    technical: str
    medical: str


class ReportBodyIn(BaseModel):
    device_characteristics: str = ""
    risk_analysis: str = ""
    patient_safety: str = ""


class ReportIn(BaseModel):
    body: ReportBodyIn
    revision: int


class DecisionIn(BaseModel):
    outcome: str
    rationale: str
    label: Optional[str] = None


class CommunicationIn(BaseModel):
    comm_type: str
    body: str
    attachments: list[DocumentIn] = []


class ReplyIn(BaseModel):
    body: str
    comm_type: Optional[str] = None
    attachments: list[DocumentIn] = []


class EventIn(BaseModel):
    kind: str
    payload: dict[str, str] = {}
    document: Optional[DocumentIn] = None


# -- JSON helpers -----------------------------------------------------------


def _invalid(rule: str, message: str) -> DomainValidationError:
    return DomainValidationError([Violation(rule, message)])


def _json_safe(value):
    if isinstance(value, datetime):
        return timeutil.iso(value)
    if isinstance(value, date):
        return timeutil.iso_date(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (frozenset, set)):
        return sorted(_json_safe(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    return value


def _report_json(report: ValidationReport) -> dict:
    return {
        "ok": report.ok,
        "missing": list(report.completeness),
        "violations": [{"rule": v.rule, "message": v.message} for v in report.consistency],
    }


def _session_json(session: Session) -> dict:
    return {
        "token": session.token,
        "party_id": session.party_id,
        "roles": sorted(r.value for r in session.roles),
        "origin": session.origin.value,
        "expires_at": timeutil.iso(session.expires_at),
    }


def _registration_json(request) -> dict:
    return {
        "id": request.id,
        "organization": serialize.party_to_dict(request.organization),
        "requested_roles": [r.value for r in request.requested_roles],
        "submitted_at": timeutil.iso(request.submitted_at),
        "delegating_manufacturer": (
            serialize.party_to_dict(request.delegating_manufacturer)
            if request.delegating_manufacturer is not None
            else None
        ),
        "status": request.status.value,
        "granted_party": request.granted_party,
    }


def _decode_upload(body: DocumentIn) -> DocumentUpload:
    try:
        content = base64.b64decode(body.content_base64, validate=True)
    except (binascii.Error, ValueError):
        raise _invalid("document.content", "content_base64 is not valid base64") from None
    return DocumentUpload(
        content=content,
        media_type=body.media_type,
        doc_type=body.doc_type,
        label=body.label,
        visibility=Visibility(body.visibility),
        amends_previous=body.amends_previous,
    )


def _parse_role(text: str) -> Role:
    try:
        return Role(text)
    except ValueError:
        raise _invalid("role", f"unknown role {text!r}") from None


def _parse_kind(text: str) -> EventKind:
    try:
        return EventKind(text)
    except ValueError:
        raise _invalid("event.kind", f"unknown event kind {text!r}") from None


def _parse_report_kind(text: str) -> ReportKind:
    try:
        return ReportKind(text)
    except ValueError:
        raise _invalid("report.kind", f"unknown report kind {text!r}") from None


def _parse_deadline(text: Optional[str]) -> Optional[date]:
    if text is None:
        return None
    try:
        return timeutil.parse_iso_date(text)
    except ValueError:
        raise _invalid("expected_deadline", f"not a date: {text!r}") from None


def _civ_from_payload(data: dict):
    try:
        return serialize.civ_from_dict(data)
    except (KeyError, TypeError, AttributeError) as exc:
        raise _invalid("civ", f"malformed clinical investigation payload: {exc}") from None


# -- error mapping ----------------------------------------------------------

_STATUS_BY_ERROR: tuple[tuple[type, int], ...] = (
    (NotAuthorized, 403),
    (UnknownRequest, 404),
    (SignerUnavailable, 503),
    (GuardViolation, 409),
    (AlreadySubmitted, 409),
    (AlreadyAnswered, 409),
    (SameDirection, 409),
    (StaleRevision, 409),
    (StoreConflict, 409),
    (SealedNotification, 409),
    (WrongState, 409),
    (ReportsNotShared, 409),
    (DomainValidationError, 422),
    (IncompleteSubmission, 422),
    (SchemaViolation, 422),
    (UnknownCatalogCode, 422),
    (UnknownScheme, 422),
    (EmptyPayload, 422),
    (MediaTypeNotAllowed, 422),
    (IllegalState, 422),
)


def _error_response(exc: Exception) -> JSONResponse:
    status = 500
    for cls, code in _STATUS_BY_ERROR:
        if isinstance(exc, cls):
            status = code
            break
    body = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, DomainValidationError):
        body["violations"] = [{"rule": v.rule, "message": v.message} for v in exc.violations]
    if isinstance(exc, IncompleteSubmission):
        body["missing"] = list(exc.report.completeness)
        body["violations"] = [{"rule": v.rule, "message": v.message} for v in exc.report.consistency]
    return JSONResponse(body, status_code=status)


# -- application ------------------------------------------------------------


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="civmon", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.civmon = state

    @app.exception_handler(CivmonError)
    async def _civmon_error(_request: Request, exc: CivmonError):
        return _error_response(exc)

    @app.exception_handler(KeyError)
    async def _key_error(_request: Request, exc: KeyError):
        detail = exc.args[0] if exc.args else "not found"
        return JSONResponse({"error": "NotFound", "detail": str(detail)}, status_code=404)

    @app.exception_handler(ValueError)
    async def _value_error(_request: Request, exc: ValueError):
        return JSONResponse({"error": "ValueError", "detail": str(exc)}, status_code=422)

    if state.config.refuse_plaintext:

        @app.middleware("http")
        async def _refuse_plaintext(request: Request, call_next):
            forwarded = request.headers.get("x-forwarded-proto", request.url.scheme)
            if forwarded != "https":
                return JSONResponse(
                    {"error": "PlaintextRefused", "detail": "this deployment accepts https traffic only"},
                    status_code=403,
                )
            return await call_next(request)

    def current_session(request: Request) -> Session:
        header = request.headers.get("authorization", "")
        token = header[7:] if header.lower().startswith("bearer ") else None
        return state.sessions.resolve(token, state.clock())

    SessionDep = Depends(current_session)

    def _require(decision) -> None:
        if not decision.allowed:
            raise NotAuthorized(decision.reason)

    def _notification_record(session: Session, notif_id: str):
        """Drafts are owner-visible only; NCA staff never see them."""
        snapshot = state.store.snapshot(notif_id)
        if not snapshot.notification.submitted and session.internal:
            raise KeyError(f"no notification with id {notif_id!r}")
        _require(authorize_read(session, snapshot.applicant.id))
        return snapshot

    def _dossier_snapshot(session: Session, code: str):
        key = state.store.key_for_code(code)
        snapshot = state.store.snapshot(key)
        _require(authorize_read(session, snapshot.applicant.id))
        return key, snapshot

    def _pick_event_role(session: Session, key: str, kind: EventKind) -> Role:
        current = state.store.state(key)
        decision, role = authorize_event(session, current, kind)
        if decision.allowed and role is not None:
            return role
        anywhere = kind in transitions_from(current)
        if anywhere:
            # the state admits this event, the session's roles do not
            raise NotAuthorized(decision.reason)
        raise GuardViolation(decision.reason, state=current, kind=kind)

    def _role_for_comm(session: Session, key: str, comm_type: Optional[str]) -> Role:
        """Pick the session role a communication should be sent under.

        Event-carrying types need a role the lifecycle guard accepts;
        plain notices only need the direction, which every role of one
        session shares.
        """
        if comm_type is None:
            comm_type = "nca-notice" if session.internal else "info-response"
        ct = state.catalogs.communication_type(comm_type)
        if ct.event_kind is not None:
            return _pick_event_role(session, key, EventKind(ct.event_kind))
        return next(iter(sorted(session.roles, key=lambda r: r.value)))

    def _idempotent(request: Request, produce: Callable[[], tuple[int, dict]]) -> JSONResponse:
        token = request.headers.get("idempotency-key")
        if token:
            cached = state.store.idempotency_get(token)
            if cached is not None:
                return JSONResponse(
                    cached["body"], status_code=cached["status"], headers={"idempotency-replayed": "true"}
                )
        status, body = produce()
        if token:
            state.store.idempotency_put(token, {"status": status, "body": body})
            state.store.save()
        return JSONResponse(body, status_code=status)

    def _persist() -> None:
        state.store.save()
        state.enterprise.save()

    # -- health and reference data ---------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok", "time": timeutil.iso(state.clock())}

    @app.get("/catalogs")
    def catalogs_view():
        return {
            "document_types": [
                {
                    "code": dt.code,
                    "label": dt.label,
                    "required_for_submission": dt.required_for_submission,
                    "versioned": dt.versioned,
                }
                for dt in sorted(state.catalogs.document_types.values(), key=lambda d: d.code)
            ],
            "communication_types": [
                {
                    "code": ct.code,
                    "label": ct.label,
                    "direction": ct.direction.value,
                    "event_kind": ct.event_kind,
                    "expects_reply": ct.expects_reply,
                }
                for ct in sorted(state.catalogs.communication_types.values(), key=lambda c: c.code)
            ],
            "risk_classes": sorted(state.catalogs.risk_classes),
        }

    @app.get("/vocab/{scheme}")
    def vocab_lookup(scheme: str, q: str = "", limit: int = 20):
        entries = state.vocab.lookup(scheme, q, limit=limit)
        return {
            "entries": [
                {"scheme": e.scheme, "code": e.code, "label": e.label, "parent": e.parent} for e in entries
            ]
        }

    # -- sessions ----------------------------------------------------------

    @app.post("/sessions/internal")
    def login_internal(body: InternalLoginIn):
        session = state.sessions.login_internal(body.username, body.secret, state.clock())
        return _session_json(session)

    @app.post("/sessions/sso")
    def login_sso(body: SsoLoginIn):
        session = state.sessions.login_sso(body.token, state.clock())
        return _session_json(session)

    # -- registrations -----------------------------------------------------

    @app.post("/registrations", status_code=201)
    def register(body: RegistrationIn):
        organization = Party(
            id=state.enterprise.next_party_id(),
            name=body.organization.name,
            kind=PartyKind.APPLICANT_ORGANIZATION,
            country=body.organization.country,
            contact=body.organization.contact,
        )
        delegating = None
        if body.delegating_manufacturer is not None:
            delegating = Party(
                id=state.enterprise.next_party_id(),
                name=body.delegating_manufacturer.name,
                kind=PartyKind.APPLICANT_ORGANIZATION,
                country=body.delegating_manufacturer.country,
                contact=body.delegating_manufacturer.contact,
            )
        request = state.enterprise.register(
            organization,
            tuple(_parse_role(r) for r in body.roles),
            submitted_at=state.clock(),
            delegating_manufacturer=delegating,
        )
        state.enterprise.save()
        return _registration_json(request)

    @app.get("/registrations")
    def list_registrations(status: Optional[str] = None, session: Session = SessionDep):
        _require(authorize_internal(session))
        if Role.ADMINISTRATIVE_SECRETARY not in session.roles:
            raise NotAuthorized("registration review is reserved to the administrative secretary")
        wanted = RegistrationStatus(status) if status else None
        return {"registrations": [_registration_json(r) for r in state.enterprise.registrations(wanted)]}

    @app.post("/registrations/{reg_id}/approve")
    def approve_registration(reg_id: str, session: Session = SessionDep):
        _require(authorize_internal(session))
        request = state.enterprise.approve_registration(reg_id, session.party_id)
        _persist()
        return _registration_json(request)

    @app.post("/registrations/{reg_id}/deny")
    def deny_registration(reg_id: str, session: Session = SessionDep):
        _require(authorize_internal(session))
        request = state.enterprise.deny_registration(reg_id, session.party_id)
        _persist()
        return _registration_json(request)

    # -- notifications (pre-submission) -------------------------------------

    @app.post("/notifications", status_code=201)
    def create_notification(body: DraftIn, request: Request, session: Session = SessionDep):
        if session.internal:
            raise NotAuthorized("drafting notifications is reserved to applicants")
        role = _parse_role(body.applicant_role)
        if role not in EXTERNAL_ROLES:
            raise NotAuthorized(f"{role.value} cannot apply for a notification")
        if role not in session.roles:
            raise NotAuthorized(f"session holds no {role.value} grant")
        applicant = state.enterprise.party(session.party_id)
        manufacturer = applicant
        if body.manufacturer_id is not None:
            manufacturer = state.enterprise.party(body.manufacturer_id)
        civ = _civ_from_payload(body.civ)

        def produce():
            key = state.store.create_draft(
                applicant,
                manufacturer,
                role,
                civ,
                form_data=body.form,
                actor=session.party_id,
                at=state.clock(),
                expected_deadline=_parse_deadline(body.expected_deadline),
            )
            _persist()
            return 201, serialize.dossier_to_dict(state.store.snapshot(key))

        return _idempotent(request, produce)

    @app.get("/notifications/{notif_id}")
    def get_notification(notif_id: str, session: Session = SessionDep):
        return serialize.dossier_to_dict(_notification_record(session, notif_id))

    @app.put("/notifications/{notif_id}/form")
    def update_notification(notif_id: str, body: FormIn, session: Session = SessionDep):
        _notification_record(session, notif_id)
        if body.form is not None:
            state.store.update_form(notif_id, body.form, merge=body.merge)
        if body.civ is not None:
            state.store.update_civ(notif_id, _civ_from_payload(body.civ))
        if body.expected_deadline is not None:
            state.store.set_expected_deadline(notif_id, _parse_deadline(body.expected_deadline))
        _persist()
        return serialize.dossier_to_dict(state.store.snapshot(notif_id))

    @app.get("/notifications/{notif_id}/validation")
    def validate_notification(notif_id: str, session: Session = SessionDep):
        _notification_record(session, notif_id)
        return _report_json(draft_validation(state.store, notif_id))

    @app.post("/notifications/{notif_id}/documents", status_code=201)
    def upload_document(notif_id: str, body: DocumentIn, request: Request, session: Session = SessionDep):
        snapshot = _notification_record(session, notif_id)
        upload = _decode_upload(body)
        if session.internal:
            role = next(iter(sorted(session.roles, key=lambda r: r.value)))
        else:
            role = snapshot.notification.applicant_role

        def produce():
            document = state.store.put_document(notif_id, upload, actor=session.party_id, role=role, at=state.clock())
            _persist()
            return 201, serialize.document_to_dict(document)

        return _idempotent(request, produce)

    @app.post("/notifications/{notif_id}/submit")
    def submit_endpoint(notif_id: str, request: Request, session: Session = SessionDep):
        snapshot = _notification_record(session, notif_id)
        role = snapshot.notification.applicant_role

        def produce():
            code = submit_notification(
                state.store, state.enterprise, notif_id, actor=session.party_id, role=role, at=state.clock()
            )
            _persist()
            return 200, {"code": code, "key": notif_id, "state": state.store.state(notif_id).render()}

        return _idempotent(request, produce)

    # -- dossiers (post-submission) ------------------------------------------

    @app.get("/dossiers/{code:path}/timeline")
    def timeline(code: str, order: str = "desc", session: Session = SessionDep):
        key, _ = _dossier_snapshot(session, code)
        entries = state.store.timeline(key, ascending=order == "asc", include_internal=session.internal)
        return {
            "entries": [
                {"at": timeutil.iso(e.at), "kind": e.kind.value, "label": e.label, "refs": list(e.refs)}
                for e in entries
            ]
        }

    @app.get("/dossiers/{code:path}/open-requests")
    def dossier_open_requests(code: str, session: Session = SessionDep):
        key, _ = _dossier_snapshot(session, code)
        return {"requests": [serialize.communication_to_dict(c) for c in state.store.open_requests(key)]}

    @app.get("/dossiers/{code:path}/allowed-actions")
    def dossier_allowed_actions(code: str, session: Session = SessionDep):
        key, _ = _dossier_snapshot(session, code)
        current = state.store.state(key)
        kinds: set[str] = set()
        for role in session.roles:
            kinds |= {k.value for k in allowed_actions(current, role)}
        return {"state": current.render(), "actions": sorted(kinds)}

    @app.get("/dossiers/{code:path}/export")
    def export_endpoint(code: str, format: str = "xml", session: Session = SessionDep):
        key, snapshot = _dossier_snapshot(session, code)
        if format == "xml":
            return Response(content=export_dossier(snapshot), media_type="application/xml")
        if format == "extract":
            return _json_safe(registry_extract(snapshot).to_dict())
        raise _invalid("export.format", f"unknown export format {format!r}")

    @app.get("/dossiers/{code:path}/documents/{doc_id}/content")
    def document_content(code: str, doc_id: str, session: Session = SessionDep):
        key, snapshot = _dossier_snapshot(session, code)
        document = state.store.document_by_id(key, doc_id)
        if document.visibility is Visibility.INTERNAL and not session.internal:
            raise NotAuthorized("internal working documents are reserved to NCA staff")
        payload = state.blobs.get(document.digest)
        return Response(content=payload, media_type=document.media_type)

    @app.get("/dossiers/{code:path}/reports/{kind}")
    def read_report_endpoint(code: str, kind: str, session: Session = SessionDep):
        _require(authorize_internal(session))
        key, _ = _dossier_snapshot(session, code)
        report = workflow.read_report(
            state.store, key, _parse_report_kind(kind), actor=session.party_id, actor_roles=session.roles
        )
        return serialize.report_to_dict(report)

    @app.get("/dossiers/{code:path}")
    def get_dossier(code: str, session: Session = SessionDep):
        _, snapshot = _dossier_snapshot(session, code)
        return serialize.dossier_to_dict(snapshot)

    @app.post("/dossiers/{code:path}/team", status_code=201)
    def assign_team_endpoint(code: str, body: TeamIn, request: Request, session: Session = SessionDep):
        _require(authorize_internal(session))
        key = state.store.key_for_code(code)
        actor_role = (
            Role.ADMINISTRATIVE_SECRETARY if Role.ADMINISTRATIVE_SECRETARY in session.roles else Role.SUPERVISOR
        )

        def produce():
            team = workflow.assign_team(
                state.store,
                state.enterprise,
                key,
                supervisor=body.supervisor,
                technical=body.technical,
                medical=body.medical,
                actor=session.party_id,
                actor_role=actor_role,
                at=state.clock(),
            )
            _persist()
            return 201, serialize.team_to_dict(team)

        return _idempotent(request, produce)

    @app.put("/dossiers/{code:path}/reports/{kind}")
    def save_report_endpoint(code: str, kind: str, body: ReportIn, session: Session = SessionDep):
        _require(authorize_internal(session))
        key, _ = _dossier_snapshot(session, code)
        report = workflow.save_report(
            state.store,
            key,
            _parse_report_kind(kind),
            ReportBody(
                device_characteristics=body.body.device_characteristics,
                risk_analysis=body.body.risk_analysis,
                patient_safety=body.body.patient_safety,
            ),
            actor=session.party_id,
            expected_revision=body.revision,
        )
        _persist()
        return serialize.report_to_dict(report)

    @app.post("/dossiers/{code:path}/reports/{kind}/share")
    def share_report_endpoint(code: str, kind: str, session: Session = SessionDep):
        _require(authorize_internal(session))
        key, _ = _dossier_snapshot(session, code)
        report = workflow.share_report(state.store, key, _parse_report_kind(kind), actor=session.party_id)
        _persist()
        return serialize.report_to_dict(report)

    @app.post("/dossiers/{code:path}/decision", status_code=201)
    def decide_endpoint(code: str, body: DecisionIn, request: Request, session: Session = SessionDep):
        _require(authorize_internal(session))
        key, _ = _dossier_snapshot(session, code)
        try:
            outcome = DecisionOutcome(body.outcome)
        except ValueError:
            raise _invalid("decision.outcome", f"unknown outcome {body.outcome!r}") from None

        def produce():
            decision = workflow.decide(
                state.store,
                key,
                outcome,
                body.rationale,
                actor=session.party_id,
                at=state.clock(),
                signer=state.signer,
                label=body.label,
            )
            _persist()
            return 201, serialize.decision_to_dict(decision)

        return _idempotent(request, produce)

    @app.post("/dossiers/{code:path}/communications", status_code=201)
    def open_communication_endpoint(
        code: str, body: CommunicationIn, request: Request, session: Session = SessionDep
    ):
        key, _ = _dossier_snapshot(session, code)

        def produce():
            role = _role_for_comm(session, key, body.comm_type)
            comm = state.store.open_communication(
                key,
                body.comm_type,
                body.body,
                actor=session.party_id,
                role=role,
                at=state.clock(),
                attachments=[_decode_upload(a) for a in body.attachments],
            )
            _persist()
            return 201, serialize.communication_to_dict(comm)

        return _idempotent(request, produce)

    @app.post("/communications/{comm_id}/reply", status_code=201)
    def reply_endpoint(comm_id: str, body: ReplyIn, request: Request, session: Session = SessionDep):
        key, _ = state.store.communication_by_id(comm_id)
        snapshot = state.store.snapshot(key)
        _require(authorize_read(session, snapshot.applicant.id))

        def produce():
            role = _role_for_comm(session, key, body.comm_type)
            comm = state.store.reply(
                comm_id,
                body.body,
                actor=session.party_id,
                role=role,
                at=state.clock(),
                comm_type=body.comm_type,
                attachments=[_decode_upload(a) for a in body.attachments],
            )
            _persist()
            return 201, serialize.communication_to_dict(comm)

        return _idempotent(request, produce)

    @app.post("/dossiers/{code:path}/events", status_code=201)
    def report_event_endpoint(code: str, body: EventIn, request: Request, session: Session = SessionDep):
        key, snapshot = _dossier_snapshot(session, code)
        kind = _parse_kind(body.kind)
        upload = _decode_upload(body.document) if body.document is not None else None

        def produce():
            # picked inside so a replayed request never re-runs the guard
            role = _pick_event_role(session, key, kind)
            entry, document = state.store.report_event(
                key,
                kind,
                actor=session.party_id,
                role=role,
                at=state.clock(),
                payload=body.payload,
                document=upload,
            )
            _persist()
            return 201, {
                "audit": serialize.audit_to_dict(entry),
                "document": serialize.document_to_dict(document) if document is not None else None,
                "state": state.store.state(key).render(),
            }

        return _idempotent(request, produce)

    # -- search and monitoring ----------------------------------------------

    @app.get("/search")
    def search_endpoint(request: Request, session: Session = SessionDep):
        query = from_query_string(request.url.query)
        rows = search(
            state.store,
            query,
            viewer_party=session.party_id,
            viewer_roles=session.roles,
            vocab=state.vocab,
            catalogs=state.catalogs,
        )
        return {
            "rows": [
                {
                    "key": r.key,
                    "code": r.code,
                    "title": r.title,
                    "manufacturer": r.manufacturer,
                    "applicant_role": r.applicant_role,
                    "submitted_at": timeutil.iso(r.submitted_at),
                    "expected_deadline": timeutil.iso_date(r.expected_deadline) if r.expected_deadline else None,
                    "state": r.state,
                    "evaluators": list(r.evaluators),
                    "last_document": r.last_document,
                    "link": r.link,
                }
                for r in rows
            ]
        }

    @app.get("/stats")
    def stats_endpoint(request: Request, session: Session = SessionDep):
        query = from_query_string(request.url.query)
        return summary_stats(
            state.store,
            query,
            viewer_party=session.party_id,
            viewer_roles=session.roles,
            vocab=state.vocab,
            catalogs=state.catalogs,
        )

    @app.get("/open-requests")
    def open_requests_endpoint(max_age_days: int = 0, session: Session = SessionDep):
        rows = overdue_requests(
            state.store,
            timedelta(days=max_age_days),
            now=state.clock(),
            viewer_party=session.party_id,
            viewer_roles=session.roles,
        )
        return {
            "requests": [
                {
                    "key": r.key,
                    "code": r.code,
                    "request": serialize.communication_to_dict(r.request),
                    "age_days": r.age.days,
                }
                for r in rows
            ]
        }

    return app
