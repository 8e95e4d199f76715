"""HTTP surface: sessions, registrations, notification flow, dossier routes.

Every test drives the service exclusively through the FastAPI app with a
deterministic clock, then cross-checks observable effects against the
underlying stores where that sharpens the assertion.
"""

from __future__ import annotations

import base64
import json
from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from civmon import serialize
from civmon.domain.model import (
    ClinicalInvestigation,
    InvestigationalDevice,
    InvestigationalSite,
    MedicalDevice,
    Party,
    PartyKind,
    Role,
)
from civmon.export.xml_io import export_dossier
from civmon.fixtures import INTERNAL_USERS, seed_internal_users
from civmon.service.app import build_state, create_app
from civmon.service.auth import mint_sso_token
from civmon.service.config import ServiceConfig

SECRETS = {username: secret for username, secret, _, _ in INTERNAL_USERS}


class Api:
    """One wired service instance plus login helpers."""

    def __init__(self, tmp_path, clock, refuse_plaintext=False):
        self.config = ServiceConfig(
            data_dir=tmp_path / "data",
            signer_key="api-signing-key",
            sso_key="api-sso-key",
            refuse_plaintext=refuse_plaintext,
            session_ttl_minutes=10_000_000,
        )
        self.clock = clock
        self.state = build_state(self.config, clock=clock)
        self.users = seed_internal_users(self.state.enterprise)
        self.acme = self._applicant("Acme Medical", "m-acme")
        self.rival = self._applicant("Rival Devices", "m-rival")
        self.state.enterprise.save()
        self.client = TestClient(create_app(self.state), raise_server_exceptions=False)

    def _applicant(self, name: str, pid: str) -> Party:
        party = self.state.enterprise.add_party(
            Party(id=pid, kind=PartyKind.APPLICANT_ORGANIZATION, name=name, country="IT")
        )
        self.state.enterprise.grant(party.id, {Role.MANUFACTURER})
        return party

    def internal(self, username: str) -> str:
        resp = self.client.post(
            "/sessions/internal", json={"username": username, "secret": SECRETS[username]}
        )
        assert resp.status_code == 200, resp.text
        return resp.json()["token"]

    def external(self, party_id: str) -> str:
        minted = mint_sso_token(party_id, self.clock.now + timedelta(days=365), self.config.sso_key)
        resp = self.client.post("/sessions/sso", json={"token": minted})
        assert resp.status_code == 200, resp.text
        return resp.json()["token"]

    @staticmethod
    def auth(token: str) -> dict:
        return {"Authorization": f"Bearer {token}"}


@pytest.fixture
def api(tmp_path, clock):
    return Api(tmp_path, clock)


def _civ_json(title="Studio valvola", variant_kit=False, sites=1) -> dict:
    device = MedicalDevice(name="Valvola X", risk_class="III")
    investigational = (
        InvestigationalDevice.kit((device,)) if variant_kit else InvestigationalDevice.single(device)
    )
    civ = ClinicalInvestigation(
        title=title,
        device=investigational,
        sites=tuple(
            InvestigationalSite(code=f"s-{i}", name=f"Ospedale {i}", country="IT", investigator="P. I.")
            for i in range(1, sites + 1)
        ),
        intended_use="sostituzione valvolare",
        multi_centric=sites > 1,
    )
    return serialize.civ_to_dict(civ)


def _doc_json(text: str, doc_type=None, **extra) -> dict:
    payload = {"content_base64": base64.b64encode(text.encode()).decode()}
    if doc_type is not None:
        payload["doc_type"] = doc_type
    payload.update(extra)
    return payload


REQUIRED_TYPES = (
    "ethics-committee-opinion",
    "declaration",
    "clinical-protocol",
    "investigator-brochure",
    "risk-analysis",
    "literature-analysis",
    "instructions-for-use",
    "payment-proof",
)


def _draft(api: Api, token: str, **civ_kw) -> str:
    resp = api.client.post(
        "/notifications",
        json={"applicant_role": "manufacturer", "civ": _civ_json(**civ_kw), "form": {"contact": "x@y.it"}},
        headers=api.auth(token),
    )
    assert resp.status_code == 201, resp.text
    return resp.json()["key"]


def _upload_required(api: Api, token: str, key: str) -> None:
    for doc_type in REQUIRED_TYPES:
        resp = api.client.post(
            f"/notifications/{key}/documents",
            json=_doc_json(f"{doc_type} body", doc_type, label=f"{doc_type}.pdf"),
            headers=api.auth(token),
        )
        assert resp.status_code == 201, resp.text


def _submitted(api: Api, token: str, **civ_kw) -> tuple[str, str]:
    key = _draft(api, token, **civ_kw)
    _upload_required(api, token, key)
    resp = api.client.post(f"/notifications/{key}/submit", headers=api.auth(token))
    assert resp.status_code == 200, resp.text
    return key, resp.json()["code"]


def _under_evaluation(api: Api, token: str, **civ_kw) -> tuple[str, str]:
    key, code = _submitted(api, token, **civ_kw)
    resp = api.client.post(
        f"/dossiers/{code}/team",
        json={
            "supervisor": api.users.supervisor.id,
            "technical": api.users.technical["A. B."].id,
            "medical": api.users.medical["I. L."].id,
        },
        headers=api.auth(api.internal("secretary")),
    )
    assert resp.status_code == 201, resp.text
    return key, code


def _write_and_share_reports(api: Api, code: str) -> None:
    body = {
        "body": {"device_characteristics": "ok", "risk_analysis": "ok", "patient_safety": "ok"},
        "revision": 0,
    }
    for kind, username in (("technical", "tech1"), ("medical", "med1")):
        token = api.internal(username)
        resp = api.client.put(f"/dossiers/{code}/reports/{kind}", json=body, headers=api.auth(token))
        assert resp.status_code == 200, resp.text
        resp = api.client.post(f"/dossiers/{code}/reports/{kind}/share", headers=api.auth(token))
        assert resp.status_code == 200, resp.text


def _approved(api: Api, token: str, **civ_kw) -> tuple[str, str]:
    key, code = _under_evaluation(api, token, **civ_kw)
    _write_and_share_reports(api, code)
    resp = api.client.post(
        f"/dossiers/{code}/decision",
        json={"outcome": "approve", "rationale": "requisiti soddisfatti"},
        headers=api.auth(api.internal("supervisor")),
    )
    assert resp.status_code == 201, resp.text
    return key, code


# -- public surface -----------------------------------------------------


def test_health_catalogs_and_vocab_need_no_session(api):
    health = api.client.get("/health")
    assert health.status_code == 200
    assert health.json()["status"] == "ok"

    catalogs = api.client.get("/catalogs").json()
    declaration = next(d for d in catalogs["document_types"] if d["code"] == "declaration")
    assert declaration["required_for_submission"] is True
    assert "III" in catalogs["risk_classes"]
    directions = {c["code"]: c["direction"] for c in catalogs["communication_types"]}
    assert directions["info-request"] == "nca-to-applicant"

    vocab = api.client.get("/vocab/mesh", params={"q": "Arteries"}).json()
    assert any(e["code"] == "A07.231.114" for e in vocab["entries"])


def test_unknown_vocab_scheme_is_422(api):
    resp = api.client.get("/vocab/icd10", params={"q": "a"})
    assert resp.status_code == 422
    assert resp.json()["error"] == "UnknownScheme"


# -- sessions ------------------------------------------------------------


def test_internal_login_issues_scoped_session(api):
    resp = api.client.post(
        "/sessions/internal", json={"username": "secretary", "secret": SECRETS["secretary"]}
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["roles"] == ["administrative-secretary"]
    assert body["origin"] == "internal"
    assert body["party_id"] == api.users.secretary.id


def test_internal_login_rejects_bad_secret(api):
    resp = api.client.post("/sessions/internal", json={"username": "secretary", "secret": "nope"})
    assert resp.status_code == 403
    assert resp.json()["error"] == "NotAuthorized"
    assert "invalid credential" in resp.json()["detail"]


def test_sso_login_maps_grants_to_roles(api):
    minted = mint_sso_token(api.acme.id, api.clock.now + timedelta(hours=1), api.config.sso_key)
    body = api.client.post("/sessions/sso", json={"token": minted}).json()
    assert body["roles"] == ["manufacturer"]
    assert body["origin"] == "external-sso"


def test_sso_login_rejects_expired_and_tampered_tokens(api):
    expired = mint_sso_token(api.acme.id, api.clock.now - timedelta(minutes=1), api.config.sso_key)
    assert api.client.post("/sessions/sso", json={"token": expired}).status_code == 403

    minted = mint_sso_token(api.acme.id, api.clock.now + timedelta(hours=1), api.config.sso_key)
    forged = minted.replace(api.acme.id, api.rival.id, 1)
    assert api.client.post("/sessions/sso", json={"token": forged}).status_code == 403


def test_missing_or_unknown_bearer_token_is_403(api):
    bare = api.client.get("/search?state=submitted")
    assert bare.status_code == 403
    assert "authentication required" in bare.json()["detail"]

    stale = api.client.get("/search?state=submitted", headers=api.auth("no-such-token"))
    assert stale.status_code == 403
    assert "unknown session" in stale.json()["detail"]


# -- registrations -------------------------------------------------------


def test_registration_approval_grants_portal_access(api):
    resp = api.client.post(
        "/registrations",
        json={
            "organization": {"name": "Nuova Medica", "country": "IT", "contact": "info@nuova.it"},
            "roles": ["manufacturer"],
        },
    )
    assert resp.status_code == 201
    reg = resp.json()
    assert reg["status"] == "pending"

    secretary = api.internal("secretary")
    listed = api.client.get(
        "/registrations", params={"status": "pending"}, headers=api.auth(secretary)
    ).json()["registrations"]
    assert [r["id"] for r in listed] == [reg["id"]]

    # review is the secretary's job, not any internal user's
    supervisor = api.internal("supervisor")
    assert api.client.get("/registrations", headers=api.auth(supervisor)).status_code == 403

    approved = api.client.post(f"/registrations/{reg['id']}/approve", headers=api.auth(secretary))
    assert approved.status_code == 200
    granted_party = approved.json()["granted_party"]
    assert granted_party is not None

    token = api.external(granted_party)
    key = _draft(api, token)
    assert api.client.get(f"/notifications/{key}", headers=api.auth(token)).status_code == 200


def test_denied_registration_never_gets_a_grant(api):
    reg = api.client.post(
        "/registrations",
        json={"organization": {"name": "Respinta Srl", "country": "IT"}, "roles": ["manufacturer"]},
    ).json()
    secretary = api.internal("secretary")
    denied = api.client.post(f"/registrations/{reg['id']}/deny", headers=api.auth(secretary))
    assert denied.status_code == 200
    assert denied.json()["status"] == "denied"
    assert denied.json()["granted_party"] is None

    minted = mint_sso_token(
        reg["organization"]["id"], api.clock.now + timedelta(hours=1), api.config.sso_key
    )
    refused = api.client.post("/sessions/sso", json={"token": minted})
    assert refused.status_code == 403
    assert "no external access grant" in refused.json()["detail"]


def test_representative_registration_requires_delegating_manufacturer(api):
    resp = api.client.post(
        "/registrations",
        json={
            "organization": {"name": "Mandataria Srl", "country": "IT"},
            "roles": ["authorized-representative"],
        },
    )
    assert resp.status_code == 422
    assert resp.json()["error"] == "DomainValidationError"
    assert any(v["rule"] == "registration.delegation" for v in resp.json()["violations"])


def test_approved_representative_can_submit_for_its_manufacturer(api):
    reg = api.client.post(
        "/registrations",
        json={
            "organization": {"name": "Mandataria Srl", "country": "IT"},
            "roles": ["authorized-representative"],
            "delegating_manufacturer": {"name": "Overseas Devices Ltd", "country": "US"},
        },
    ).json()
    approved = api.client.post(
        f"/registrations/{reg['id']}/approve", headers=api.auth(api.internal("secretary"))
    ).json()
    rep_id = approved["granted_party"]
    manufacturer_id = approved["delegating_manufacturer"]["id"]

    token = api.external(rep_id)
    resp = api.client.post(
        "/notifications",
        json={
            "applicant_role": "authorized-representative",
            "civ": _civ_json(),
            "manufacturer_id": manufacturer_id,
        },
        headers=api.auth(token),
    )
    assert resp.status_code == 201, resp.text
    key = resp.json()["key"]
    _upload_required(api, token, key)
    submit = api.client.post(f"/notifications/{key}/submit", headers=api.auth(token))
    assert submit.status_code == 200, submit.text


# -- notification drafting -------------------------------------------------


def test_draft_to_submission_over_http(api):
    token = api.external(api.acme.id)
    resp = api.client.post(
        "/notifications",
        json={
            "applicant_role": "manufacturer",
            "civ": _civ_json(),
            "form": {"contact": "x@y.it"},
            "expected_deadline": "2010-06-30",
        },
        headers=api.auth(token),
    )
    assert resp.status_code == 201
    draft = resp.json()
    key = draft["key"]
    assert draft["state"] == "draft"
    assert draft["code"] is None
    assert draft["expected_deadline"] == "2010-06-30"

    before = api.client.get(f"/notifications/{key}/validation", headers=api.auth(token)).json()
    assert before["ok"] is False
    assert sorted(before["missing"]) == sorted(REQUIRED_TYPES)

    _upload_required(api, token, key)
    after = api.client.get(f"/notifications/{key}/validation", headers=api.auth(token)).json()
    assert after == {"ok": True, "missing": [], "violations": []}

    submit = api.client.post(f"/notifications/{key}/submit", headers=api.auth(token)).json()
    assert submit == {"code": "i.5.i.m.2/1/2009", "key": key, "state": "submitted"}

    dossier = api.client.get(f"/dossiers/{submit['code']}", headers=api.auth(token)).json()
    assert dossier["state"] == "submitted"
    assert len(dossier["documents"]) == len(REQUIRED_TYPES)


def test_internal_sessions_cannot_draft(api):
    resp = api.client.post(
        "/notifications",
        json={"applicant_role": "manufacturer", "civ": _civ_json()},
        headers=api.auth(api.internal("secretary")),
    )
    assert resp.status_code == 403
    assert "reserved to applicants" in resp.json()["detail"]


def test_draft_is_hidden_from_staff_and_other_applicants(api):
    owner = api.external(api.acme.id)
    key = _draft(api, owner)

    staff = api.client.get(f"/notifications/{key}", headers=api.auth(api.internal("secretary")))
    assert staff.status_code == 404

    other = api.client.get(f"/notifications/{key}", headers=api.auth(api.external(api.rival.id)))
    assert other.status_code == 403
    assert "not owner" in other.json()["detail"]

    assert api.client.get(f"/notifications/{key}", headers=api.auth(owner)).status_code == 200


def test_form_updates_merge_replace_and_seal(api):
    token = api.external(api.acme.id)
    key = _draft(api, token)

    merged = api.client.put(
        f"/notifications/{key}/form", json={"form": {"phone": "06-555"}}, headers=api.auth(token)
    ).json()
    assert merged["notification"]["form_data"] == {"contact": "x@y.it", "phone": "06-555"}

    replaced = api.client.put(
        f"/notifications/{key}/form",
        json={"form": {"contact": "new@y.it"}, "merge": False, "civ": _civ_json(title="Titolo nuovo")},
        headers=api.auth(token),
    ).json()
    assert replaced["notification"]["form_data"] == {"contact": "new@y.it"}
    assert replaced["civ"]["title"] == "Titolo nuovo"

    _upload_required(api, token, key)
    api.client.post(f"/notifications/{key}/submit", headers=api.auth(token))
    sealed = api.client.put(
        f"/notifications/{key}/form", json={"form": {"x": "y"}}, headers=api.auth(token)
    )
    assert sealed.status_code == 409
    assert sealed.json()["error"] == "SealedNotification"


def test_upload_error_mapping(api):
    token = api.external(api.acme.id)
    key = _draft(api, token)
    auth = api.auth(token)
    url = f"/notifications/{key}/documents"

    bad_b64 = api.client.post(url, json={"content_base64": "!!not-base64!!"}, headers=auth)
    assert bad_b64.status_code == 422
    assert any(v["rule"] == "document.content" for v in bad_b64.json()["violations"])

    unknown_type = api.client.post(url, json=_doc_json("x", "meeting-minutes"), headers=auth)
    assert unknown_type.status_code == 422
    assert unknown_type.json()["error"] == "UnknownCatalogCode"

    bad_media = api.client.post(
        url, json=_doc_json("x", "declaration", media_type="application/x-msdownload"), headers=auth
    )
    assert bad_media.status_code == 422
    assert bad_media.json()["error"] == "MediaTypeNotAllowed"

    empty = api.client.post(url, json=_doc_json("", "declaration"), headers=auth)
    assert empty.status_code == 422
    assert empty.json()["error"] == "EmptyPayload"

    bad_visibility = api.client.post(
        url, json=_doc_json("x", "declaration", visibility="secret"), headers=auth
    )
    assert bad_visibility.status_code == 422
    assert bad_visibility.json()["error"] == "ValueError"


def test_incomplete_submission_names_the_gaps(api):
    token = api.external(api.acme.id)
    key = _draft(api, token)
    api.client.post(
        f"/notifications/{key}/documents",
        json=_doc_json("protocollo", "clinical-protocol"),
        headers=api.auth(token),
    )
    resp = api.client.post(f"/notifications/{key}/submit", headers=api.auth(token))
    assert resp.status_code == 422
    body = resp.json()
    assert body["error"] == "IncompleteSubmission"
    assert sorted(body["missing"]) == sorted(set(REQUIRED_TYPES) - {"clinical-protocol"})
    assert api.client.get(f"/notifications/{key}", headers=api.auth(token)).json()["state"] == "draft"


def test_draft_creation_replays_under_idempotency_key(api):
    token = api.external(api.acme.id)
    headers = {**api.auth(token), "idempotency-key": "draft-once"}
    payload = {"applicant_role": "manufacturer", "civ": _civ_json(), "form": {}}

    first = api.client.post("/notifications", json=payload, headers=headers)
    second = api.client.post("/notifications", json=payload, headers=headers)
    assert first.status_code == second.status_code == 201
    assert first.json() == second.json()
    assert "idempotency-replayed" not in first.headers
    assert second.headers["idempotency-replayed"] == "true"
    assert len(api.state.store.keys()) == 1


def test_submit_replay_does_not_burn_a_second_code(api):
    token = api.external(api.acme.id)
    key = _draft(api, token)
    _upload_required(api, token, key)
    headers = {**api.auth(token), "idempotency-key": "submit-once"}

    first = api.client.post(f"/notifications/{key}/submit", headers=headers)
    replay = api.client.post(f"/notifications/{key}/submit", headers=headers)
    assert replay.json() == first.json()
    assert replay.headers["idempotency-replayed"] == "true"

    # a genuinely new call is a conflict, not a silent replay
    fresh = api.client.post(f"/notifications/{key}/submit", headers=api.auth(token))
    assert fresh.status_code == 409
    assert fresh.json()["error"] == "AlreadySubmitted"
    assert api.state.store.snapshot(key).code == first.json()["code"]


# -- evaluation over HTTP --------------------------------------------------


def test_team_assignment_moves_dossier_into_evaluation(api):
    token = api.external(api.acme.id)
    key, code = _submitted(api, token)

    actions = api.client.get(
        f"/dossiers/{code}/allowed-actions", headers=api.auth(api.internal("secretary"))
    ).json()
    assert actions == {"state": "submitted", "actions": ["assign-team"]}

    team = api.client.post(
        f"/dossiers/{code}/team",
        json={
            "supervisor": api.users.supervisor.id,
            "technical": api.users.technical["A. B."].id,
            "medical": api.users.medical["I. L."].id,
        },
        headers=api.auth(api.internal("secretary")),
    )
    assert team.status_code == 201
    assert team.json()["supervisor"]["name"] == "S. Viola"
    assert api.client.get(f"/dossiers/{code}", headers=api.auth(token)).json()["state"] == (
        "evaluation:in-progress"
    )

    # applicants cannot reach the staff-only route at all
    refused = api.client.post(
        f"/dossiers/{code}/team",
        json={"supervisor": "x", "technical": "y", "medical": "z"},
        headers=api.auth(token),
    )
    assert refused.status_code == 403
    assert "reserved to NCA staff" in refused.json()["detail"]


def test_report_revisions_and_stale_writes(api):
    key, code = _under_evaluation(api, api.external(api.acme.id))
    tech = api.internal("tech1")
    url = f"/dossiers/{code}/reports/technical"

    first = api.client.put(
        url,
        json={"body": {"device_characteristics": "v1"}, "revision": 0},
        headers=api.auth(tech),
    )
    assert first.status_code == 200
    assert first.json()["revision"] == 1

    stale = api.client.put(
        url, json={"body": {"device_characteristics": "v2"}, "revision": 0}, headers=api.auth(tech)
    )
    assert stale.status_code == 409
    assert stale.json()["error"] == "StaleRevision"

    foreign = api.client.put(
        url, json={"body": {}, "revision": 1}, headers=api.auth(api.internal("med1"))
    )
    assert foreign.status_code == 403
    assert foreign.json()["error"] == "NotOwner"


def test_report_reading_respects_sharing_and_seat(api):
    key, code = _under_evaluation(api, api.external(api.acme.id))
    tech = api.internal("tech1")
    api.client.put(
        f"/dossiers/{code}/reports/technical",
        json={"body": {"device_characteristics": "bozza"}, "revision": 0},
        headers=api.auth(tech),
    )

    supervisor = api.internal("supervisor")
    hidden = api.client.get(f"/dossiers/{code}/reports/technical", headers=api.auth(supervisor))
    assert hidden.status_code == 403
    assert "not shared" in hidden.json()["detail"]

    assert (
        api.client.post(f"/dossiers/{code}/reports/technical/share", headers=api.auth(tech)).status_code
        == 200
    )
    shared = api.client.get(f"/dossiers/{code}/reports/technical", headers=api.auth(supervisor))
    assert shared.status_code == 200
    assert shared.json()["body"]["device_characteristics"] == "bozza"

    # the medical evaluator stays out of the technical report even when shared
    crossed = api.client.get(f"/dossiers/{code}/reports/technical", headers=api.auth(api.internal("med1")))
    assert crossed.status_code == 403

    applicant = api.client.get(
        f"/dossiers/{code}/reports/technical", headers=api.auth(api.external(api.acme.id))
    )
    assert applicant.status_code == 403


def test_decision_gates_and_outcome_notice(api):
    token = api.external(api.acme.id)
    key, code = _under_evaluation(api, token)
    supervisor = api.internal("supervisor")
    url = f"/dossiers/{code}/decision"

    early = api.client.post(
        url, json={"outcome": "approve", "rationale": "ok"}, headers=api.auth(supervisor)
    )
    assert early.status_code == 409
    assert early.json()["error"] == "ReportsNotShared"

    _write_and_share_reports(api, code)

    bogus = api.client.post(url, json={"outcome": "defer", "rationale": "?"}, headers=api.auth(supervisor))
    assert bogus.status_code == 422
    assert any(v["rule"] == "decision.outcome" for v in bogus.json()["violations"])

    not_chair = api.client.post(
        url, json={"outcome": "approve", "rationale": "ok"}, headers=api.auth(api.internal("tech1"))
    )
    assert not_chair.status_code == 403

    decided = api.client.post(
        url, json={"outcome": "approve", "rationale": "requisiti soddisfatti"}, headers=api.auth(supervisor)
    )
    assert decided.status_code == 201
    assert decided.json()["outcome"] == "approve"

    dossier = api.client.get(f"/dossiers/{code}", headers=api.auth(token)).json()
    assert dossier["state"] == "evaluation:approved"
    assert any(c["comm_type"] == "evaluation-outcome" for c in dossier["communications"])


# -- investigation events ---------------------------------------------------


def test_event_route_splits_guard_and_role_failures(api):
    token = api.external(api.acme.id)
    key, code = _approved(api, token)
    url = f"/dossiers/{code}/events"

    # the state admits report-start, but only for the applicant side
    as_staff = api.client.post(
        url, json={"kind": "report-start"}, headers=api.auth(api.internal("secretary"))
    )
    assert as_staff.status_code == 403

    started = api.client.post(
        url,
        json={"kind": "report-start", "document": _doc_json("avvio sperimentazione")},
        headers=api.auth(token),
    )
    assert started.status_code == 201
    body = started.json()
    assert body["state"] == "investigation:started"
    assert body["document"]["doc_type"] == "start-report"
    assert body["audit"]["kind"] == "report-start"

    sae = api.client.post(
        url,
        json={"kind": "report-sae-initial", "payload": {"seq": "1", "narrative": "evento avverso"}},
        headers=api.auth(token),
    )
    assert sae.status_code == 201

    # no transition from started admits a second report-start for anyone
    again = api.client.post(url, json={"kind": "report-start"}, headers=api.auth(token))
    assert again.status_code == 409
    assert again.json()["error"] == "GuardViolation"

    unknown = api.client.post(url, json={"kind": "report-fireworks"}, headers=api.auth(token))
    assert unknown.status_code == 422
    assert any(v["rule"] == "event.kind" for v in unknown.json()["violations"])

    extract = api.client.get(
        f"/dossiers/{code}/export", params={"format": "extract"}, headers=api.auth(token)
    ).json()
    assert extract["sae_count"] == 1
    assert extract["state"] == "investigation:started"


def test_idempotent_event_posting_applies_once(api):
    token = api.external(api.acme.id)
    key, code = _approved(api, token)
    headers = {**api.auth(token), "idempotency-key": "start-once"}

    first = api.client.post(
        f"/dossiers/{code}/events", json={"kind": "report-start"}, headers=headers
    )
    replay = api.client.post(
        f"/dossiers/{code}/events", json={"kind": "report-start"}, headers=headers
    )
    assert first.status_code == replay.status_code == 201
    assert replay.json() == first.json()
    assert replay.headers["idempotency-replayed"] == "true"
    assert [e.kind for e in api.state.store.snapshot(key).audit].count("report-start") == 1


# -- communications ----------------------------------------------------------


def test_info_request_round_trip_over_http(api):
    token = api.external(api.acme.id)
    key, code = _under_evaluation(api, token)
    supervisor = api.internal("supervisor")

    opened = api.client.post(
        f"/dossiers/{code}/communications",
        json={"comm_type": "info-request", "body": "Integrare analisi rischi"},
        headers=api.auth(supervisor),
    )
    assert opened.status_code == 201
    comm_id = opened.json()["id"]
    assert opened.json()["direction"] == "nca-to-applicant"
    assert api.state.store.state(key).render() == "evaluation:info-requested"

    pending = api.client.get(f"/dossiers/{code}/open-requests", headers=api.auth(token)).json()
    assert [r["id"] for r in pending["requests"]] == [comm_id]

    answered = api.client.post(
        f"/communications/{comm_id}/reply",
        json={"body": "Analisi integrata", "attachments": [_doc_json("integrazione", "clarification")]},
        headers=api.auth(token),
    )
    assert answered.status_code == 201
    assert answered.json()["in_reply_to"] == comm_id
    assert api.state.store.state(key).render() == "evaluation:in-progress"
    assert api.client.get(f"/dossiers/{code}/open-requests", headers=api.auth(token)).json() == {
        "requests": []
    }

    twice = api.client.post(
        f"/communications/{comm_id}/reply", json={"body": "di nuovo"}, headers=api.auth(token)
    )
    assert twice.status_code == 409
    assert twice.json()["error"] == "AlreadyAnswered"

    ghost = api.client.post(
        "/communications/comm-999/reply", json={"body": "?"}, headers=api.auth(token)
    )
    assert ghost.status_code == 404
    assert ghost.json()["error"] == "UnknownRequest"


def test_plain_notice_needs_no_lifecycle_transition(api):
    token = api.external(api.acme.id)
    key, code = _under_evaluation(api, token)

    notice = api.client.post(
        f"/dossiers/{code}/communications",
        json={"comm_type": "nca-notice", "body": "Presa in carico"},
        headers=api.auth(api.internal("secretary")),
    )
    assert notice.status_code == 201
    assert api.state.store.state(key).render() == "evaluation:in-progress"


# -- documents and timeline ---------------------------------------------------


def test_internal_documents_stay_internal(api):
    token = api.external(api.acme.id)
    key, code = _under_evaluation(api, token)
    secretary = api.internal("secretary")

    # staff working notes go in with internal visibility after the seal
    note = api.client.post(
        f"/notifications/{key}/documents",
        json=_doc_json("nota interna", "internal-note", visibility="internal"),
        headers=api.auth(secretary),
    )
    assert note.status_code == 201, note.text
    doc_id = note.json()["id"]

    # but staff cannot add public submission material
    public = api.client.post(
        f"/notifications/{key}/documents",
        json=_doc_json("altro", "declaration"),
        headers=api.auth(secretary),
    )
    assert public.status_code == 409

    content_url = f"/dossiers/{code}/documents/{doc_id}/content"
    hidden = api.client.get(content_url, headers=api.auth(token))
    assert hidden.status_code == 403

    visible = api.client.get(content_url, headers=api.auth(secretary))
    assert visible.status_code == 200
    assert visible.content == b"nota interna"

    staff_timeline = api.client.get(f"/dossiers/{code}/timeline", headers=api.auth(secretary)).json()
    applicant_timeline = api.client.get(f"/dossiers/{code}/timeline", headers=api.auth(token)).json()
    staff_refs = {ref for e in staff_timeline["entries"] for ref in e["refs"]}
    applicant_refs = {ref for e in applicant_timeline["entries"] for ref in e["refs"]}
    assert doc_id in staff_refs
    assert doc_id not in applicant_refs


def test_public_document_content_round_trips(api):
    token = api.external(api.acme.id)
    key, code = _submitted(api, token)
    dossier = api.client.get(f"/dossiers/{code}", headers=api.auth(token)).json()
    declaration = next(d for d in dossier["documents"] if d["doc_type"] == "declaration")

    resp = api.client.get(
        f"/dossiers/{code}/documents/{declaration['id']}/content", headers=api.auth(token)
    )
    assert resp.status_code == 200
    assert resp.content == b"declaration body"
    assert resp.headers["content-type"].startswith("application/pdf")


def test_timeline_orders_are_mirrors(api):
    token = api.external(api.acme.id)
    key, code = _submitted(api, token)
    auth = api.auth(token)

    desc = api.client.get(f"/dossiers/{code}/timeline", headers=auth).json()["entries"]
    asc = api.client.get(f"/dossiers/{code}/timeline", params={"order": "asc"}, headers=auth).json()[
        "entries"
    ]
    assert desc == list(reversed(asc))
    assert asc[0]["kind"] == "state-change"
    assert asc[0]["label"] == "initialize-notification -> draft"


# -- export -------------------------------------------------------------------


def test_export_endpoint_matches_direct_serialization(api):
    token = api.external(api.acme.id)
    key, code = _submitted(api, token)

    resp = api.client.get(f"/dossiers/{code}/export", headers=api.auth(token))
    assert resp.status_code == 200
    assert resp.headers["content-type"].startswith("application/xml")
    assert resp.content == export_dossier(api.state.store.snapshot(key))

    extract = api.client.get(
        f"/dossiers/{code}/export", params={"format": "extract"}, headers=api.auth(token)
    ).json()
    assert extract["protocol_code"] == code
    assert extract["state"] == "submitted"
    assert extract["risk_classes"] == ["III"]

    bogus = api.client.get(
        f"/dossiers/{code}/export", params={"format": "csv"}, headers=api.auth(token)
    )
    assert bogus.status_code == 422


def test_dossier_routes_404_on_unknown_code(api):
    token = api.external(api.acme.id)
    resp = api.client.get("/dossiers/i.5.i.m.2/99/2099", headers=api.auth(token))
    assert resp.status_code == 404
    assert resp.json()["error"] == "NotFound"


# -- search and monitoring ------------------------------------------------------


def test_search_scopes_rows_to_the_viewer(api):
    acme = api.external(api.acme.id)
    rival = api.external(api.rival.id)
    _submitted(api, acme)
    _submitted(api, acme, variant_kit=True, title="Kit chirurgico")
    _submitted(api, rival, title="Catetere Rival")
    _draft(api, acme, title="Bozza invisibile")

    secretary = api.internal("secretary")
    everything = api.client.get("/search?state=submitted", headers=api.auth(secretary)).json()["rows"]
    assert len(everything) == 3
    assert all(row["link"] == f"/dossiers/{row['code']}" for row in everything)
    assert not any(row["title"] == "Bozza invisibile" for row in everything)

    own = api.client.get("/search?state=submitted", headers=api.auth(acme)).json()["rows"]
    assert {row["title"] for row in own} == {"Studio valvola", "Kit chirurgico"}

    kits = api.client.get("/search?product-type=kit", headers=api.auth(secretary)).json()["rows"]
    assert [row["title"] for row in kits] == ["Kit chirurgico"]

    bad = api.client.get("/search?flavour=mint", headers=api.auth(secretary))
    assert bad.status_code == 422
    assert bad.json()["error"] == "ValueError"


def test_stats_endpoint_respects_query_and_viewer(api):
    acme = api.external(api.acme.id)
    _submitted(api, acme)
    _submitted(api, acme, variant_kit=True)
    _submitted(api, api.external(api.rival.id))

    stats = api.client.get("/stats", headers=api.auth(api.internal("secretary"))).json()
    assert stats["total"] == {"dossiers": 3}
    assert stats["state"] == {"submitted": 3}
    assert stats["year"] == {"2009": 3}

    own = api.client.get("/stats", headers=api.auth(acme)).json()
    assert own["total"] == {"dossiers": 2}


def test_open_requests_endpoint_ages_pending_questions(api):
    token = api.external(api.acme.id)
    key, code = _under_evaluation(api, token)
    api.client.post(
        f"/dossiers/{code}/communications",
        json={"comm_type": "info-request", "body": "Serve il protocollo aggiornato"},
        headers=api.auth(api.internal("supervisor")),
    )
    api.clock.advance(timedelta(days=12))

    fresh_enough = api.client.get(
        "/open-requests", params={"max_age_days": 30}, headers=api.auth(api.internal("secretary"))
    ).json()
    assert fresh_enough == {"requests": []}

    overdue = api.client.get(
        "/open-requests", params={"max_age_days": 10}, headers=api.auth(api.internal("secretary"))
    ).json()["requests"]
    assert [r["code"] for r in overdue] == [code]
    assert overdue[0]["age_days"] >= 12
    assert overdue[0]["request"]["body"] == "Serve il protocollo aggiornato"


# -- deployment concerns ---------------------------------------------------------


def test_refuse_plaintext_blocks_unforwarded_traffic(tmp_path, clock):
    api = Api(tmp_path, clock, refuse_plaintext=True)
    plain = api.client.get("/health")
    assert plain.status_code == 403
    assert plain.json()["error"] == "PlaintextRefused"

    secure = api.client.get("/health", headers={"x-forwarded-proto": "https"})
    assert secure.status_code == 200


def test_state_survives_a_process_restart(api, clock):
    token = api.external(api.acme.id)
    key, code = _submitted(api, token)

    reopened = build_state(api.config, clock=clock)
    client = TestClient(create_app(reopened), raise_server_exceptions=False)
    login = client.post(
        "/sessions/internal", json={"username": "secretary", "secret": SECRETS["secretary"]}
    )
    assert login.status_code == 200
    resp = client.get(f"/dossiers/{code}", headers={"Authorization": f"Bearer {login.json()['token']}"})
    assert resp.status_code == 200
    assert resp.json()["key"] == key
    assert reopened.store.verify_replay(key)


def test_persisted_files_separate_identity_from_dossiers(api):
    token = api.external(api.acme.id)
    _submitted(api, token, title="Studio riservato")

    enterprise_text = api.config.enterprise_file.read_text(encoding="utf-8")
    dossier_text = api.config.dossiers_file.read_text(encoding="utf-8")

    assert "Studio riservato" not in enterprise_text
    assert "credentials" in enterprise_text
    for secret in SECRETS.values():
        assert secret not in enterprise_text  # only digests are stored
        assert secret not in dossier_text
    assert "credentials" not in dossier_text
    assert "Studio riservato" in dossier_text

    parsed = json.loads(dossier_text)
    assert "dossiers" in parsed or "records" in parsed or isinstance(parsed, dict)
