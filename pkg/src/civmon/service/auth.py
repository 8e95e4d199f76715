"""Authentication and authorization for the HTTP service.

Internal staff authenticate with stored credentials; external parties
arrive with a signed single-sign-on token minted by an identity portal
the service trusts. The stub verifier checks an HMAC over the token
body, which is enough to exercise every trust boundary in tests while
keeping the verifier pluggable.
"""

from __future__ import annotations

import hmac
import hashlib
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Optional

from civmon.domain.model import Role, EXTERNAL_ROLES, INTERNAL_ROLES
from civmon.errors import NotAuthorized
from civmon.lifecycle.engine import is_action_permitted
from civmon.lifecycle.model import CivState, EventKind
from civmon.store.enterprise import EnterpriseStore
from civmon.timeutil import iso, parse_iso


class SessionOrigin(str, Enum):
    INTERNAL = "internal"
    EXTERNAL_SSO = "external-sso"


@dataclass(frozen=True)
class Session:
    token: str
    party_id: str
    roles: frozenset[Role]
    origin: SessionOrigin
    expires_at: datetime

    def expired(self, now: datetime) -> bool:
        return now >= self.expires_at

    @property
    def internal(self) -> bool:
        return self.origin is SessionOrigin.INTERNAL


def _sso_signature(key: str, body: str) -> str:
    return hmac.new(key.encode("utf-8"), body.encode("utf-8"), hashlib.sha256).hexdigest()


def mint_sso_token(party_id: str, expires_at: datetime, key: str) -> str:
    """Produce a token the stub verifier accepts: party|expiry|hmac."""
    body = f"{party_id}|{iso(expires_at)}"
    return f"{body}|{_sso_signature(key, body)}"


def verify_sso_token(token: str, key: str, now: datetime) -> str:
    """Return the party id carried by a valid, unexpired token."""
    parts = token.split("|")
    if len(parts) != 3:
        raise NotAuthorized("malformed token")
    party_id, expires_text, signature = parts
    expected = _sso_signature(key, f"{party_id}|{expires_text}")
    if not hmac.compare_digest(signature, expected):
        raise NotAuthorized("invalid token signature")
    try:
        expires_at = parse_iso(expires_text)
    except ValueError:
        raise NotAuthorized("malformed token expiry") from None
    if now >= expires_at:
        raise NotAuthorized("expired token")
    return party_id


class SessionRegistry:
    """Issues and resolves bearer sessions. Sessions are immutable."""

    def __init__(self, enterprise: EnterpriseStore, sso_key: str, ttl: timedelta = timedelta(hours=8)) -> None:
        self.enterprise = enterprise
        self.sso_key = sso_key
        self.ttl = ttl
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _issue(self, party_id: str, roles: frozenset[Role], origin: SessionOrigin, now: datetime) -> Session:
        session = Session(
            token=secrets.token_hex(16),
            party_id=party_id,
            roles=roles,
            origin=origin,
            expires_at=now + self.ttl,
        )
        with self._lock:
            self._sessions[session.token] = session
        return session

    def login_internal(self, username: str, secret: str, now: datetime) -> Session:
        party_id = self.enterprise.verify_credential(username, secret)
        if party_id is None:
            raise NotAuthorized("invalid credential")
        roles = self.enterprise.roles_of(party_id) & INTERNAL_ROLES
        if not roles:
            raise NotAuthorized("credential carries no internal role")
        return self._issue(party_id, roles, SessionOrigin.INTERNAL, now)

    def login_sso(self, token: str, now: datetime) -> Session:
        party_id = verify_sso_token(token, self.sso_key, now)
        # external sessions may carry external roles only
        roles = self.enterprise.roles_of(party_id) & EXTERNAL_ROLES
        if not roles:
            raise NotAuthorized(f"party {party_id} holds no external access grant")
        return self._issue(party_id, roles, SessionOrigin.EXTERNAL_SSO, now)

    def resolve(self, token: Optional[str], now: datetime) -> Session:
        if not token:
            raise NotAuthorized("authentication required")
        session = self._sessions.get(token)
        if session is None:
            raise NotAuthorized("unknown session")
        if session.expired(now):
            raise NotAuthorized("session expired")
        return session


@dataclass(frozen=True)
class Authorization:
    allowed: bool
    reason: str = ""


def authorize_read(session: Session, applicant_party: str) -> Authorization:
    """Dossier visibility: NCA staff see all, applicants only their own."""
    if session.internal:
        return Authorization(True)
    if session.party_id == applicant_party:
        return Authorization(True)
    return Authorization(False, "not owner")


def authorize_internal(session: Session) -> Authorization:
    if session.internal:
        return Authorization(True)
    return Authorization(False, "reserved to NCA staff")


def authorize_event(session: Session, state: CivState, kind: EventKind) -> tuple[Authorization, Optional[Role]]:
    """Lifecycle gate: first session role the guard table permits wins."""
    last_reason = f"no role of this session may {kind.value}"
    for role in sorted(session.roles, key=lambda r: r.value):
        decision = is_action_permitted(state, role, kind)
        if decision.permitted:
            return Authorization(True), role
        last_reason = decision.reason
    return Authorization(False, last_reason), None
