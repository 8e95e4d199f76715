"""Enterprise data: parties, access grants, delegations, registrations.

Kept apart from dossier data on purpose: dossiers snapshot the party
values they reference, so losing or wiping this store never corrupts
dossier history.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from civmon.domain.model import (
    Delegation,
    Party,
    PartyKind,
    Role,
    Violation,
    EXTERNAL_ROLES,
    INTERNAL_ROLES,
)
from civmon.errors import DomainValidationError, NotAuthorized, StoreConflict
from civmon.timeutil import iso, parse_iso


class RegistrationStatus(str, Enum):
    PENDING = "pending"
    GRANTED = "granted"
    DENIED = "denied"


@dataclass(frozen=True)
class RegistrationRequest:
    id: str
    organization: Party
    requested_roles: tuple[Role, ...]
    submitted_at: datetime
    delegating_manufacturer: Optional[Party] = None
    status: RegistrationStatus = RegistrationStatus.PENDING
    granted_party: Optional[str] = None


def _hash_credential(secret: str) -> str:
    return hashlib.sha256(secret.encode("utf-8")).hexdigest()


class EnterpriseStore:
    def __init__(self, path: Optional[Path] = None) -> None:
        self.path = Path(path) if path is not None else None
        self._parties: dict[str, Party] = {}
        self._grants: dict[str, frozenset[Role]] = {}
        self._credentials: dict[str, tuple[str, str]] = {}  # username -> (hash, party id)
        self._delegations: list[Delegation] = []
        self._registrations: dict[str, RegistrationRequest] = {}
        self._counter = 0
        self._lock = threading.RLock()
        if self.path is not None and self.path.exists():
            self._load()

    # -- parties and grants ---------------------------------------------

    def _next_id(self, prefix: str) -> str:
        with self._lock:
            self._counter += 1
            return f"{prefix}-{self._counter}"

    def next_party_id(self) -> str:
        return self._next_id("p")

    def add_party(self, party: Party) -> Party:
        with self._lock:
            if party.id in self._parties:
                raise StoreConflict(f"party {party.id} already exists")
            self._parties[party.id] = party
            return party

    def party(self, party_id: str) -> Party:
        try:
            return self._parties[party_id]
        except KeyError:
            raise KeyError(f"no party with id {party_id!r}") from None

    def parties(self) -> list[Party]:
        return list(self._parties.values())

    def roles_of(self, party_id: str) -> frozenset[Role]:
        return self._grants.get(party_id, frozenset())

    def granted(self, party_id: str) -> bool:
        return bool(self._grants.get(party_id))

    def grant(self, party_id: str, roles: Iterable[Role] | Role) -> None:
        # a bare Role is a str and would iterate as characters
        if isinstance(roles, Role):
            roles = (roles,)
        with self._lock:
            self.party(party_id)
            self._grants[party_id] = self.roles_of(party_id) | frozenset(roles)

    def add_internal_user(
        self,
        username: str,
        secret: str,
        name: str,
        roles: Iterable[Role],
        party_id: Optional[str] = None,
    ) -> Party:
        """Provision an NCA-side account with internal roles only."""
        roles = frozenset(roles)
        if not roles or not roles <= INTERNAL_ROLES:
            raise DomainValidationError(
                [Violation("user.roles", "internal users carry internal roles only")]
            )
        with self._lock:
            if username in self._credentials:
                raise StoreConflict(f"username {username!r} already provisioned")
            party = Party(
                id=party_id or self._next_id("u"),
                kind=PartyKind.NCA_USER,
                name=name,
            )
            self.add_party(party)
            self._grants[party.id] = roles
            self._credentials[username] = (_hash_credential(secret), party.id)
            return party

    def verify_credential(self, username: str, secret: str) -> Optional[str]:
        """Party id for a valid internal credential, else None."""
        entry = self._credentials.get(username)
        if entry is None:
            return None
        digest, party_id = entry
        if digest != _hash_credential(secret):
            return None
        return party_id

    # -- delegations ------------------------------------------------------

    def add_delegation(self, delegation: Delegation) -> None:
        with self._lock:
            self._delegations.append(delegation)

    def delegations(self) -> tuple[Delegation, ...]:
        return tuple(self._delegations)

    def has_valid_delegation(self, delegate: str, delegator: str, when: date) -> bool:
        return any(
            d.delegate == delegate and d.delegator == delegator and d.covers(when)
            for d in self._delegations
        )

    # -- registration workflow --------------------------------------------

    def register(
        self,
        organization: Party,
        requested_roles: Iterable[Role],
        submitted_at: datetime,
        delegating_manufacturer: Optional[Party] = None,
    ) -> RegistrationRequest:
        roles = tuple(requested_roles)
        problems: list[Violation] = []
        if not roles:
            problems.append(Violation("registration.roles", "at least one role must be requested"))
        if any(role not in EXTERNAL_ROLES for role in roles):
            problems.append(Violation("registration.roles", "applicants may request external roles only"))
        if Role.AUTHORIZED_REPRESENTATIVE in roles and delegating_manufacturer is None:
            problems.append(
                Violation(
                    "registration.delegation",
                    "representative registration requires the delegating manufacturer data",
                )
            )
        if problems:
            raise DomainValidationError(problems)
        with self._lock:
            duplicate = any(
                r.organization.name == organization.name and r.status is not RegistrationStatus.DENIED
                for r in self._registrations.values()
            )
            if duplicate:
                raise StoreConflict(f"organization {organization.name!r} already registered")
            request = RegistrationRequest(
                id=self._next_id("reg"),
                organization=organization,
                requested_roles=roles,
                submitted_at=submitted_at,
                delegating_manufacturer=delegating_manufacturer,
            )
            self._registrations[request.id] = request
            return request

    def registration(self, reg_id: str) -> RegistrationRequest:
        try:
            return self._registrations[reg_id]
        except KeyError:
            raise KeyError(f"no registration with id {reg_id!r}") from None

    def registrations(self, status: Optional[RegistrationStatus] = None) -> list[RegistrationRequest]:
        out = list(self._registrations.values())
        if status is not None:
            out = [r for r in out if r.status is status]
        return out

    def _decide_registration(
        self, reg_id: str, actor: str, status: RegistrationStatus
    ) -> RegistrationRequest:
        if Role.ADMINISTRATIVE_SECRETARY not in self.roles_of(actor):
            raise NotAuthorized("registration decisions are reserved to the administrative secretary")
        with self._lock:
            request = self.registration(reg_id)
            if request.status is not RegistrationStatus.PENDING:
                raise StoreConflict(f"registration {reg_id} already {request.status.value}")
            granted_party: Optional[str] = None
            if status is RegistrationStatus.GRANTED:
                organization = request.organization
                if organization.id in self._parties:
                    raise StoreConflict(f"party {organization.id} already exists")
                self.add_party(organization)
                self._grants[organization.id] = frozenset(request.requested_roles)
                granted_party = organization.id
                if request.delegating_manufacturer is not None:
                    manufacturer = request.delegating_manufacturer
                    if manufacturer.id not in self._parties:
                        self.add_party(manufacturer)
                        self._grants.setdefault(manufacturer.id, frozenset({Role.MANUFACTURER}))
                    self._delegations.append(
                        Delegation(
                            delegator=manufacturer.id,
                            delegate=organization.id,
                            valid_from=request.submitted_at.date(),
                            valid_to=date(request.submitted_at.year + 5, 12, 31),
                        )
                    )
            decided = RegistrationRequest(
                id=request.id,
                organization=request.organization,
                requested_roles=request.requested_roles,
                submitted_at=request.submitted_at,
                delegating_manufacturer=request.delegating_manufacturer,
                status=status,
                granted_party=granted_party,
            )
            self._registrations[reg_id] = decided
            return decided

    def approve_registration(self, reg_id: str, actor: str) -> RegistrationRequest:
        return self._decide_registration(reg_id, actor, RegistrationStatus.GRANTED)

    def deny_registration(self, reg_id: str, actor: str) -> RegistrationRequest:
        return self._decide_registration(reg_id, actor, RegistrationStatus.DENIED)

    # -- persistence --------------------------------------------------------

    def to_json(self) -> str:
        from civmon import serialize

        with self._lock:
            payload = {
                "parties": [serialize.party_to_dict(p) for p in self._parties.values()],
                "grants": {pid: sorted(r.value for r in roles) for pid, roles in sorted(self._grants.items())},
                "credentials": {
                    username: {"digest": digest, "party": party_id}
                    for username, (digest, party_id) in sorted(self._credentials.items())
                },
                "delegations": [
                    {
                        "delegator": d.delegator,
                        "delegate": d.delegate,
                        "valid_from": d.valid_from.isoformat(),
                        "valid_to": d.valid_to.isoformat(),
                    }
                    for d in self._delegations
                ],
                "registrations": [
                    {
                        "id": r.id,
                        "organization": serialize.party_to_dict(r.organization),
                        "requested_roles": [role.value for role in r.requested_roles],
                        "submitted_at": iso(r.submitted_at),
                        "delegating_manufacturer": serialize.party_to_dict(r.delegating_manufacturer)
                        if r.delegating_manufacturer
                        else None,
                        "status": r.status.value,
                        "granted_party": r.granted_party,
                    }
                    for r in self._registrations.values()
                ],
                "counter": self._counter,
            }
        return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"

    def save(self) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(self.to_json(), encoding="utf-8")

    def _load(self) -> None:
        from civmon import serialize

        payload = json.loads(self.path.read_text(encoding="utf-8"))  # type: ignore[union-attr]
        for data in payload.get("parties", ()):
            party = serialize.party_from_dict(data)
            self._parties[party.id] = party
        self._grants = {
            pid: frozenset(Role(r) for r in roles) for pid, roles in payload.get("grants", {}).items()
        }
        self._credentials = {
            username: (entry["digest"], entry["party"])
            for username, entry in payload.get("credentials", {}).items()
        }
        self._delegations = [
            Delegation(
                delegator=d["delegator"],
                delegate=d["delegate"],
                valid_from=date.fromisoformat(d["valid_from"]),
                valid_to=date.fromisoformat(d["valid_to"]),
            )
            for d in payload.get("delegations", ())
        ]
        for data in payload.get("registrations", ()):
            request = RegistrationRequest(
                id=data["id"],
                organization=serialize.party_from_dict(data["organization"]),
                requested_roles=tuple(Role(r) for r in data.get("requested_roles", ())),
                submitted_at=parse_iso(data["submitted_at"]),
                delegating_manufacturer=serialize.party_from_dict(data["delegating_manufacturer"])
                if data.get("delegating_manufacturer")
                else None,
                status=RegistrationStatus(data.get("status", "pending")),
                granted_party=data.get("granted_party"),
            )
            self._registrations[request.id] = request
        self._counter = payload.get("counter", 0)
