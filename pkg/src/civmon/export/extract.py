"""Registry extract: the minimal interop dataset derived from a dossier.

The field set is this service's own definition of a compact
trial-registry record; it makes no conformance claim to any published
minimum dataset. Every field is populated or explicitly null and the
order below is the stable wire order.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

from civmon.domain.model import Dossier, MedicalDevice
from civmon.errors import WrongState


@dataclass(frozen=True)
class RegistryExtract:
    protocol_code: Optional[str]
    title: str
    sponsor: str  # manufacturer legal name
    applicant: str
    applicant_role: str
    submitted_on: Optional[str]
    state: str
    design: Optional[str]
    population: tuple[str, ...]
    intended_use: str
    multi_centric: bool
    sites_count: int
    site_countries: tuple[str, ...]
    device_name: Optional[str]
    device_variant: str
    risk_classes: tuple[str, ...]
    comparator_kind: Optional[str]
    started_on: Optional[str]
    ended_on: Optional[str]
    terminated_early_on: Optional[str]
    sae_count: int

    def to_dict(self) -> dict:
        # field declaration order is the stable output order
        return {f.name: getattr(self, f.name) for f in fields(self)}


def registry_extract(dossier: Dossier) -> RegistryExtract:
    """Project a submitted dossier onto the extract field set."""
    if not dossier.notification.submitted:
        raise WrongState("registry extracts cover submitted dossiers only")
    civ = dossier.civ
    devices = civ.device.devices
    comparator_kind = None
    if civ.comparator is not None:
        comparator_kind = "device" if civ.comparator.device is not None else "drug"
    return RegistryExtract(
        protocol_code=dossier.code,
        title=civ.title,
        sponsor=dossier.manufacturer.name,
        applicant=dossier.applicant.name,
        applicant_role=dossier.notification.applicant_role.value,
        submitted_on=dossier.notification.submitted_at.date().isoformat()
        if dossier.notification.submitted_at
        else None,
        state=dossier.state,
        design=civ.design.value if civ.design else None,
        population=tuple(sorted(civ.population)),
        intended_use=civ.intended_use,
        multi_centric=civ.multi_centric,
        sites_count=len(civ.sites),
        site_countries=tuple(sorted({site.country for site in civ.sites})),
        device_name=devices[0].name if devices else None,
        device_variant=civ.device.variant.value,
        risk_classes=tuple(sorted({d.risk_class for d in devices})),
        comparator_kind=comparator_kind,
        started_on=civ.started_on.isoformat() if civ.started_on else None,
        ended_on=civ.ended_on.isoformat() if civ.ended_on else None,
        terminated_early_on=civ.terminated_early_on.isoformat() if civ.terminated_early_on else None,
        sae_count=len(civ.sae_reports),
    )
