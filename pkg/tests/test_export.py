"""Canonical XML round-trip, registry extract, archival rendering."""

import random

import pytest

from civmon.domain.model import Dossier
from civmon.domain.catalogs import default_catalogs
from civmon.errors import SchemaViolation, WrongState
from civmon.export.archival import HmacSigner, render_archival, render_lines
from civmon.export.extract import registry_extract
from civmon.export.xml_io import export_dossier, import_dossier, load_schema
from civmon.fixtures import seed_fig4, seed_random
from civmon.store.blobs import BlobStore
from civmon.store.dossiers import DossierStore
from civmon.store.enterprise import EnterpriseStore


def _populate(n=40, seed=7):
    enterprise = EnterpriseStore()
    store = DossierStore(BlobStore(), catalogs=default_catalogs())
    seed_random(enterprise, store, n=n, seed=seed)
    return enterprise, store


def _submitted_keys(store):
    return [k for k in store.keys() if store.snapshot(k).notification.submitted]


# -- XML round-trip ----------------------------------------------------------


def test_round_trip_preserves_structure(catalogs):
    _, store = _populate(n=30, seed=11)
    for key in store.keys():
        original = store.snapshot(key)
        payload = export_dossier(original)
        imported, report = import_dossier(payload)
        assert report.ok, report.describe()
        assert isinstance(imported, Dossier)
        assert imported.key == original.key
        assert imported.code == original.code
        assert imported.state == original.state
        assert imported.civ == original.civ
        assert imported.applicant == original.applicant
        assert imported.manufacturer == original.manufacturer
        assert imported.notification == original.notification
        assert imported.documents == original.documents
        assert imported.communications == original.communications
        assert imported.audit == original.audit


def test_export_is_deterministic_across_runs():
    _, store_a = _populate(n=25, seed=99)
    _, store_b = _populate(n=25, seed=99)
    keys_a = sorted(store_a.keys())
    keys_b = sorted(store_b.keys())
    assert keys_a == keys_b
    for key in keys_a:
        assert export_dossier(store_a.snapshot(key)) == export_dossier(store_b.snapshot(key))


def test_double_round_trip_is_stable():
    _, store = _populate(n=10, seed=5)
    for key in store.keys():
        payload = export_dossier(store.snapshot(key))
        imported, _ = import_dossier(payload)
        assert export_dossier(imported) == payload


def test_import_rejects_malformed_payloads():
    with pytest.raises(SchemaViolation):
        import_dossier(b"not xml at all")
    with pytest.raises(SchemaViolation):
        import_dossier(b"<wrong-root/>")


def test_import_rejects_schema_violations():
    _, store = _populate(n=3, seed=2)
    key = _submitted_keys(store)[0]
    payload = export_dossier(store.snapshot(key))
    # drop a mandatory attribute
    broken = payload.replace(b' state="', b' renamed="', 1)
    with pytest.raises(SchemaViolation):
        import_dossier(broken)


def test_import_rejects_malformed_digest():
    _, store = _populate(n=5, seed=3)
    keys = [k for k in _submitted_keys(store) if store.snapshot(k).documents]
    key = keys[0]
    payload = export_dossier(store.snapshot(key))
    digest = store.snapshot(key).documents[0].digest.encode()
    # truncated digest: no longer 64 hex characters
    broken = payload.replace(digest, digest[:10], 1)
    assert broken != payload
    with pytest.raises(SchemaViolation):
        import_dossier(broken)


def test_schema_loads_and_names_dossier_root():
    schema = load_schema()
    assert schema["root"] == "dossier"


# -- registry extract ---------------------------------------------------------


def test_extract_rejects_unsubmitted(store):
    from civmon.domain.model import (
        ClinicalInvestigation,
        InvestigationalDevice,
        InvestigationalSite,
        MedicalDevice,
        Party,
        PartyKind,
        Role,
    )
    from civmon.timeutil import utc

    party = Party(id="m-1", kind=PartyKind.APPLICANT_ORGANIZATION, name="Acme")
    civ = ClinicalInvestigation(
        title="Draft",
        device=InvestigationalDevice.single(MedicalDevice(name="Stent", risk_class="III")),
        sites=(InvestigationalSite(code="s-1", name="Clinic", country="IT", investigator="X"),),
        intended_use="support",
    )
    key = store.create_draft(party, party, Role.MANUFACTURER, civ, actor=party.id, at=utc(2009, 1, 1))
    with pytest.raises(WrongState):
        registry_extract(store.snapshot(key))


def test_extract_field_order_is_stable():
    _, store = _populate(n=5, seed=13)
    key = _submitted_keys(store)[0]
    extract = registry_extract(store.snapshot(key)).to_dict()
    assert list(extract) == [
        "protocol_code",
        "title",
        "sponsor",
        "applicant",
        "applicant_role",
        "submitted_on",
        "state",
        "design",
        "population",
        "intended_use",
        "multi_centric",
        "sites_count",
        "site_countries",
        "device_name",
        "device_variant",
        "risk_classes",
        "comparator_kind",
        "started_on",
        "ended_on",
        "terminated_early_on",
        "sae_count",
    ]


def test_extract_reflects_fig4_course(enterprise, store, signer):
    seed_fig4(enterprise, store, signer=signer)
    key = store.key_for_code("i.5.i.m.2/6/2009")
    extract = registry_extract(store.snapshot(key))
    assert extract.protocol_code == "i.5.i.m.2/6/2009"
    assert extract.state == "investigation:concluded-early"
    assert extract.submitted_on == "2009-10-08"
    assert extract.started_on == "2009-12-20"
    assert extract.terminated_early_on == "2010-05-09"
    assert extract.ended_on is None
    assert extract.sae_count == 3
    assert extract.sponsor == "Medica Italiana S.p.A."


# -- archival rendering ---------------------------------------------------------


def test_render_lines_align_and_sort():
    lines = render_lines({"bb": "2", "a": "1\ncontinued"}, "Title")
    assert lines[1] == "Title"
    assert lines[4] == "a  : 1"
    assert lines[5] == "     continued"
    assert lines[6] == "bb : 2"


def test_archival_pagination_footers():
    signer = HmacSigner(b"k")
    long_form = {f"field-{i:03d}": f"value {i}" for i in range(100)}
    document = render_archival(long_form, signer, title="Long record")
    text = document.content.decode()
    footers = [line for line in text.splitlines() if line.startswith("-- page ")]
    pages = len(footers)
    assert pages > 1
    assert footers == [f"-- page {i} of {pages} --" for i in range(1, pages + 1)]


def test_archival_source_digest_tracks_form_not_layout():
    signer = HmacSigner(b"k")
    a = render_archival({"x": "1", "y": "2"}, signer, title="One title")
    b = render_archival({"y": "2", "x": "1"}, signer, title="Another title")
    assert a.source_digest == b.source_digest  # same data, any order or title
    assert a.content != b.content


def test_archival_requires_signer():
    from civmon.errors import SignerUnavailable

    with pytest.raises(SignerUnavailable):
        render_archival({"x": "1"}, None)
