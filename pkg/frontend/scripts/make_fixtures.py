"""Regenerate the frontend test fixtures from the backend.

The web client must agree with the service byte-for-byte on query
encodings and render exactly what the API serves, so the expected
values in frontend/tests/fixtures/ are produced here by the backend
itself rather than written by hand.

Run from the repository root:

    python3 frontend/scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import random
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from civmon import fixtures, timeutil
from civmon.cli import guard_table_tsv
from civmon.domain.catalogs import default_catalogs
from civmon.intake.bundle import parse_form, validate_bundle
from civmon.search.query import QUERY_KEYS, Query, to_query_string
from civmon.service.app import build_state, create_app
from civmon.service.auth import mint_sso_token
from civmon.service.config import ServiceConfig

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

_STATES = [
    "draft",
    "submitted",
    "evaluation:in-progress",
    "evaluation:approved",
    "investigation:started",
    "investigation:concluded",
]
_TEXTS = [
    "Acme Medical",
    "sonda cardiaca",
    "spaced out name",
    "tilde~dot.dash-ok_",
    "reserved &?=/+#",
    "strict !*'()",
    "percent 100%",
    'quoted "x"',
    "caffè società",
    "plus+sign",
]


def _query_cases() -> list[dict]:
    rng = random.Random(20_10)
    cases: list[dict] = []

    def add(filters: dict, query: Query) -> None:
        cases.append({"filters": filters, "encoded": to_query_string(query)})

    add({}, Query())
    add(
        {"applicant-role": ["manufacturer"], "year": [2009], "state": ["investigation:concluded"]},
        Query(applicant_roles=("manufacturer",), years=(2009,), states=("investigation:concluded",)),
    )
    # unsorted, duplicated multi values must come out sorted and unique
    add(
        {"year": [2010, 2009, 2009, 2008], "state": ["submitted", "draft", "submitted"]},
        Query(years=(2010, 2009, 2009, 2008), states=("submitted", "draft", "submitted")),
    )
    # empty singles are dropped, booleans keep their spelling
    add(
        {"company": "", "releases-drug": True, "product-type": "kit"},
        Query(company_name="", releases_drug=True, product_type="kit"),
    )
    add({"releases-drug": False}, Query(releases_drug=False))
    for text in _TEXTS:
        add({"company": text, "title": text}, Query(company_name=text, title=text))
    for _ in range(30):
        filters: dict = {}
        kwargs: dict = {}
        for key, attr, kind in QUERY_KEYS:
            if rng.random() < 0.6:
                continue
            if kind == "single":
                value = rng.choice(_TEXTS)
                filters[key] = value
                kwargs[attr] = value
            elif kind == "bool":
                value = rng.random() < 0.5
                filters[key] = value
                kwargs[attr] = value
            elif kind == "multi-int":
                values = [rng.randint(2007, 2011) for _ in range(rng.randint(1, 4))]
                filters[key] = values
                kwargs[attr] = tuple(values)
            else:
                pool = _STATES if key == "state" else _TEXTS
                values = [rng.choice(pool) for _ in range(rng.randint(1, 3))]
                filters[key] = values
                kwargs[attr] = tuple(values)
        add(filters, Query(**kwargs))
    return cases


def _reference_dossier() -> dict:
    with tempfile.TemporaryDirectory() as scratch:
        return _reference_dossier_in(Path(scratch))


def _reference_dossier_in(scratch: Path) -> dict:
    config = ServiceConfig(
        data_dir=scratch, signer_key="fixture-signing-key", sso_key="fixture-sso-key"
    )
    state = build_state(config)
    code = fixtures.seed_fig4(state.enterprise, state.store)
    client = TestClient(create_app(state))

    staff = client.post(
        "/sessions/internal", json={"username": "secretary", "secret": "secretary-pw"}
    ).json()["token"]
    detail = client.get(f"/dossiers/{code}", headers={"authorization": f"Bearer {staff}"}).json()

    sso = mint_sso_token(detail["applicant"]["id"], timeutil.utc(2100, 1, 1), config.sso_key)
    applicant = client.post("/sessions/sso", json={"token": sso}).json()["token"]

    def get(path: str, token: str) -> dict:
        response = client.get(path, headers={"authorization": f"Bearer {token}"})
        response.raise_for_status()
        return response.json()

    return {
        "detail": get(f"/dossiers/{code}", applicant),
        "timeline": get(f"/dossiers/{code}/timeline?order=desc", applicant),
        "open_requests": get(f"/dossiers/{code}/open-requests", applicant),
        "allowed": {
            "applicant": get(f"/dossiers/{code}/allowed-actions", applicant),
            "secretary": get(f"/dossiers/{code}/allowed-actions", staff),
        },
    }


def _wizard_bundle() -> dict:
    """A form + document set the CLI accepts, in the client's canonical layout."""
    form = {
        "title": "Stent study",
        "device.name": "Stent",
        "device.risk-class": "III",
        "site.1.name": "Clinic",
        "site.1.country": "IT",
        "site.1.investigator": "P. I.",
        "intended-use": "support",
    }
    form_text = "".join(f"{key}={form[key]}\n" for key in sorted(form))
    doc_types = [
        "clinical-protocol",
        "declaration",
        "ethics-committee-opinion",
        "instructions-for-use",
        "investigator-brochure",
        "literature-analysis",
        "payment-proof",
        "risk-analysis",
    ]
    assert parse_form(form_text) == form
    with tempfile.TemporaryDirectory() as scratch:
        bundle = Path(scratch)
        (bundle / "notification.form").write_text(form_text, encoding="utf-8")
        for doc_type in doc_types:
            (bundle / f"{doc_type}.pdf").write_bytes(b"%PDF stub")
        report = validate_bundle(bundle, default_catalogs())
        assert report.ok, report.describe()
    return {
        "form": form,
        "formText": form_text,
        "files": ["notification.form"] + [f"{d}.pdf" for d in doc_types],
    }


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "query-parity.json").write_text(
        json.dumps(_query_cases(), indent=2, ensure_ascii=False) + "\n"
    )
    (OUT / "guard-table.tsv").write_text(guard_table_tsv())
    (OUT / "reference-dossier.json").write_text(
        json.dumps(_reference_dossier(), indent=2, ensure_ascii=False) + "\n"
    )
    (OUT / "wizard-bundle.json").write_text(
        json.dumps(_wizard_bundle(), indent=2, ensure_ascii=False) + "\n"
    )
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
