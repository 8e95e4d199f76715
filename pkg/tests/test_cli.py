"""Operator CLI: exit codes, seeding, simulation parity, export parity, locking."""

from __future__ import annotations

import json
import os
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from civmon.cli import (
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    LOCK_NAME,
    main,
    parse_script,
)
from civmon.lifecycle.engine import apply_event, guard_table_tsv
from civmon.lifecycle.model import DRAFT
from civmon.service.app import build_state, create_app
from civmon.service.config import ServiceConfig
from civmon.timeutil import iso

FIG4_SCRIPT = Path("src/civmon/data/scenarios/fig4.script")


def _seed(tmp_path, profile="fig4", extra=()):
    data_dir = tmp_path / "data"
    code = main(["seed", profile, "--data-dir", str(data_dir), *extra])
    return code, data_dir


# -- guard table -------------------------------------------------------------


def test_guard_table_command_prints_the_full_matrix(capsys):
    assert main(["guard-table"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out == guard_table_tsv()
    lines = out.splitlines()
    assert lines[0] == "state\trole\tevents"
    assert len(lines) == 79


# -- simulate -----------------------------------------------------------------


def test_simulate_output_matches_an_independent_fold(capsys):
    assert main(["simulate", str(FIG4_SCRIPT)]) == EXIT_OK
    printed = capsys.readouterr().out.splitlines()

    expected = []
    state = DRAFT
    for _lineno, event in parse_script(FIG4_SCRIPT.read_text(encoding="utf-8")):
        transition = apply_event(state, event, event.role)
        expected.append(
            f"{iso(event.at)}\t{event.kind.value}\t{event.role.value}\t"
            f"{transition.from_state.render()} -> {transition.to_state.render()}"
        )
        state = transition.to_state
    expected.append(f"final state: {state.render()}")

    assert printed == expected
    assert printed[-1] == "final state: investigation:concluded-early"


def test_simulate_honors_the_initial_state_flag(tmp_path, capsys):
    script = tmp_path / "start.script"
    script.write_text("2010-01-05T09:00:00Z\tm-1\tmanufacturer\treport-start\n", encoding="utf-8")
    assert main(["simulate", str(script), "--initial", "evaluation:approved"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[-1] == "final state: investigation:started"


def test_simulate_reports_the_offending_line(tmp_path, capsys):
    script = tmp_path / "bad.script"
    script.write_text(
        "# comment\n"
        "2009-10-08T09:00:00Z\tm-1\tmanufacturer\tsubmit-notification\n"
        "2009-10-09T09:00:00Z\tm-1\tmanufacturer\treport-start\n",
        encoding="utf-8",
    )
    assert main(["simulate", str(script)]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "line 3" in err


def test_simulate_usage_errors(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "missing.script")]) == EXIT_USAGE
    script = tmp_path / "empty.script"
    script.write_text("", encoding="utf-8")
    assert main(["simulate", str(script), "--initial", "limbo"]) == EXIT_USAGE


def test_script_parser_rejects_malformed_lines(tmp_path, capsys):
    script = tmp_path / "malformed.script"
    for content, fragment in (
        ("2009-10-08T09:00:00Z\tm-1\tmanufacturer\n", "event kind"),
        ("not-a-date\tm-1\tmanufacturer\tsubmit-notification\n", "bad timestamp"),
        ("2009-10-08T09:00:00Z\tm-1\tpope\tsubmit-notification\n", "unknown role"),
        ("2009-10-08T09:00:00Z\tm-1\tmanufacturer\tlevitate\n", "unknown event kind"),
        ("2009-10-08T09:00:00Z\tm-1\tmanufacturer\tsubmit-notification\tnoequals\n", "bad payload"),
    ):
        script.write_text(content, encoding="utf-8")
        assert main(["simulate", str(script)]) == EXIT_VALIDATION
        assert fragment in capsys.readouterr().err


# -- seed ----------------------------------------------------------------------


def test_seed_fig4_announces_the_reference_code(tmp_path, capsys):
    code, data_dir = _seed(tmp_path)
    assert code == EXIT_OK
    assert "i.5.i.m.2/6/2009" in capsys.readouterr().out
    assert (data_dir / "dossiers.json").is_file()
    assert (data_dir / "enterprise.json").is_file()
    assert not (data_dir / LOCK_NAME).exists()  # released on exit


def test_seed_is_deterministic_across_runs(tmp_path):
    _, first = _seed(tmp_path / "a", profile="random(10, 42)")
    _, second = _seed(tmp_path / "b", profile="random(10, 42)")
    assert (first / "dossiers.json").read_bytes() == (second / "dossiers.json").read_bytes()
    assert (first / "enterprise.json").read_bytes() == (second / "enterprise.json").read_bytes()


def test_seed_refuses_nonempty_stores_without_force(tmp_path, capsys):
    code, data_dir = _seed(tmp_path)
    assert code == EXIT_OK
    capsys.readouterr()

    assert main(["seed", "fig4", "--data-dir", str(data_dir)]) == EXIT_VALIDATION
    assert "--force" in capsys.readouterr().err

    assert main(["seed", "random(3, 1)", "--data-dir", str(data_dir), "--force"]) == EXIT_OK
    assert "seeded 3 dossiers" in capsys.readouterr().out
    parsed = json.loads((data_dir / "dossiers.json").read_text(encoding="utf-8"))
    assert len(parsed["dossiers"]) == 3


def test_seed_unknown_profile_is_a_usage_error(tmp_path, capsys):
    assert main(["seed", "fig6", "--data-dir", str(tmp_path / "d")]) == EXIT_USAGE
    assert "unknown profile" in capsys.readouterr().err


def test_seed_fig5_reports_the_monitoring_cohort(tmp_path, capsys):
    code, _ = _seed(tmp_path, profile="fig5")
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "seeded 22 dossiers" in out
    for seq in (1, 3, 8, 20):
        assert f"i.5.i.m.2/{seq}/2009" in out


# -- export ----------------------------------------------------------------------


def test_cli_export_bytes_equal_http_export_bytes(tmp_path, capsysbinary):
    _, data_dir = _seed(tmp_path)
    capsysbinary.readouterr()
    code = "i.5.i.m.2/6/2009"

    assert main(["export", code, "--data-dir", str(data_dir)]) == EXIT_OK
    cli_xml = capsysbinary.readouterr().out

    assert main(["export", code, "--data-dir", str(data_dir), "--format", "extract"]) == EXIT_OK
    cli_extract = capsysbinary.readouterr().out

    state = build_state(ServiceConfig(data_dir=data_dir))
    client = TestClient(create_app(state), raise_server_exceptions=False)
    login = client.post("/sessions/internal", json={"username": "secretary", "secret": "secretary-pw"})
    headers = {"Authorization": f"Bearer {login.json()['token']}"}

    http_xml = client.get(f"/dossiers/{code}/export", headers=headers)
    assert http_xml.content == cli_xml

    http_extract = client.get(f"/dossiers/{code}/export", params={"format": "extract"}, headers=headers)
    assert http_extract.content == cli_extract
    assert json.loads(cli_extract)["protocol_code"] == code


def test_export_unknown_code_exits_1(tmp_path, capsys):
    _, data_dir = _seed(tmp_path)
    capsys.readouterr()
    assert main(["export", "i.5.i.m.2/99/2099", "--data-dir", str(data_dir)]) == EXIT_VALIDATION
    assert "no dossier with code" in capsys.readouterr().err


# -- validate ----------------------------------------------------------------------


_FORM = """\
title=Stent study
device.name=Stent
device.risk-class=III
site.1.name=Clinic
site.1.country=IT
site.1.investigator=P. I.
intended-use=support
"""

_REQUIRED = (
    "ethics-committee-opinion",
    "declaration",
    "clinical-protocol",
    "investigator-brochure",
    "risk-analysis",
    "literature-analysis",
    "instructions-for-use",
    "payment-proof",
)


def _write_bundle(directory, omit=()):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "notification.form").write_text(_FORM, encoding="utf-8")
    for doc_type in _REQUIRED:
        if doc_type not in omit:
            (directory / f"{doc_type}.pdf").write_bytes(b"%PDF stub")
    return directory


def test_validate_passes_a_complete_bundle(tmp_path, capsys):
    bundle = _write_bundle(tmp_path / "bundle")
    assert main(["validate", str(bundle), "--data-dir", str(tmp_path / "d")]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_lists_gaps_and_exits_1(tmp_path, capsys):
    bundle = _write_bundle(tmp_path / "bundle", omit=("payment-proof",))
    assert main(["validate", str(bundle), "--data-dir", str(tmp_path / "d")]) == EXIT_VALIDATION
    assert "missing: payment-proof" in capsys.readouterr().out


def test_validate_missing_directory_is_a_usage_error(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nowhere")]) == EXIT_USAGE
    assert "does not exist" in capsys.readouterr().err


# -- store lock ----------------------------------------------------------------------


def test_live_lock_holder_blocks_the_store(tmp_path, capsys):
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    (data_dir / LOCK_NAME).write_text(str(os.getpid()), encoding="utf-8")

    assert main(["seed", "fig4", "--data-dir", str(data_dir)]) == EXIT_VALIDATION
    assert "locked by another process" in capsys.readouterr().err
    # the foreign lock is left untouched
    assert (data_dir / LOCK_NAME).read_text(encoding="utf-8") == str(os.getpid())


def test_stale_lock_is_reclaimed(tmp_path, capsys):
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    (data_dir / LOCK_NAME).write_text("999999999", encoding="utf-8")

    assert main(["seed", "fig4", "--data-dir", str(data_dir)]) == EXIT_OK
    assert not (data_dir / LOCK_NAME).exists()


def test_garbage_lock_content_counts_as_stale(tmp_path):
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    (data_dir / LOCK_NAME).write_text("not-a-pid", encoding="utf-8")
    assert main(["seed", "fig4", "--data-dir", str(data_dir)]) == EXIT_OK
