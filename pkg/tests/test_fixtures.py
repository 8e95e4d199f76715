"""Seed profiles: the reference dossier, the monitoring cohort, random populations."""

from __future__ import annotations

from datetime import timedelta

import pytest

from civmon import fixtures
from civmon.domain.model import DecisionOutcome, Role
from civmon.store.dossiers import TimelineKind
from civmon.timeutil import utc


@pytest.fixture
def fig4(enterprise, store):
    code = fixtures.seed_fig4(enterprise, store)
    return code, store.key_for_code(code)


# -- reference dossier --------------------------------------------------------


def test_reference_dossier_identity(fig4, store):
    code, key = fig4
    snap = store.snapshot(key)
    assert code == "i.5.i.m.2/6/2009"
    assert snap.state == "investigation:concluded-early"
    assert snap.applicant.name == "Medica Italiana S.p.A."
    assert store.verify_replay(key)

    assert snap.team.supervisor.name == "S. Viola"
    assert snap.team.technical.name == "A. B."
    assert snap.team.medical.name == "I. L."
    assert store.decision(key).outcome is DecisionOutcome.APPROVE

    assert snap.civ.started_on == utc(2009, 12, 20).date()
    assert snap.civ.terminated_early_on == utc(2010, 5, 9).date()
    assert snap.civ.ended_on is None
    assert len(snap.civ.sae_reports) == 3


def test_reference_timeline_document_rows(fig4, store):
    _, key = fig4
    rows = [e for e in store.timeline(key) if e.kind is TimelineKind.DOCUMENT]
    # newest first; the two same-instant SAE filings keep latest-filed first
    assert [e.label for e in rows] == [
        "Conclusione anticipata",
        "Evento avverso finale 2",
        "Evento avverso iniziale 2",
        "Evento avverso iniziale 1",
        "Inizio sperimentazione",
        "Notifica approvata",
        "Notification i.5.i.m.2/6/2009",
    ]
    assert len(rows[-1].refs) == 8  # the sealed submission bundle travels as one row


def test_reference_timeline_is_a_strict_mirror(fig4, store):
    _, key = fig4
    descending = store.timeline(key)
    ascending = store.timeline(key, ascending=True)
    assert descending == list(reversed(ascending))
    assert ascending[0].kind is TimelineKind.STATE_CHANGE
    assert ascending[0].label == "initialize-notification -> draft"


def test_reference_dossier_has_one_open_question(fig4, store):
    _, key = fig4
    pending = store.open_requests(key)
    assert [c.body for c in pending] == ["Motivazioni conclusione anticipata"]
    assert pending[0].sent_at == utc(2010, 5, 9, 10, 0)

    # the earlier question was answered and must not reappear
    assert all(c.comm_type == "info-request" for c in pending)
    answered = [c for c in store.snapshot(key).communications if c.in_reply_to]
    assert len(answered) == 1


# -- monitoring cohort ----------------------------------------------------------


@pytest.fixture
def fig5(enterprise, store):
    return fixtures.seed_fig5(enterprise, store)


def test_monitoring_cohort_size_and_reference_codes(fig5, store):
    assert len(store.snapshots()) == 22
    assert fig5 == [f"i.5.i.m.2/{seq}/2009" for seq in (1, 3, 8, 20)]


def test_monitoring_cohort_state_distribution(fig5, store):
    tally: dict[str, int] = {}
    for snap in store.snapshots():
        tally[snap.state] = tally.get(snap.state, 0) + 1
    assert tally == {
        "investigation:concluded": 6,
        "investigation:started": 4,
        "investigation:concluded-early": 2,
        "investigation:awaiting-start": 1,
        "submitted": 2,
        "evaluation:in-progress": 2,
        "evaluation:denied": 1,
        "evaluation:approved": 1,
        "evaluation:info-requested": 1,
        "evaluation:oriented-toward-denial": 1,
        "closed:notification-concluded": 1,
    }


def test_monitoring_cohort_replays_cleanly(fig5, store):
    for key in store.keys():
        assert store.verify_replay(key), key


def test_monitoring_cohort_codes_are_dense_per_year(fig5, store):
    by_year: dict[int, list[int]] = {}
    for snap in store.snapshots():
        assert snap.code is not None
        _prefix, seq, year = snap.code.rsplit("/", 2)
        by_year.setdefault(int(year), []).append(int(seq))
    for year, seqs in by_year.items():
        assert sorted(seqs) == list(range(1, len(seqs) + 1)), year
    assert sorted(by_year) == [2009, 2010]
    assert len(by_year[2009]) == 20


# -- random populations -----------------------------------------------------------


def _population(n, seed, catalogs):
    from civmon.store.blobs import BlobStore
    from civmon.store.dossiers import DossierStore
    from civmon.store.enterprise import EnterpriseStore

    enterprise = EnterpriseStore()
    store = DossierStore(BlobStore(), catalogs=catalogs)
    keys = fixtures.seed_random(enterprise, store, n, seed)
    return enterprise, store, keys


def test_random_seed_is_reproducible(catalogs):
    _, first, keys_a = _population(25, 99, catalogs)
    _, second, keys_b = _population(25, 99, catalogs)
    assert keys_a == keys_b
    assert first.to_json() == second.to_json()


def test_different_seeds_diverge(catalogs):
    _, first, _ = _population(25, 99, catalogs)
    _, second, _ = _population(25, 100, catalogs)
    assert first.to_json() != second.to_json()


def test_random_population_is_internally_consistent(catalogs):
    _, store, keys = _population(40, 7, catalogs)
    assert len(keys) == 40
    states = set()
    for key in keys:
        assert store.verify_replay(key), key
        states.add(store.state(key).render())
    # the generator exercises drafting, evaluation and investigation layers
    assert "draft" in states
    assert len(states) >= 4

    by_year: dict[int, list[int]] = {}
    for snap in store.snapshots():
        if snap.code is None:
            assert snap.state == "draft"
            continue
        _prefix, seq, year = snap.code.rsplit("/", 2)
        by_year.setdefault(int(year), []).append(int(seq))
    for year, seqs in by_year.items():
        assert sorted(seqs) == list(range(1, len(seqs) + 1)), year
