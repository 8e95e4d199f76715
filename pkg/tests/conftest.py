"""Shared fixtures: in-memory stores, seeded users, HTTP clients."""

from __future__ import annotations

from datetime import timedelta

import pytest

from civmon.domain.catalogs import default_catalogs
from civmon.export.archival import HmacSigner
from civmon.export.vocab import VocabularyIndex
from civmon.store.blobs import BlobStore
from civmon.store.dossiers import DossierStore
from civmon.store.enterprise import EnterpriseStore
from civmon.timeutil import utc


@pytest.fixture(scope="session")
def catalogs():
    return default_catalogs()


@pytest.fixture(scope="session")
def vocab():
    return VocabularyIndex.default()


@pytest.fixture
def enterprise():
    return EnterpriseStore()


@pytest.fixture
def store(catalogs):
    return DossierStore(BlobStore(), catalogs=catalogs)


@pytest.fixture
def signer():
    return HmacSigner(b"test-signing-key")


class TickClock:
    """Deterministic clock handing out strictly increasing timestamps."""

    def __init__(self, start=None, step=timedelta(minutes=5)):
        self.now = start or utc(2009, 1, 5, 8, 0)
        self.step = step

    def __call__(self):
        self.now = self.now + self.step
        return self.now

    def advance(self, delta: timedelta):
        self.now = self.now + delta
        return self.now


@pytest.fixture
def clock():
    return TickClock()
