"""Content-addressed blob store: digests, dedup, disk layout."""

import random

import pytest

from civmon.errors import EmptyPayload
from civmon.store.blobs import BlobStore, DiskBlobStore, digest_of


def test_digest_is_sha256_hex():
    blob = BlobStore().put(b"payload")
    assert blob.digest == digest_of(b"payload")
    assert len(blob.digest) == 64
    assert all(c in "0123456789abcdef" for c in blob.digest)


def test_get_after_put_round_trip():
    store = BlobStore()
    blob = store.put(b"some bytes", media_type="application/pdf")
    assert store.get(blob.digest) == b"some bytes"
    assert store.stat(blob.digest).media_type == "application/pdf"


def test_duplicate_content_deduplicates():
    store = BlobStore()
    first = store.put(b"same")
    second = store.put(b"same")
    assert first.digest == second.digest
    assert len(store) == 1


def test_distinct_content_distinct_digests():
    store = BlobStore()
    assert store.put(b"a").digest != store.put(b"b").digest


def test_empty_payload_rejected():
    with pytest.raises(EmptyPayload):
        BlobStore().put(b"")


def test_get_unknown_digest_raises():
    with pytest.raises(KeyError):
        BlobStore().get("0" * 64)


def test_property_store_matches_dict_model():
    # >=1000 random operations against a plain-dict reference model
    rng = random.Random(424242)
    store = BlobStore()
    model: dict[str, bytes] = {}
    payloads = [bytes([rng.randrange(256) for _ in range(rng.randint(1, 64))]) for _ in range(120)]
    operations = 0
    for _ in range(1100):
        operations += 1
        action = rng.random()
        if action < 0.5 or not model:
            payload = rng.choice(payloads)
            blob = store.put(payload)
            expected = digest_of(payload)
            assert blob.digest == expected
            model[expected] = payload
        elif action < 0.85:
            digest = rng.choice(sorted(model))
            assert store.get(digest) == model[digest]
        else:
            digest = rng.choice(sorted(model))
            assert store.exists(digest)
            stat = store.stat(digest)
            assert stat is not None and stat.size == len(model[digest])
    assert operations >= 1000
    assert len(store) == len(model)
    for digest, payload in model.items():
        assert store.get(digest) == payload


def test_disk_store_round_trip(tmp_path):
    store = DiskBlobStore(tmp_path / "blobs")
    blob = store.put(b"disk payload")
    assert store.get(blob.digest) == b"disk payload"
    # a new handle over the same directory sees the same content
    reopened = DiskBlobStore(tmp_path / "blobs")
    assert reopened.get(blob.digest) == b"disk payload"
    assert reopened.exists(blob.digest)


def test_disk_store_shards_by_prefix(tmp_path):
    store = DiskBlobStore(tmp_path / "blobs")
    blob = store.put(b"sharded")
    children = [p for p in (tmp_path / "blobs" / "objects").iterdir() if p.is_dir()]
    assert children, "expected fan-out directories"
    assert blob.digest[:2] in {p.name for p in children}
    stored = tmp_path / "blobs" / "objects" / blob.digest[:2] / blob.digest
    assert stored.read_bytes() == b"sharded"
