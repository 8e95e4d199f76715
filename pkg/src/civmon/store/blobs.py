"""Content-addressed blob storage.

Blobs are immutable byte strings addressed by the SHA-256 of their
content, so writes are idempotent and duplicate uploads share storage.
Two backends share one interface: an in-memory dict for tests and a
directory layout `objects/<first-2-hex>/<digest>` for real stores.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional

from civmon.errors import EmptyPayload
from civmon.timeutil import now


def digest_of(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class StoredBlob:
    digest: str
    size: int
    media_type: str
    stored_at: datetime


class BlobStore:
    """In-memory content-addressed store; subclass on disk below."""

    def __init__(self) -> None:
        self._bytes: dict[str, bytes] = {}
        self._meta: dict[str, StoredBlob] = {}
        self._lock = threading.Lock()

    def put(self, payload: bytes, media_type: str = "application/octet-stream") -> StoredBlob:
        if not payload:
            raise EmptyPayload("refusing to store a zero-length blob")
        digest = digest_of(payload)
        with self._lock:
            existing = self._meta.get(digest)
            if existing is not None:
                # Idempotent: same content, same address, original metadata kept.
                return existing
            blob = StoredBlob(digest=digest, size=len(payload), media_type=media_type, stored_at=now())
            self._store(digest, payload)
            self._meta[digest] = blob
            return blob

    def get(self, digest: str) -> bytes:
        payload = self._load(digest)
        if payload is None:
            raise KeyError(f"no blob with digest {digest}")
        return payload

    def exists(self, digest: str) -> bool:
        return self._load(digest) is not None

    def stat(self, digest: str) -> Optional[StoredBlob]:
        return self._meta.get(digest)

    def __len__(self) -> int:
        return len(self._meta)

    # backend hooks ---------------------------------------------------

    def _store(self, digest: str, payload: bytes) -> None:
        self._bytes[digest] = payload

    def _load(self, digest: str) -> Optional[bytes]:
        return self._bytes.get(digest)


class DiskBlobStore(BlobStore):
    """Disk layout: `objects/<first-2-hex>/<digest>`, written atomically."""

    def __init__(self, root: Path) -> None:
        super().__init__()
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)
        for path in (self.root / "objects").glob("*/*"):
            digest = path.name
            self._meta[digest] = StoredBlob(
                digest=digest,
                size=path.stat().st_size,
                media_type="application/octet-stream",
                stored_at=datetime.fromtimestamp(int(path.stat().st_mtime)).astimezone(),
            )

    def _path(self, digest: str) -> Path:
        return self.root / "objects" / digest[:2] / digest

    def _store(self, digest: str, payload: bytes) -> None:
        target = self._path(digest)
        if target.exists():
            return
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(payload)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def _load(self, digest: str) -> Optional[bytes]:
        target = self._path(digest)
        if not target.exists():
            return None
        return target.read_bytes()
