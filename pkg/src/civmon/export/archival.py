"""Deterministic archival rendering with a pluggable detached signature.

The renderer turns a flat form-data mapping into paginated plain text
whose bytes depend only on the input, so re-rendering equal data always
reproduces the archived artifact. Signatures are detached records
produced by a signer; the scheme is pluggable and tests run against the
keyed-hash stub.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Mapping, Optional, Protocol

from civmon.errors import SignerUnavailable
from civmon.store.blobs import digest_of

PAGE_LINES = 36
_RULER = "=" * 72


@dataclass(frozen=True)
class Signature:
    scheme: str
    key_id: str
    value: str  # hex


@dataclass(frozen=True)
class ArchivalDocument:
    content: bytes
    source_digest: str  # digest of the canonical form-data encoding
    signature: Signature


class Signer(Protocol):
    scheme: str
    key_id: str

    def sign(self, data: bytes) -> str: ...

    def verify(self, data: bytes, value: str) -> bool: ...


class HmacSigner:
    """Keyed-hash stub signer; deterministic and verifiable offline."""

    scheme = "hmac-sha256"

    def __init__(self, key: bytes | str, key_id: str = "local") -> None:
        self.key = key.encode("utf-8") if isinstance(key, str) else key
        self.key_id = key_id

    def sign(self, data: bytes) -> str:
        return hmac.new(self.key, data, hashlib.sha256).hexdigest()

    def verify(self, data: bytes, value: str) -> bool:
        return hmac.compare_digest(self.sign(data), value)


def _canonical_form(form_data: Mapping[str, str]) -> bytes:
    lines = [f"{key}={value}" for key, value in sorted(form_data.items())]
    return ("\n".join(lines) + "\n").encode("utf-8")


def render_lines(form_data: Mapping[str, str], title: str) -> list[str]:
    body = [_RULER, title, _RULER, ""]
    width = max((len(k) for k in form_data), default=0)
    for key, value in sorted(form_data.items()):
        first, *rest = value.split("\n") or [""]
        body.append(f"{key.ljust(width)} : {first}")
        body.extend(f"{' ' * width}   {line}" for line in rest)
    body.append("")
    return body


def render_archival(
    form_data: Mapping[str, str],
    signer: Optional[Signer],
    title: str = "Archival record",
) -> ArchivalDocument:
    """Render and sign; identical inputs yield identical bytes."""
    if signer is None:
        raise SignerUnavailable("archival rendering requires a configured signer")
    body = render_lines(form_data, title)
    pages = [body[i : i + PAGE_LINES] for i in range(0, len(body), PAGE_LINES)] or [[]]
    out: list[str] = []
    total = len(pages)
    for number, page in enumerate(pages, start=1):
        out.extend(page)
        out.append(f"-- page {number} of {total} --")
    content = ("\n".join(out) + "\n").encode("utf-8")
    return ArchivalDocument(
        content=content,
        source_digest=digest_of(_canonical_form(form_data)),
        signature=Signature(scheme=signer.scheme, key_id=signer.key_id, value=signer.sign(content)),
    )


def verify_archival(document: ArchivalDocument, signer: Signer) -> bool:
    if document.signature.scheme != signer.scheme:
        return False
    return signer.verify(document.content, document.signature.value)
