"""Catalog loading: document types, communication types, risk classes.

Catalog files are line oriented UTF-8, one entry per line:

    code<TAB>label<TAB>flags

where flags is a comma list of bare markers (`required`) or `key=value`
pairs. Blank lines and lines starting with `#` are skipped. The packaged
defaults live under `civmon/data/`.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from civmon.domain.model import CommDirection
from civmon.errors import UnknownCatalogCode


@dataclass(frozen=True)
class DocumentType:
    code: str
    label: str
    required_for_submission: bool = False
    versioned: bool = False


@dataclass(frozen=True)
class CommunicationType:
    code: str
    label: str
    direction: Optional[CommDirection] = None
    event_kind: Optional[str] = None
    expects_reply: bool = False


@dataclass(frozen=True)
class Catalogs:
    document_types: dict[str, DocumentType]
    communication_types: dict[str, CommunicationType]
    risk_classes: frozenset[str]

    def document_type(self, code: str) -> DocumentType:
        try:
            return self.document_types[code]
        except KeyError:
            raise UnknownCatalogCode(f"unknown document type {code!r}") from None

    def communication_type(self, code: str) -> CommunicationType:
        try:
            return self.communication_types[code]
        except KeyError:
            raise UnknownCatalogCode(f"unknown communication type {code!r}") from None

    def required_document_types(self) -> list[str]:
        return [code for code, dt in self.document_types.items() if dt.required_for_submission]


def parse_catalog_file(text: str) -> list[tuple[str, str, dict[str, str]]]:
    """Parse raw catalog text into (code, label, flags) rows."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ValueError(f"catalog line {lineno}: expected code<TAB>label, got {raw!r}")
        code, label = parts[0].strip(), parts[1].strip()
        flags: dict[str, str] = {}
        if len(parts) >= 3 and parts[2].strip():
            for token in parts[2].split(","):
                token = token.strip()
                if not token:
                    continue
                key, _, value = token.partition("=")
                flags[key.strip()] = value.strip() or "true"
        rows.append((code, label, flags))
    return rows


def _document_types(rows: Iterable[tuple[str, str, dict[str, str]]]) -> dict[str, DocumentType]:
    out = {}
    for code, label, flags in rows:
        out[code] = DocumentType(
            code=code,
            label=label,
            required_for_submission="required" in flags,
            versioned="versioned" in flags,
        )
    return out


def _communication_types(rows: Iterable[tuple[str, str, dict[str, str]]]) -> dict[str, CommunicationType]:
    out = {}
    for code, label, flags in rows:
        direction = CommDirection(flags["direction"]) if "direction" in flags else None
        out[code] = CommunicationType(
            code=code,
            label=label,
            direction=direction,
            event_kind=flags.get("event"),
            expects_reply="request" in flags,
        )
    return out


def load_catalogs(directory: Path) -> Catalogs:
    def read(name: str) -> str:
        return (directory / name).read_text(encoding="utf-8")

    return Catalogs(
        document_types=_document_types(parse_catalog_file(read("document_types.tsv"))),
        communication_types=_communication_types(parse_catalog_file(read("communication_types.tsv"))),
        risk_classes=frozenset(code for code, _, _ in parse_catalog_file(read("risk_classes.tsv"))),
    )


def default_catalogs() -> Catalogs:
    root = resources.files("civmon").joinpath("data")
    return Catalogs(
        document_types=_document_types(
            parse_catalog_file(root.joinpath("document_types.tsv").read_text(encoding="utf-8"))
        ),
        communication_types=_communication_types(
            parse_catalog_file(root.joinpath("communication_types.tsv").read_text(encoding="utf-8"))
        ),
        risk_classes=frozenset(
            code
            for code, _, _ in parse_catalog_file(root.joinpath("risk_classes.tsv").read_text(encoding="utf-8"))
        ),
    )
