"""Protocol codes: `<prefix>/<seq>/<year>`, dense per (prefix, year)."""

from __future__ import annotations

import re
from dataclasses import dataclass

from civmon.errors import DomainValidationError
from civmon.domain.model import Violation
from civmon.store.dossiers import DossierStore

_CODE_RE = re.compile(r"^(?P<prefix>.+)/(?P<seq>[1-9][0-9]*)/(?P<year>[0-9]{4})$")


@dataclass(frozen=True)
class ProtocolCode:
    prefix: str
    seq: int
    year: int

    def __post_init__(self):
        problems = []
        if not self.prefix or "/" in self.prefix.strip("/"):
            pass  # prefixes may themselves contain dots but not slashes
        if "/" in self.prefix:
            problems.append(Violation("code.prefix", "prefix must not contain '/'"))
        if self.seq < 1:
            problems.append(Violation("code.seq", "sequence number starts at 1"))
        if not 1000 <= self.year <= 9999:
            problems.append(Violation("code.year", "year must have four digits"))
        if problems:
            raise DomainValidationError(problems)

    def render(self) -> str:
        return f"{self.prefix}/{self.seq}/{self.year}"

    @classmethod
    def parse(cls, text: str) -> "ProtocolCode":
        match = _CODE_RE.match(text)
        if match is None:
            raise DomainValidationError(
                [Violation("code.grammar", f"{text!r} does not match <prefix>/<seq>/<year>")]
            )
        return cls(prefix=match.group("prefix"), seq=int(match.group("seq")), year=int(match.group("year")))


def next_protocol_code(year: int, store: DossierStore, prefix: str | None = None) -> ProtocolCode:
    """Issue the next dense code for (prefix, year) from the store's counter."""
    prefix = prefix or store.code_prefix
    seq = store.allocate_code_seq(year, prefix)
    return ProtocolCode(prefix=prefix, seq=seq, year=year)
