"""Vocabulary, classification and nomenclature lookups.

Files are TSV `code<TAB>label<TAB>parent?`; each file is one scheme
named after its stem. Snapshots are immutable: a reload builds a new
index and swaps it in whole.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from civmon.errors import UnknownScheme


@dataclass(frozen=True)
class VocabularyEntry:
    scheme: str
    code: str
    label: str
    parent: Optional[str] = None


def _parse_scheme(scheme: str, text: str) -> list[VocabularyEntry]:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ValueError(f"{scheme} line {lineno}: expected code<TAB>label")
        entries.append(
            VocabularyEntry(
                scheme=scheme,
                code=parts[0].strip(),
                label=parts[1].strip(),
                parent=parts[2].strip() if len(parts) > 2 and parts[2].strip() else None,
            )
        )
    return entries


class VocabularyIndex:
    def __init__(self, entries_by_scheme: dict[str, list[VocabularyEntry]]) -> None:
        self._schemes = {name: tuple(entries) for name, entries in entries_by_scheme.items()}
        self._children: dict[str, dict[str, list[str]]] = {}
        for name, entries in self._schemes.items():
            children: dict[str, list[str]] = {}
            for entry in entries:
                if entry.parent is not None:
                    children.setdefault(entry.parent, []).append(entry.code)
            self._children[name] = children

    @classmethod
    def from_dir(cls, directory: Path) -> "VocabularyIndex":
        schemes = {}
        for path in sorted(Path(directory).glob("*.tsv")):
            schemes[path.stem] = _parse_scheme(path.stem, path.read_text(encoding="utf-8"))
        return cls(schemes)

    @classmethod
    def default(cls) -> "VocabularyIndex":
        root = resources.files("civmon").joinpath("data/vocab")
        schemes = {}
        for item in root.iterdir():
            if item.name.endswith(".tsv"):
                stem = item.name[: -len(".tsv")]
                schemes[stem] = _parse_scheme(stem, item.read_text(encoding="utf-8"))
        return cls(schemes)

    def schemes(self) -> list[str]:
        return sorted(self._schemes)

    def _entries(self, scheme: str) -> tuple[VocabularyEntry, ...]:
        try:
            return self._schemes[scheme]
        except KeyError:
            raise UnknownScheme(f"vocabulary scheme {scheme!r} is not loaded") from None

    def entry(self, scheme: str, code: str) -> Optional[VocabularyEntry]:
        for entry in self._entries(scheme):
            if entry.code == code:
                return entry
        return None

    def lookup(self, scheme: str, needle: str, limit: int = 20) -> list[VocabularyEntry]:
        """Exact code match first, then code prefixes, then substrings."""
        entries = self._entries(scheme)
        needle = needle.strip()
        if not needle:
            return []
        folded = needle.lower()
        exact = [e for e in entries if e.code == needle]
        prefix = [e for e in entries if e.code.lower().startswith(folded) and e.code != needle]
        rest = [
            e
            for e in entries
            if e.code != needle
            and not e.code.lower().startswith(folded)
            and (folded in e.code.lower() or folded in e.label.lower())
        ]
        out = exact + sorted(prefix, key=lambda e: e.code) + sorted(rest, key=lambda e: e.code)
        return out[:limit]

    def descendants(self, scheme: str, code: str) -> frozenset[str]:
        """The code plus everything transitively below it."""
        self._entries(scheme)
        children = self._children.get(scheme, {})
        seen = {code}
        frontier = [code]
        while frontier:
            for child in children.get(frontier.pop(), ()):
                if child not in seen:
                    seen.add(child)
                    frontier.append(child)
        return frozenset(seen)

    def codes_for_term(self, scheme: str, term: str) -> frozenset[str]:
        """Codes whose label or code matches the term, expanded to descendants."""
        term = term.strip().lower()
        if not term:
            return frozenset()
        matched = {
            entry.code
            for entry in self._entries(scheme)
            if entry.code.lower() == term or term in entry.label.lower()
        }
        out: set[str] = set()
        for code in matched:
            out |= self.descendants(scheme, code)
        return frozenset(out)
