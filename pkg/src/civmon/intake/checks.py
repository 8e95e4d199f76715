"""Submission gate checks: completeness of documents, consistency of data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from civmon.domain.catalogs import Catalogs
from civmon.domain.model import (
    ClinicalInvestigation,
    Violation,
    validate_clinical_investigation,
    validate_device,
)


@dataclass(frozen=True)
class ValidationReport:
    """Missing document types plus cross-field rule violations."""

    completeness: tuple[str, ...] = ()
    consistency: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.completeness and not self.consistency

    def describe(self) -> str:
        parts = []
        if self.completeness:
            parts.append("missing documents: " + ", ".join(self.completeness))
        parts.extend(v.message for v in self.consistency)
        return "; ".join(parts) or "ok"

    def merged(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(
            completeness=self.completeness + other.completeness,
            consistency=self.consistency + other.consistency,
        )


def check_completeness(present_doc_types: Iterable[str], catalogs: Catalogs) -> ValidationReport:
    """Required document types minus the ones present in the draft."""
    present = set()
    for doc_type in present_doc_types:
        catalogs.document_type(doc_type)  # unknown code -> error, not a finding
        present.add(doc_type)
    missing = [code for code in catalogs.required_document_types() if code not in present]
    return ValidationReport(completeness=tuple(missing))


def check_consistency(
    civ: ClinicalInvestigation,
    catalogs: Optional[Catalogs] = None,
) -> ValidationReport:
    """Cross-field rules over the drafted clinical investigation."""
    problems: list[Violation] = []
    if civ.multi_centric and len(civ.sites) < 2:
        problems.append(Violation("civ.multi-centric", "multi-centric investigation needs >=2 sites"))
    if civ.comparator is not None and civ.design is None:
        problems.append(
            Violation("civ.comparator-design", "a comparator product requires a declared study design")
        )
    problems.extend(validate_clinical_investigation(civ))
    intended = civ.intended_use if civ.intended_use.strip() else None
    risk_classes = catalogs.risk_classes if catalogs is not None else None
    problems.extend(
        validate_device(
            civ.device,
            comparator=None,  # already covered above; avoid duplicate findings
            investigated_intended_use=intended,
            risk_classes=risk_classes,
        ).violations
    )
    # validate_clinical_investigation already ran plain validate_device;
    # drop exact duplicates while keeping first-seen order
    seen: set[tuple[str, str]] = set()
    unique = []
    for violation in problems:
        token = (violation.rule, violation.message)
        if token not in seen:
            seen.add(token)
            unique.append(violation)
    return ValidationReport(consistency=tuple(unique))
