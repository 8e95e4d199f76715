"""Offline notification bundles for CLI validation.

Layout: a directory holding `notification.form` (UTF-8 `key=value`
lines) plus one file per document, named `<doctype-code>.<ext>`. The
form keys describe the same clinical investigation a draft would hold,
so the offline report matches the server-side submission gate for equal
content.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from civmon.domain.catalogs import Catalogs
from civmon.domain.model import (
    CEMark,
    ClinicalInvestigation,
    ComparatorProduct,
    Component,
    DeviceVariant,
    Drug,
    InvestigationalDevice,
    InvestigationalSite,
    MedicalDevice,
    SimilarityLink,
    StudyDesign,
    Violation,
)
from civmon.intake.checks import ValidationReport, check_completeness, check_consistency
from civmon.timeutil import parse_iso_date

FORM_NAME = "notification.form"


def parse_form(text: str) -> dict[str, str]:
    """`key=value` per line; `#` comments and blank lines skipped."""
    data: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"form line {lineno}: expected key=value, got {raw!r}")
        data[key.strip()] = value.strip()
    return data


def _csv(value: Optional[str]) -> tuple[str, ...]:
    if not value:
        return ()
    return tuple(part.strip() for part in value.split(",") if part.strip())


def _device_from(form: dict[str, str], prefix: str, problems: list[Violation]) -> MedicalDevice:
    name = form.get(f"{prefix}.name", "")
    mark: Optional[CEMark] = None
    if form.get(f"{prefix}.ce-certificate"):
        try:
            issued = parse_iso_date(form.get(f"{prefix}.ce-issued", "1970-01-01"))
        except ValueError:
            problems.append(Violation("bundle.form", f"{prefix}.ce-issued is not a date"))
            issued = parse_iso_date("1970-01-01")
        mark = CEMark(
            certificate_id=form[f"{prefix}.ce-certificate"],
            intended_use=form.get(f"{prefix}.ce-intended-use", ""),
            issued=issued,
        )
    drug: Optional[Drug] = None
    if form.get(f"{prefix}.releases-drug-code"):
        drug = Drug(
            code=form[f"{prefix}.releases-drug-code"],
            name=form.get(f"{prefix}.releases-drug-name", form[f"{prefix}.releases-drug-code"]),
        )
    return MedicalDevice(
        name=name,
        risk_class=form.get(f"{prefix}.risk-class", ""),
        characteristics=frozenset(_csv(form.get(f"{prefix}.characteristics"))),
        classification_code=form.get(f"{prefix}.classification-code") or None,
        anatomical_location=form.get(f"{prefix}.anatomical-location") or None,
        ce_mark=mark,
        releases_drug=drug,
    )


def civ_from_form(form: dict[str, str], problems: list[Violation]) -> ClinicalInvestigation:
    """Rebuild the clinical-investigation value a draft with this form holds."""
    variant = form.get("device.variant", "single")
    if variant == "kit":
        items: list = []
        index = 1
        while f"item.{index}.type" in form:
            if form[f"item.{index}.type"] == "component":
                items.append(
                    Component(
                        code=form.get(f"item.{index}.code", f"cmp-{index}"),
                        name=form.get(f"item.{index}.name", ""),
                    )
                )
            else:
                items.append(_device_from(form, f"item.{index}", problems))
            index += 1
        device = InvestigationalDevice.kit(tuple(items))
    else:
        device = InvestigationalDevice.single(_device_from(form, "device", problems))
    if form.get("similar-to.marketed"):
        device = InvestigationalDevice(
            device.variant,
            device.items,
            SimilarityLink(
                marketed_device=form["similar-to.marketed"],
                rationale=form.get("similar-to.rationale", ""),
            ),
        )

    sites = []
    index = 1
    while f"site.{index}.name" in form:
        sites.append(
            InvestigationalSite(
                code=form.get(f"site.{index}.code", f"s-{index}"),
                name=form[f"site.{index}.name"],
                country=form.get(f"site.{index}.country", "IT"),
                investigator=form.get(f"site.{index}.investigator", ""),
            )
        )
        index += 1

    design: Optional[StudyDesign] = None
    if form.get("design"):
        try:
            design = StudyDesign(form["design"])
        except ValueError:
            problems.append(Violation("bundle.form", f"unknown study design {form['design']!r}"))

    comparator: Optional[ComparatorProduct] = None
    if form.get("comparator.device-name"):
        comparator = ComparatorProduct(device=_device_from(form, "comparator.device", problems))
    elif form.get("comparator.drug-code"):
        comparator = ComparatorProduct(
            drug=Drug(
                code=form["comparator.drug-code"],
                name=form.get("comparator.drug-name", form["comparator.drug-code"]),
            )
        )

    return ClinicalInvestigation(
        title=form.get("title", ""),
        device=device,
        sites=tuple(sites),
        intended_use=form.get("intended-use", ""),
        design=design,
        population=frozenset(_csv(form.get("population"))),
        comparator=comparator,
        multi_centric=form.get("multi-centric", "false").lower() == "true",
        application_field=form.get("application-field") or None,
    )


def validate_bundle(directory: Path, catalogs: Catalogs) -> ValidationReport:
    directory = Path(directory)
    problems: list[Violation] = []
    form_path = directory / FORM_NAME
    if not form_path.is_file():
        return ValidationReport(
            consistency=(Violation("bundle.form", f"{FORM_NAME} missing from bundle"),)
        )
    try:
        form = parse_form(form_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        return ValidationReport(consistency=(Violation("bundle.form", str(exc)),))

    doc_types: list[str] = []
    for path in sorted(directory.iterdir()):
        if path.name == FORM_NAME or path.name.startswith(".") or path.is_dir():
            continue
        code = path.name.split(".", 1)[0]
        if code in catalogs.document_types:
            doc_types.append(code)
        else:
            problems.append(Violation("bundle.doc-type", f"unknown document type file {path.name!r}"))
        if path.stat().st_size == 0:
            problems.append(Violation("bundle.empty", f"document file {path.name!r} is empty"))

    civ = civ_from_form(form, problems)
    report = check_completeness(doc_types, catalogs).merged(check_consistency(civ, catalogs))
    if problems:
        report = ValidationReport(consistency=tuple(problems)).merged(report)
    return report
