"""Faceted query model and its canonical URL encoding.

All filters are conjunctive; a multi-valued filter matches when any of
its values does. The wire encoding is the contract every client (web
console, CLI, tests) must emit byte-identically: fixed key order,
sorted deduplicated values, RFC 3986 unreserved-set percent encoding.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional
from urllib.parse import quote, unquote


@dataclass(frozen=True)
class Query:
    notification_number: Optional[str] = None
    years: tuple[int, ...] = ()
    states: tuple[str, ...] = ()
    applicant_roles: tuple[str, ...] = ()
    company_name: Optional[str] = None
    evaluators: tuple[str, ...] = ()
    product_name: Optional[str] = None
    product_type: Optional[str] = None  # device | kit
    risk_classes: tuple[str, ...] = ()
    application_field: Optional[str] = None
    characteristics: tuple[str, ...] = ()
    releases_drug: Optional[bool] = None
    classification_prefix: Optional[str] = None
    anatomical_location: Optional[str] = None
    title: Optional[str] = None
    study_designs: tuple[str, ...] = ()
    population: tuple[str, ...] = ()
    site_country: Optional[str] = None

    @property
    def empty(self) -> bool:
        return all(not getattr(self, f.name) and getattr(self, f.name) is not False for f in fields(self))


# wire key -> (attribute, kind); declaration order is the canonical order
QUERY_KEYS: tuple[tuple[str, str, str], ...] = (
    ("notification-number", "notification_number", "single"),
    ("year", "years", "multi-int"),
    ("state", "states", "multi"),
    ("applicant-role", "applicant_roles", "multi"),
    ("company", "company_name", "single"),
    ("evaluator", "evaluators", "multi"),
    ("product", "product_name", "single"),
    ("product-type", "product_type", "single"),
    ("risk-class", "risk_classes", "multi"),
    ("application-field", "application_field", "single"),
    ("characteristic", "characteristics", "multi"),
    ("releases-drug", "releases_drug", "bool"),
    ("classification-code", "classification_prefix", "single"),
    ("anatomical-location", "anatomical_location", "single"),
    ("title", "title", "single"),
    ("study-design", "study_designs", "multi"),
    ("population", "population", "multi"),
    ("site-country", "site_country", "single"),
)


def _encode(value: str) -> str:
    # RFC 3986 unreserved set only; mirrors the client-side encoder
    return quote(value, safe="")


def to_query_string(query: Query) -> str:
    """Canonical serialization: fixed key order, sorted unique values."""
    parts: list[str] = []
    for key, attr, kind in QUERY_KEYS:
        value = getattr(query, attr)
        if kind == "single":
            if value is not None and value != "":
                parts.append(f"{key}={_encode(str(value))}")
        elif kind == "bool":
            if value is not None:
                parts.append(f"{key}={'true' if value else 'false'}")
        elif kind == "multi-int":
            for item in sorted(set(value)):
                parts.append(f"{key}={item}")
        else:
            for item in sorted(set(value)):
                parts.append(f"{key}={_encode(str(item))}")
    return "&".join(parts)


def from_query_string(text: str) -> Query:
    """Parse a query string; raises ValueError on unknown keys or values."""
    by_key: dict[str, str] = {key: attr for key, attr, _ in QUERY_KEYS}
    kinds: dict[str, str] = {key: kind for key, _, kind in QUERY_KEYS}
    singles: dict[str, str] = {}
    multis: dict[str, list[str]] = {}
    bools: dict[str, bool] = {}
    ints: dict[str, list[int]] = {}
    if text.startswith("?"):
        text = text[1:]
    for pair in text.split("&"):
        if not pair:
            continue
        key, sep, raw = pair.partition("=")
        key = unquote(key)
        if not sep:
            raise ValueError(f"query pair {pair!r} has no value")
        if key not in by_key:
            raise ValueError(f"unknown query key {key!r}")
        value = unquote(raw)
        kind = kinds[key]
        attr = by_key[key]
        if kind == "single":
            if attr in singles:
                raise ValueError(f"query key {key!r} given twice")
            singles[attr] = value
        elif kind == "bool":
            if value not in ("true", "false"):
                raise ValueError(f"{key} expects true or false, got {value!r}")
            bools[attr] = value == "true"
        elif kind == "multi-int":
            try:
                ints.setdefault(attr, []).append(int(value))
            except ValueError:
                raise ValueError(f"{key} expects an integer, got {value!r}") from None
        else:
            multis.setdefault(attr, []).append(value)
    kwargs: dict = {}
    kwargs.update(singles)
    kwargs.update(bools)
    for attr, values in ints.items():
        kwargs[attr] = tuple(sorted(set(values)))
    for attr, values in multis.items():
        kwargs[attr] = tuple(sorted(set(values)))
    return Query(**kwargs)
