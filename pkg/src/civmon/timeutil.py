"""UTC timestamp helpers. All stored instants are timezone-aware UTC."""

from __future__ import annotations

from datetime import date, datetime, timezone


def utc(year: int, month: int, day: int, hour: int = 0, minute: int = 0, second: int = 0) -> datetime:
    return datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)


def now() -> datetime:
    return datetime.now(tz=timezone.utc).replace(microsecond=0)


def ensure_utc(value: datetime) -> datetime:
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


def iso(value: datetime) -> str:
    return ensure_utc(value).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_iso(text: str) -> datetime:
    return ensure_utc(datetime.fromisoformat(text.replace("Z", "+00:00")))


def iso_date(value: date) -> str:
    return value.strftime("%Y-%m-%d")


def parse_iso_date(text: str) -> date:
    return date.fromisoformat(text)
