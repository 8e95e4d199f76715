"""Service configuration: file-based with environment overrides.

The config file is a flat key=value text file. Every key can also be
supplied through the environment as CIVMON_<KEY-IN-UPPER-SNAKE>, which
wins over the file. Paths are resolved relative to the config file's
directory when given as relative.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping, Optional

_ENV_PREFIX = "CIVMON_"


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: Path = Path("./data")
    enterprise_path: Optional[Path] = None  # default: <data_dir>/enterprise.json
    dossiers_path: Optional[Path] = None  # default: <data_dir>/dossiers.json
    blobs_dir: Optional[Path] = None  # default: <data_dir>/blobs
    catalogs_dir: Optional[Path] = None  # default: packaged catalogs
    vocab_dir: Optional[Path] = None  # default: packaged vocabulary
    code_prefix: str = "i.5.i.m.2"
    signer_key: str = "development-signing-key"
    signer_key_id: str = "local"
    sso_key: str = "development-sso-key"
    refuse_plaintext: bool = False
    session_ttl_minutes: int = 480
    host: str = "127.0.0.1"
    port: int = 8000

    @property
    def enterprise_file(self) -> Path:
        return self.enterprise_path or self.data_dir / "enterprise.json"

    @property
    def dossiers_file(self) -> Path:
        return self.dossiers_path or self.data_dir / "dossiers.json"

    @property
    def blobs_root(self) -> Path:
        return self.blobs_dir or self.data_dir / "blobs"


_PATH_FIELDS = {"data_dir", "enterprise_path", "dossiers_path", "blobs_dir", "catalogs_dir", "vocab_dir"}
_BOOL_FIELDS = {"refuse_plaintext"}
_INT_FIELDS = {"session_ttl_minutes", "port"}


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _coerce(name: str, value: str, base: Optional[Path]) -> object:
    if name in _PATH_FIELDS:
        path = Path(value)
        if base is not None and not path.is_absolute():
            path = base / path
        return path
    if name in _BOOL_FIELDS:
        return _parse_bool(value)
    if name in _INT_FIELDS:
        return int(value)
    return value


def parse_config_text(text: str, base: Optional[Path] = None) -> dict:
    """Parse key=value lines; '#' starts a comment; blank lines skipped."""
    known = {f.name for f in fields(ServiceConfig)}
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key = key.strip().replace("-", "_")
        if key not in known:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, value.strip(), base)
    return out


def load_config(
    path: Optional[Path] = None,
    env: Optional[Mapping[str, str]] = None,
) -> ServiceConfig:
    """Build the effective config: defaults, then file, then environment."""
    env = os.environ if env is None else env
    config = ServiceConfig()
    if path is not None:
        base = Path(path).resolve().parent
        config = replace(config, **parse_config_text(Path(path).read_text(encoding="utf-8"), base))
    overrides: dict = {}
    for f in fields(ServiceConfig):
        env_key = _ENV_PREFIX + f.name.upper()
        if env_key in env:
            overrides[f.name] = _coerce(f.name, env[env_key], None)
    if overrides:
        config = replace(config, **overrides)
    return config
