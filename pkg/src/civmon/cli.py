"""Operator command line: serve, seed, validate, simulate, export, guard-table.

Exit codes: 0 success, 1 validation failure, 2 usage error. The store
directory is protected by an advisory lock file while a command that
touches it is running, so a live server and a seeding run never share
the stores.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import shutil
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from civmon import fixtures
from civmon.domain.model import Role
from civmon.errors import CivmonError, GuardViolation
from civmon.export.extract import registry_extract
from civmon.export.xml_io import export_dossier
from civmon.intake.bundle import validate_bundle
from civmon.lifecycle.engine import guard_table_tsv, replay
from civmon.lifecycle.model import DRAFT, CivState, EventKind, LifecycleEvent
from civmon.service.app import build_state
from civmon.service.config import ServiceConfig, load_config
from civmon.timeutil import iso, parse_iso

LOCK_NAME = ".civmon.lock"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2

_RANDOM_PROFILE = re.compile(r"^random\(\s*(\d+)\s*,\s*(\d+)\s*\)$")


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


# -- advisory lock --------------------------------------------------------


class StoreLock:
    """Exclusive advisory lock over a data directory.

    The lock file holds the owner's PID. A file left behind by a dead
    process (a server killed by a signal never unwinds its cleanup) is
    treated as stale and reclaimed.
    """

    def __init__(self, data_dir: Path) -> None:
        self.path = Path(data_dir) / LOCK_NAME

    def _holder_alive(self) -> bool:
        try:
            pid = int(self.path.read_text().strip())
        except (OSError, ValueError):
            return False
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            return False
        except PermissionError:
            return True  # exists, owned by someone else
        return True

    def __enter__(self) -> "StoreLock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        for attempt in (1, 2):
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                if attempt == 1 and not self._holder_alive():
                    try:
                        self.path.unlink()
                    except FileNotFoundError:
                        pass
                    continue
                raise ValidationFailure(
                    f"store is locked by another process ({self.path}); "
                    "remove the lock file if that process is gone"
                ) from None
            with os.fdopen(fd, "w") as handle:
                handle.write(str(os.getpid()))
            return self
        raise ValidationFailure(f"could not acquire store lock {self.path}")

    def __exit__(self, *exc_info) -> None:
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass


# -- scenario scripts -----------------------------------------------------


def parse_script(text: str) -> list[tuple[int, LifecycleEvent]]:
    """Parse scenario lines to (line number, event) pairs.

    Line format, tab separated:
        timestamp <TAB> actor <TAB> role <TAB> event-kind [<TAB> k=v,k=v...]
    Blank lines and `#` comments are skipped. Timestamps must not
    decrease; the replay engine enforces that during the run.
    """
    events: list[tuple[int, LifecycleEvent]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [part.strip() for part in line.split("\t") if part.strip()]
        if len(fields) < 4:
            raise ValidationFailure(
                f"line {lineno}: expected timestamp, actor, role and event kind"
            )
        when_text, actor, role_text, kind_text = fields[:4]
        try:
            when = parse_iso(when_text)
        except ValueError:
            raise ValidationFailure(f"line {lineno}: bad timestamp {when_text!r}") from None
        try:
            role = Role(role_text)
        except ValueError:
            raise ValidationFailure(f"line {lineno}: unknown role {role_text!r}") from None
        try:
            kind = EventKind(kind_text)
        except ValueError:
            raise ValidationFailure(f"line {lineno}: unknown event kind {kind_text!r}") from None
        payload: dict[str, str] = {}
        if len(fields) > 4:
            for pair in fields[4].split(","):
                key, sep, value = pair.partition("=")
                if not sep:
                    raise ValidationFailure(f"line {lineno}: bad payload entry {pair!r}")
                payload[key.strip()] = value.strip()
        events.append((lineno, LifecycleEvent(kind=kind, actor=actor, role=role, at=when, payload=payload)))
    return events


def run_script(
    events: Sequence[tuple[int, LifecycleEvent]],
    initial: CivState = DRAFT,
    out=None,
) -> CivState:
    """Replay the script through the lifecycle engine, dumping the log."""
    out = sys.stdout if out is None else out  # late-bound so redirection works
    try:
        result = replay([event for _line, event in events], initial=initial)
    except GuardViolation as exc:
        lineno = events[exc.index][0] if exc.index is not None else "?"
        raise ValidationFailure(f"line {lineno}: {exc}") from None
    for transition in result.audit:
        event = transition.event
        out.write(
            f"{iso(event.at)}\t{event.kind.value}\t{event.role.value}\t"
            f"{transition.from_state.render()} -> {transition.to_state.render()}\n"
        )
    out.write(f"final state: {result.state.render()}\n")
    return result.state


# -- subcommands ----------------------------------------------------------


def _config_from_args(args: argparse.Namespace) -> ServiceConfig:
    config = load_config(args.config)
    if getattr(args, "data_dir", None):
        data_dir = Path(args.data_dir).resolve()
        config = replace(config, data_dir=data_dir)
    return config


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from civmon.service.app import create_app

    config = _config_from_args(args)
    if args.host:
        config = replace(config, host=args.host)
    if args.port:
        config = replace(config, port=args.port)
    with StoreLock(config.data_dir):
        state = build_state(config)
        app = create_app(state)
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return EXIT_OK


def _stores_populated(state) -> bool:
    return bool(state.store.snapshots()) or bool(state.enterprise.parties())


def _wipe_stores(config: ServiceConfig) -> None:
    for path in (config.enterprise_file, config.dossiers_file):
        if path.exists():
            path.unlink()
    if config.blobs_root.exists():
        shutil.rmtree(config.blobs_root)


def cmd_seed(args: argparse.Namespace) -> int:
    profile = args.profile.strip()
    random_match = _RANDOM_PROFILE.match(profile)
    if profile not in ("fig4", "fig5") and not random_match:
        raise UsageError(f"unknown profile {profile!r}; expected fig4, fig5 or random(n, seed)")

    config = _config_from_args(args)
    with StoreLock(config.data_dir):
        state = build_state(config)
        if _stores_populated(state):
            if not args.force:
                raise ValidationFailure(
                    f"stores under {config.data_dir} are not empty; pass --force to replace them"
                )
            _wipe_stores(config)
            state = build_state(config)
        users = fixtures.seed_internal_users(state.enterprise)
        if profile == "fig4":
            code = fixtures.seed_fig4(state.enterprise, state.store, users, signer=state.signer)
            print(f"seeded dossier {code}")
        elif profile == "fig5":
            codes = fixtures.seed_fig5(state.enterprise, state.store, users, signer=state.signer)
            print(f"seeded {len(state.store.snapshots())} dossiers; concluded 2009 cohort: {', '.join(codes)}")
        else:
            count, seed_value = int(random_match.group(1)), int(random_match.group(2))
            keys = fixtures.seed_random(
                state.enterprise, state.store, count, seed_value, users, signer=state.signer
            )
            print(f"seeded {len(keys)} dossiers from seed {seed_value}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    directory = Path(args.bundle)
    if not directory.is_dir():
        raise UsageError(f"bundle directory {directory} does not exist")
    state = build_state(_config_from_args(args))
    report = validate_bundle(directory, state.catalogs)
    if report.ok:
        print("ok")
        return EXIT_OK
    for code in report.completeness:
        print(f"missing: {code}")
    for violation in report.consistency:
        print(f"violation: {violation.rule}: {violation.message}")
    return EXIT_VALIDATION


def cmd_simulate(args: argparse.Namespace) -> int:
    path = Path(args.script)
    if not path.is_file():
        raise UsageError(f"script file {path} does not exist")
    try:
        initial = CivState.parse(args.initial)
    except Exception as exc:
        raise UsageError(f"bad initial state {args.initial!r}: {exc}") from None
    events = parse_script(path.read_text(encoding="utf-8"))
    run_script(events, initial=initial)
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    state = build_state(_config_from_args(args))
    try:
        key = state.store.key_for_code(args.code)
    except KeyError:
        raise ValidationFailure(f"no dossier with code {args.code!r}") from None
    snapshot = state.store.snapshot(key)
    if args.format == "xml":
        sys.stdout.buffer.write(export_dossier(snapshot))
    else:
        # same serializer settings the HTTP layer uses, for byte parity
        payload = json.dumps(
            registry_extract(snapshot).to_dict(),
            ensure_ascii=False,
            allow_nan=False,
            indent=None,
            separators=(",", ":"),
        )
        sys.stdout.buffer.write(payload.encode("utf-8"))
    return EXIT_OK


def cmd_guard_table(_args: argparse.Namespace) -> int:
    sys.stdout.write(guard_table_tsv())
    return EXIT_OK


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="civmon",
        description="Clinical-investigation monitoring service operator tool",
    )
    parser.add_argument("--config", type=Path, default=None, help="path to a key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--data-dir", default=None)
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.set_defaults(handler=cmd_serve)

    seed = sub.add_parser("seed", help="populate the stores with a named profile")
    seed.add_argument("profile", help="fig4, fig5 or random(n, seed)")
    seed.add_argument("--data-dir", default=None)
    seed.add_argument("--force", action="store_true", help="replace non-empty stores")
    seed.set_defaults(handler=cmd_seed)

    validate = sub.add_parser("validate", help="check a notification bundle directory offline")
    validate.add_argument("bundle")
    validate.add_argument("--data-dir", default=None)
    validate.set_defaults(handler=cmd_validate)

    simulate = sub.add_parser("simulate", help="replay a scenario script through the lifecycle")
    simulate.add_argument("script")
    simulate.add_argument("--initial", default="draft", help="starting state (default: draft)")
    simulate.set_defaults(handler=cmd_simulate)

    export = sub.add_parser("export", help="write a dossier export to stdout")
    export.add_argument("code", help="protocol code of the dossier")
    export.add_argument("--format", choices=("xml", "extract"), default="xml")
    export.add_argument("--data-dir", default=None)
    export.set_defaults(handler=cmd_export)

    guard = sub.add_parser("guard-table", help="print the state/role/event permission matrix")
    guard.set_defaults(handler=cmd_guard_table)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CivmonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
