from civmon.intake.bundle import civ_from_form, parse_form, validate_bundle
from civmon.intake.checks import ValidationReport, check_completeness, check_consistency
from civmon.intake.protocol import ProtocolCode, next_protocol_code
from civmon.intake.submission import draft_validation, submit

__all__ = [name for name in dir() if not name.startswith("_")]
