from civmon.service.app import AppState, build_state, create_app
from civmon.service.auth import (
    Authorization,
    Session,
    SessionOrigin,
    SessionRegistry,
    authorize_event,
    authorize_internal,
    authorize_read,
    mint_sso_token,
    verify_sso_token,
)
from civmon.service.config import ServiceConfig, load_config, parse_config_text

__all__ = [
    "AppState",
    "build_state",
    "create_app",
    "Authorization",
    "Session",
    "SessionOrigin",
    "SessionRegistry",
    "authorize_event",
    "authorize_internal",
    "authorize_read",
    "mint_sso_token",
    "verify_sso_token",
    "ServiceConfig",
    "load_config",
    "parse_config_text",
]
