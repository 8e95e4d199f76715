from civmon.lifecycle.model import (
    CivState,
    EventKind,
    LifecycleEvent,
    Phase,
    ALL_STATES,
    DRAFT,
    INITIAL_STATE,
    REGISTRATION,
    TERMINAL_STATES,
)
from civmon.lifecycle.engine import (
    GuardDecision,
    ReplayResult,
    Transition,
    allowed_actions,
    apply_event,
    guard_table_rows,
    guard_table_tsv,
    is_action_permitted,
    reachable_states,
    replay,
    transitions_from,
)

__all__ = [name for name in dir() if not name.startswith("_")]
