from civmon.evaluation.workflow import (
    assign_team,
    can_read_report,
    decide,
    read_report,
    save_report,
    share_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
