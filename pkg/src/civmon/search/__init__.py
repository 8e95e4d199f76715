from civmon.search.query import QUERY_KEYS, Query, from_query_string, to_query_string
from civmon.search.service import (
    OverdueRequest,
    ResultRow,
    matches,
    overdue_requests,
    search,
    summary_stats,
    validate_query,
    visible_dossiers,
)

__all__ = [
    "QUERY_KEYS",
    "Query",
    "from_query_string",
    "to_query_string",
    "OverdueRequest",
    "ResultRow",
    "matches",
    "overdue_requests",
    "search",
    "summary_stats",
    "validate_query",
    "visible_dossiers",
]
