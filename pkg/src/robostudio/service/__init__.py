"""Backend service: sessions, workflows, HTTP/WebSocket API, CLI."""

from .config import ServiceConfig
from .session import (
    EventLogRecord,
    SessionState,
    SessionStore,
    StorageError,
    UnknownSession,
    apply_event,
)
from .workflows import ServiceError, SessionService, region_isolated

__all__ = [
    "EventLogRecord",
    "ServiceConfig",
    "ServiceError",
    "SessionService",
    "SessionState",
    "SessionStore",
    "StorageError",
    "UnknownSession",
    "apply_event",
    "region_isolated",
]
