"""Checkpoint score logging for QA training loops."""

__version__ = "0.1.0"

from .session import (
    LoggerSession,
    SessionError,
    finalize,
    log_checkpoint,
    manifest_from_dataset_file,
    open_session,
)
