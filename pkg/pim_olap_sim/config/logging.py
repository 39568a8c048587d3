"""Structured logging for simulator runs, tagged with a per-run id."""

import json
import logging
import logging.config
import sys
import uuid
from contextvars import ContextVar
from typing import Any, Dict, Optional

from .settings import settings

# Context variable for the run ID (one per CLI invocation or sweep grid point)
run_id: ContextVar[Optional[str]] = ContextVar("run_id", default=None)

_RESERVED_ATTRS = frozenset(
    [
        "name", "msg", "args", "levelname", "levelno", "pathname", "filename", "module",
        "lineno", "funcName", "created", "msecs", "relativeCreated", "thread", "threadName",
        "processName", "process", "taskName", "getMessage", "exc_info", "exc_text",
        "stack_info", "run_id", "query", "operation", "error",
    ]
)


class RunIdFormatter(logging.Formatter):
    """Plain-text records with the active run id."""

    def format(self, record: logging.LogRecord) -> str:
        record.run_id = run_id.get() or "N/A"
        return super().format(record)


class StructuredFormatter(RunIdFormatter):
    """One JSON object per record; extra fields are copied through."""

    def format(self, record: logging.LogRecord) -> str:
        log_entry: Dict[str, Any] = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "logger": record.name,
            "run_id": run_id.get() or "N/A",
            "message": record.getMessage(),
        }

        for key in ("query", "operation", "error"):
            if hasattr(record, key):
                log_entry[key] = getattr(record, key)

        for key, value in record.__dict__.items():
            if key not in _RESERVED_ATTRS and not key.startswith("_"):
                log_entry.setdefault(key, value)

        return json.dumps(log_entry, ensure_ascii=False, default=str)


def get_logging_config(level: Optional[str] = None, log_format: Optional[str] = None) -> Dict[str, Any]:
    """dictConfig for the simulator; explicit arguments win over settings."""
    level = (level or settings.log_level).upper()
    log_format = log_format or settings.log_format

    if log_format == "json":
        formatter_config = {
            "()": "pim_olap_sim.config.logging.StructuredFormatter",
            "datefmt": "%Y-%m-%dT%H:%M:%S",
        }
    else:
        formatter_config = {
            "()": "pim_olap_sim.config.logging.RunIdFormatter",
            "format": "%(asctime)s - %(run_id)s - %(name)s - %(levelname)s - %(message)s",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        }

    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default": formatter_config,
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                # stdout carries command output
                "stream": sys.stderr,
                "formatter": "default",
                "level": level,
            },
        },
        "root": {
            "level": level,
            "handlers": ["console"],
        },
        "loggers": {
            "pim_olap_sim": {
                "level": level,
                "handlers": ["console"],
                "propagate": False,
            },
        },
    }


def setup_logging(level: Optional[str] = None, log_format: Optional[str] = None) -> None:
    """Install handlers; every CLI invocation calls this once."""
    logging.config.dictConfig(get_logging_config(level, log_format))


def generate_run_id() -> str:
    """Short random id for one CLI invocation or sweep point."""
    return uuid.uuid4().hex[:12]


def set_run_id(value: str) -> None:
    run_id.set(value)


def get_run_id() -> Optional[str]:
    return run_id.get()


class LoggingService:
    """Per-module logger emitting step, query and error fields in a fixed shape."""

    def __init__(self, logger_name: str):
        self.logger = logging.getLogger(logger_name)

    def log_operation(
        self,
        severity: str,
        message: str,
        query: Optional[str] = None,
        operation: Optional[str] = None,
        error: Optional[str] = None,
        **kwargs: Any,
    ) -> None:
        """Emit one record with the query and operation fields set.

        Args:
            severity: debug, info, warning or error
            message: Log message
            query: Query fixture id involved in the operation
            operation: Operation name
            error: Failure text, if any
            **kwargs: Numeric or label fields, e.g. rows or pim_level
        """
        extra: Dict[str, Any] = {}
        if query:
            extra["query"] = query
        if operation:
            extra["operation"] = operation
        if error:
            extra["error"] = error
        extra.update(kwargs)

        log_method = getattr(self.logger, severity.lower())
        log_method(message, extra=extra)

    def log_step(
        self,
        operation: str,
        success: bool,
        query: Optional[str] = None,
        error: Optional[str] = None,
        **kwargs: Any,
    ) -> None:
        """Log completion or failure of a pipeline step.

        Args:
            operation: Step name (generate, denormalize, plan, execute, ...)
            success: Whether the step succeeded
            query: Query fixture id if applicable
            error: Error message if the step failed
            **kwargs: Additional fields
        """
        if success:
            self.log_operation(
                "info",
                f"{operation.capitalize()} completed successfully",
                query=query,
                operation=operation,
                **kwargs,
            )
        else:
            self.log_operation(
                "error" if error else "warning",
                f"{operation.capitalize()} failed",
                query=query,
                operation=operation,
                error=error,
                **kwargs,
            )

    def log_error(
        self,
        message: str,
        error: Exception,
        query: Optional[str] = None,
        operation: Optional[str] = None,
        **kwargs: Any,
    ) -> None:
        """Record a failure before it is re-raised.

        Args:
            message: What failed
            error: The exception about to propagate
            query: Query fixture id if applicable
            operation: Operation name if applicable
            **kwargs: Additional fields
        """
        self.log_operation(
            "error",
            message,
            query=query,
            operation=operation,
            error=str(error),
            error_type=type(error).__name__,
            **kwargs,
        )
