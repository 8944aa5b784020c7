"""Structured logging for pipeline runs.

Provides:
- structlog configuration over stdlib logging (console on stderr, optional
  rotating JSON file)
- stage context binding, so every event of a stage carries ``stage=...``
- ``StageTimer`` for timing stages into the run report
"""

import logging
import sys
import time
from contextvars import ContextVar
from enum import Enum
from logging.handlers import RotatingFileHandler
from typing import Optional

import structlog

from src.config.settings import settings

_stage: ContextVar[Optional[str]] = ContextVar("stage", default=None)


class Stage(str, Enum):
    """Pipeline stages, in execution order."""

    SIMULATE = "simulate"
    INGEST = "ingest"
    MISSING = "missing"
    FEATURES = "features"
    CLUSTER_DAYS = "cluster-days"
    DDP = "ddp"
    OUTLIERS = "outliers"
    SMOOTH = "smooth"
    FDA_CLUSTER = "fda-cluster"
    FBOXPLOT = "fboxplot"
    EMIT = "emit"


def setup_file_logging(level: int) -> Optional[logging.Handler]:
    """Set up file-based logging with rotation."""
    if not settings.log_to_file:
        return None

    settings.log_dir.mkdir(parents=True, exist_ok=True)
    handler = RotatingFileHandler(
        settings.log_dir / "hogfda.log",
        maxBytes=settings.log_file_max_bytes,
        backupCount=settings.log_file_backup_count,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    handler.setLevel(level)
    return handler


def configure_logging(quiet: bool = False, level: Optional[str] = None) -> None:
    """Configure structured logging for CLI runs.

    Args:
        quiet: Only warnings and errors reach the console
        level: Override for the settings log level
    """
    level_name = "WARNING" if quiet else (level or settings.log_level).upper()
    log_level = getattr(logging, level_name, logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.handlers = []

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    root_logger.addHandler(console_handler)

    file_handler = setup_file_logging(log_level)
    if file_handler:
        root_logger.addHandler(file_handler)

    processors = [
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        add_stage_context,
    ]

    if settings.log_format == "json":
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=False))

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    structlog.get_logger(__name__).debug(
        "logging_configured",
        log_level=level_name,
        log_format=settings.log_format,
        file_logging=settings.log_to_file,
    )


def add_stage_context(logger, method_name, event_dict):
    """Add the current stage to every log event."""
    stage = _stage.get()
    if stage and "stage" not in event_dict:
        event_dict["stage"] = stage
    return event_dict


logger = structlog.get_logger()


class StageTimer:
    """Context manager timing one pipeline stage.

    Binds the stage name into the log context for the duration of the block and
    stores the elapsed milliseconds into ``timings`` when one is given.
    """

    def __init__(self, stage: Stage | str, timings: Optional[dict] = None, **extra_fields):
        self.stage = stage.value if isinstance(stage, Stage) else stage
        self.timings = timings
        self.extra_fields = extra_fields
        self.start_time: float = 0
        self.duration_ms: float = 0
        self._token = None

    def __enter__(self):
        self._token = _stage.set(self.stage)
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.duration_ms = (time.perf_counter() - self.start_time) * 1000
        if self.timings is not None:
            self.timings[self.stage] = self.timings.get(self.stage, 0.0) + self.duration_ms

        if exc_type is not None:
            # Tag library errors with the stage they escaped from
            if getattr(exc_val, "stage", "") is None:
                exc_val.stage = self.stage
            logger.error(
                "stage failed",
                duration_ms=round(self.duration_ms, 3),
                success=False,
                error=str(exc_val),
                **self.extra_fields,
            )
        else:
            logger.info(
                "stage complete",
                duration_ms=round(self.duration_ms, 3),
                success=True,
                **self.extra_fields,
            )

        _stage.reset(self._token)
        return False
