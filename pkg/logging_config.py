"""
fedregret - Logging Configuration

Numerical modules log per-step diagnostics at DEBUG and one summary line per
run at INFO. The CLI sends everything to stderr, to a rotating file under
~/.fedregret/logs, and, while a subcommand runs, to run.log in its output
directory.
"""

from __future__ import annotations

import logging
import os
import sys
import time
from contextlib import contextmanager
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Iterator

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
DEFAULT_LOG_DIR = Path.home() / ".fedregret" / "logs"
RUN_LOG_NAME = "run.log"

# Loggers of optional plotting / numexpr backends, clamped to WARNING.
NOISY_LOGGERS = ("matplotlib", "numexpr")

_configured = False


class ColoredFormatter(logging.Formatter):
    """Colours the level name when stderr is a terminal."""

    LEVEL_COLORS = {
        logging.DEBUG: "\033[36m",
        logging.INFO: "\033[32m",
        logging.WARNING: "\033[33m",
        logging.ERROR: "\033[31m",
        logging.CRITICAL: "\033[35m",
    }
    RESET = "\033[0m"

    def __init__(self, fmt: str | None = None, use_colors: bool = True) -> None:
        super().__init__(fmt, datefmt=DATE_FORMAT)
        self.use_colors = use_colors and sys.stderr.isatty()

    def format(self, record: logging.LogRecord) -> str:
        if not self.use_colors:
            return super().format(record)
        plain = record.levelname
        record.levelname = f"{self.LEVEL_COLORS.get(record.levelno, '')}{plain}{self.RESET}"
        try:
            return super().format(record)
        finally:
            record.levelname = plain


def _resolve_level(level: str | int | None) -> int:
    if level is None:
        level = os.getenv("LOG_LEVEL", "INFO")
    if isinstance(level, str):
        named = logging.getLevelName(level.upper())
        return named if isinstance(named, int) else logging.INFO
    return level


def setup_logging(
    level: str | int | None = None,
    log_dir: Path | str | None = DEFAULT_LOG_DIR,
    console: bool = True,
) -> None:
    """
    Configure the root logger once.

    level falls back to LOG_LEVEL, then INFO. log_dir=None disables the
    rotating file (5 MB x 3).
    """
    global _configured
    if _configured:
        return

    resolved = _resolve_level(level)
    root = logging.getLogger()
    root.setLevel(resolved)
    root.handlers.clear()

    if console:
        stream = logging.StreamHandler(sys.stderr)
        stream.setFormatter(ColoredFormatter(LOG_FORMAT))
        root.addHandler(stream)

    if log_dir is not None:
        try:
            Path(log_dir).mkdir(parents=True, exist_ok=True)
            rotating = RotatingFileHandler(
                Path(log_dir) / "fedregret.log",
                maxBytes=5 * 1024 * 1024,
                backupCount=3,
                encoding="utf-8",
            )
            rotating.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
            root.addHandler(rotating)
        except OSError as e:
            root.warning(f"Log file disabled: {e}")

    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Module loggers: ``logger = get_logger(__name__)``."""
    if not _configured:
        setup_logging()
    return logging.getLogger(name)


@contextmanager
def run_log(output_dir: Path | str) -> Iterator[Path]:
    """
    Mirror root-logger records into output_dir/run.log for the duration of
    the block. The file is rewritten on every run and is not a manifest output.
    """
    target = Path(output_dir) / RUN_LOG_NAME
    target.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(target, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        yield target
    finally:
        root.removeHandler(handler)
        handler.close()


def log_exception(
    logger: logging.Logger,
    message: str,
    exc: Exception | None = None,
    level: int = logging.ERROR,
) -> None:
    """Log "message: ExcType: text", or the active traceback when exc is None."""
    if exc is None:
        logger.log(level, message, exc_info=True)
    else:
        logger.log(level, f"{message}: {type(exc).__name__}: {exc}")


def log_operation(
    logger: logging.Logger,
    operation: str,
    success: bool,
    details: dict[str, Any] | None = None,
) -> None:
    """One summary line, e.g. "backward_riccati completed: T=10"."""
    line = f"{operation} {'completed' if success else 'failed'}"
    if details:
        line += ": " + ", ".join(f"{k}={v}" for k, v in details.items())
    logger.log(logging.INFO if success else logging.ERROR, line)


@contextmanager
def log_timing(
    logger: logging.Logger,
    operation: str,
    level: int = logging.DEBUG,
) -> Iterator[dict[str, float]]:
    """
    Time a block and log its wall-clock duration.

    The yielded dict receives "seconds" when the block exits, also on error.
    """
    record: dict[str, float] = {}
    start = time.perf_counter()
    try:
        yield record
    finally:
        record["seconds"] = time.perf_counter() - start
        logger.log(level, f"{operation} took {record['seconds']:.4f}s")


__all__ = [
    "ColoredFormatter",
    "NOISY_LOGGERS",
    "RUN_LOG_NAME",
    "setup_logging",
    "get_logger",
    "run_log",
    "log_exception",
    "log_operation",
    "log_timing",
]
