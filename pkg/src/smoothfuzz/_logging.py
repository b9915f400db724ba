"""Structured log lines for smoothfuzz.

Lines look like ``Label | key=value key=value``. Training, adaptation and
experiment code emit them through log_structured().
"""

import logging
from typing import Any

import numpy as np

from smoothfuzz.exceptions import ConfigError

_CONTROL_CHARS = str.maketrans({"\n": "\\n", "\r": "\\r", "\t": "\\t"})

_VALID_LOG_LEVELS = frozenset({"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"})

_HANDLER_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _sanitize(value: Any) -> str:
    """Escape control characters so one record stays on one line."""
    return str(value).translate(_CONTROL_CHARS)


def _render(value: Any) -> str:
    # numpy scalars first: np.float64 is also a float, np.int64 is not an int
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, np.ndarray):
        return _sanitize(np.array2string(value, precision=6, separator=","))
    return _sanitize(value)


def validate_log_level(name: str) -> int:
    """Map a level name (any case) to its logging constant.

    Raises:
        ConfigError: If the name is not a standard Python level.
    """
    upper = name.upper()
    if upper not in _VALID_LOG_LEVELS:
        valid = ", ".join(sorted(_VALID_LOG_LEVELS))
        raise ConfigError(f"Invalid log level '{name}'. Must be one of: {valid}")
    return getattr(logging, upper)


def configure_logging(level: str) -> None:
    """Set the ``smoothfuzz`` logger level; add a stderr handler once."""
    package_logger = logging.getLogger("smoothfuzz")
    package_logger.setLevel(validate_log_level(level))
    if package_logger.handlers:
        return
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(_HANDLER_FORMAT))
    package_logger.addHandler(handler)


def log_structured(logger: logging.Logger, level: int, label: str, **fields: Any) -> None:
    """Log ``label | k=v ...``; None fields are dropped, floats get 6 decimals."""
    if not logger.isEnabledFor(level):
        return
    pairs = " ".join(f"{key}={_render(value)}" for key, value in fields.items() if value is not None)
    logger.log(level, "%s | %s", label, pairs)
