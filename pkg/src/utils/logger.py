"""
Structured logging for training runs.

Every module gets its logger from ``setup_logger``. Events are rendered as
sorted JSON lines on stderr; numpy scalars and small arrays in event fields
are turned into plain Python values first so metrics serialize cleanly.
"""

import logging
import sys
from typing import Any, Dict, Optional

import numpy as np
import structlog

_NOISY_LOGGERS = ("numexpr", "matplotlib")
_MAX_ARRAY_ITEMS = 16

_configured = False


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        if value.size > _MAX_ARRAY_ITEMS:
            return f"<array shape={value.shape} dtype={value.dtype}>"
        return value.tolist()
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def numpy_to_python(_logger: Any, _method: str, event_dict: Dict[str, Any]) -> Dict[str, Any]:
    """structlog processor replacing numpy values in the event with builtins."""
    return {key: _plain(value) for key, value in event_dict.items()}


def _configure_structlog():
    global _configured
    if _configured:
        return
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            numpy_to_python,
            structlog.processors.JSONRenderer(sort_keys=True),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    _configured = True


def setup_logger(name: str, level: Optional[str] = None) -> structlog.stdlib.BoundLogger:
    """
    Return the structured logger for a module.

    Args:
        name: Logger name, usually ``__name__``
        level: Optional level override for this logger only
    """
    _configure_structlog()
    if level:
        logging.getLogger(name).setLevel(_numeric(level))
    return structlog.get_logger(name)


def bind_fit(logger: structlog.stdlib.BoundLogger, seed: int, method: str) -> structlog.stdlib.BoundLogger:
    """Attach the fit's seed and encoding label to every event it logs."""
    return logger.bind(seed=seed, method=method)


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever ``sys.stderr`` is at emit time."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, _value):
        pass


def configure_root_logger(level: str = "INFO", format_string: Optional[str] = None):
    """
    Route all records to stderr at the given level.

    Calling it again reuses the handler, so the CLI can apply the level from
    the loaded configuration after parsing its flags.
    """
    root = logging.getLogger()
    handler = next((h for h in root.handlers if isinstance(h, _StderrHandler)), None)
    if handler is None:
        handler = _StderrHandler()
        root.addHandler(handler)
    handler.setFormatter(logging.Formatter(format_string or "%(message)s"))
    root.setLevel(_numeric(level))
    for name in _NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def _numeric(level: str) -> int:
    return getattr(logging, str(level).upper(), logging.INFO)
