"""
Utility modules for common functionality.
"""

from .errors import ConfigurationError, DataError, NumericError, SpeMonitorError
from .logger import configure_root_logger, setup_logger

__all__ = [
    "ConfigurationError",
    "DataError",
    "NumericError",
    "SpeMonitorError",
    "configure_root_logger",
    "setup_logger",
]
