"""
Unit tests for logging helpers.
"""

import logging

import numpy as np

from src.utils.logger import _StderrHandler, configure_root_logger, numpy_to_python


class TestNumpyToPython:
    """Test suite for the numpy-cleaning processor."""

    def test_scalars_and_nesting(self):
        event = {"loss": np.float64(0.5), "ks": (np.int64(1), 3), "acc": {1: np.float32(0.25)}}

        cleaned = numpy_to_python(None, "info", event)

        assert cleaned == {"loss": 0.5, "ks": [1, 3], "acc": {1: 0.25}}
        assert type(cleaned["loss"]) is float

    def test_large_array_is_summarized(self):
        cleaned = numpy_to_python(None, "info", {"w": np.zeros((8, 8)), "b": np.ones(2)})

        assert cleaned["w"] == "<array shape=(8, 8) dtype=float64>"
        assert cleaned["b"] == [1.0, 1.0]


class TestConfigureRootLogger:
    """Test suite for configure_root_logger."""

    def test_reuses_handler(self):
        root = logging.getLogger()
        before = root.level
        try:
            configure_root_logger("DEBUG")
            configure_root_logger("warning")

            handlers = [h for h in root.handlers if isinstance(h, _StderrHandler)]
            assert len(handlers) == 1
            assert root.level == logging.WARNING
        finally:
            root.setLevel(before)

    def test_unknown_level_falls_back_to_info(self):
        root = logging.getLogger()
        before = root.level
        try:
            configure_root_logger("chatty")
            assert root.level == logging.INFO
        finally:
            root.setLevel(before)
