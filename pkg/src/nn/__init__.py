"""
NumPy transformer with explicit forward and backward passes.
"""

from .model import ModelConfig, NextActivityTransformer, init_params, parameter_count
from .pos_encoding import PEMode

__all__ = ["ModelConfig", "NextActivityTransformer", "PEMode", "init_params", "parameter_count"]
