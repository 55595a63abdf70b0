"""
Optimizer, training loop, repeated fits and hyperparameter search.
"""

from .search import SearchSpace, random_search
from .trainer import TrainConfig, Trainer, run_many

__all__ = ["SearchSpace", "TrainConfig", "Trainer", "random_search", "run_many"]
