"""
Random hyperparameter search over the architecture and optimizer space.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..utils.errors import ParameterError
from ..utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class SearchSpace:
    """Categorical sets and continuous ranges; the learning rate is sampled log-uniformly."""
    d_model: Tuple[int, ...] = (16, 32, 64, 128, 256)
    hidden: Tuple[int, ...] = (16, 32, 64, 128, 256)
    heads: Tuple[int, ...] = (1, 2, 4, 8)
    layers: Tuple[int, ...] = (1, 2, 3, 4, 5)
    spe_k: Tuple[int, ...] = (8, 16, 32)
    dropout: Tuple[float, float] = (0.1, 0.5)
    gamma: Tuple[float, float] = (0.85, 0.99)
    lr: Tuple[float, float] = (1e-4, 3e-2)

    def __post_init__(self):
        for name in ("dropout", "gamma", "lr"):
            low, high = getattr(self, name)
            if not low <= high:
                raise ParameterError(f"Empty range for {name}: [{low}, {high}]")
        if self.lr[0] <= 0:
            raise ParameterError("Learning-rate range must be positive")
        for name in ("d_model", "hidden", "heads", "layers", "spe_k"):
            if not getattr(self, name):
                raise ParameterError(f"No choices for {name}")

    def sample(self, rng: np.random.Generator) -> Dict[str, float]:
        """Draw one configuration; d_model is drawn among the sizes divisible by the head count."""
        heads = int(rng.choice(self.heads))
        divisible = [d for d in self.d_model if d % heads == 0]
        if not divisible:
            raise ParameterError(f"No embedding size in {self.d_model} is divisible by {heads} heads")
        log_low, log_high = math.log(self.lr[0]), math.log(self.lr[1])
        return {
            "d_model": int(rng.choice(divisible)),
            "hidden": int(rng.choice(self.hidden)),
            "heads": heads,
            "layers": int(rng.choice(self.layers)),
            "dropout": float(rng.uniform(*self.dropout)),
            "gamma": float(rng.uniform(*self.gamma)),
            "lr": float(math.exp(rng.uniform(log_low, log_high))),
            "spe_k": int(rng.choice(self.spe_k)),
        }

    def contains(self, trial: Mapping[str, float]) -> bool:
        categorical = all(
            trial[name] in getattr(self, name) for name in ("d_model", "hidden", "heads", "layers", "spe_k")
        )
        continuous = all(
            getattr(self, name)[0] <= trial[name] <= getattr(self, name)[1]
            for name in ("dropout", "gamma", "lr")
        )
        return categorical and continuous and trial["d_model"] % trial["heads"] == 0


@dataclass
class Trial:
    index: int
    params: Dict[str, float]
    val_loss: float
    accuracy: Dict[int, float] = field(default_factory=dict)

    def row(self) -> Dict[str, float]:
        row = {"trial": self.index}
        row.update(self.params)
        row["val_loss"] = self.val_loss
        for k, value in sorted(self.accuracy.items()):
            row[f"acc{k}"] = value
        return row


@dataclass
class SearchResult:
    best: Trial
    trials: List[Trial]


Objective = Callable[[Dict[str, float]], Tuple[float, Dict[int, float]]]


def random_search(
    space: SearchSpace,
    budget: int,
    seed: int,
    objective: Objective,
    on_trial: Optional[Callable[[Trial], None]] = None,
) -> SearchResult:
    """
    Sample ``budget`` configurations uniformly and keep the lowest validation loss.

    Args:
        space: Search space
        budget: Number of trials
        seed: Seed of the sampling stream
        objective: Maps a sampled configuration to (validation loss, test accuracy@k)
        on_trial: Called after every trial, e.g. to append to a trial log

    Returns:
        Best trial (first one on ties) and every trial in sampling order
    """
    if budget < 1:
        raise ParameterError(f"Search budget must be at least 1, got {budget}")

    rng = np.random.default_rng(seed)
    trials: List[Trial] = []
    for index in range(budget):
        params = space.sample(rng)
        val_loss, accuracy = objective(params)
        trial = Trial(index, params, float(val_loss), dict(accuracy))
        trials.append(trial)
        logger.info("Trial finished", trial=index, val_loss=trial.val_loss, **params)
        if on_trial is not None:
            on_trial(trial)

    best = min(trials, key=lambda t: (t.val_loss, t.index))
    logger.info("Search finished", best_trial=best.index, val_loss=best.val_loss)
    return SearchResult(best, trials)
