"""
AdamW with decoupled weight decay and a step-decay learning-rate schedule.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from ..nn.core import Parameter
from ..utils.errors import ParameterError


@dataclass(frozen=True)
class AdamWHyper:
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class AdamWState:
    """First and second moments per parameter name plus the step counter."""
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(cls, params: Iterable[Parameter]) -> "AdamWState":
        state = cls()
        for p in params:
            state.m[p.name] = np.zeros_like(p.value)
            state.v[p.name] = np.zeros_like(p.value)
        return state


def adamw_step(
    params: Sequence[Parameter],
    state: AdamWState,
    lr: float,
    hyper: AdamWHyper = AdamWHyper(),
    no_decay: Iterable[str] = (),
) -> None:
    """
    One AdamW update in place, using the gradients stored on ``params``.

    Weight decay shrinks a parameter by (1 - lr * weight_decay) separately from
    the bias-corrected Adam step. Parameters named in ``no_decay`` skip it.
    """
    beta1, beta2 = hyper.betas
    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t
    skip = set(no_decay)

    for p in params:
        m, v = state.m[p.name], state.v[p.name]
        m *= beta1
        m += (1.0 - beta1) * p.grad
        v *= beta2
        v += (1.0 - beta2) * p.grad * p.grad
        if hyper.weight_decay and p.name not in skip:
            p.value *= 1.0 - lr * hyper.weight_decay
        p.value -= lr * (m / correction1) / (np.sqrt(v / correction2) + hyper.eps)


class AdamW:
    """Stateful AdamW over a parameter collection; decay applies to every parameter."""

    def __init__(
        self,
        params: Iterable[Parameter],
        hyper: AdamWHyper = AdamWHyper(),
        no_decay: Iterable[str] = (),
    ):
        self.params = list(params)
        self.hyper = hyper
        self.state = AdamWState.zeros(self.params)
        self.no_decay = frozenset(no_decay)

    def step(self, lr: float) -> None:
        adamw_step(self.params, self.state, lr, self.hyper, self.no_decay)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def step_lr(lr0: float, gamma: float, step_epochs: int, epoch: int) -> float:
    """lr0 * gamma ** floor(epoch / step_epochs)."""
    if epoch < 0:
        raise ParameterError(f"Epoch must be non-negative, got {epoch}")
    if step_epochs < 1:
        raise ParameterError(f"step_epochs must be at least 1, got {step_epochs}")
    return lr0 * gamma ** (epoch // step_epochs)
