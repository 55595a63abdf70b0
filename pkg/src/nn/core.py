"""
Differentiable primitives for the transformer.

Every primitive has a forward function returning ``(output, cache)`` and a
matching ``*_backward`` function. Backward functions return input gradients and
accumulate parameter gradients into ``Parameter.grad``. All primitives accept
arbitrary leading batch dimensions; the trailing axes follow the shapes in
their docstrings.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Collection, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import DivergenceError, ParameterError, ShapeError

Tensor = np.ndarray

MASK_VALUE = -1e9


@dataclass
class Parameter:
    """Learnable tensor with a gradient buffer of identical shape."""
    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    def zero_grad(self) -> None:
        self.grad.fill(0)


def check_finite(tensor, what: str = "tensor"):
    """Return ``tensor`` unchanged, or raise DivergenceError if it holds NaN or Inf."""
    if not np.all(np.isfinite(tensor)):
        raise DivergenceError(f"Non-finite {what}")
    return tensor


# Embedding

def embedding_lookup(table: Parameter, ids) -> Tuple[Tensor, tuple]:
    """Gather rows of a [V x d] table: out[..., i, :] = table[ids[..., i]]."""
    ids = np.asarray(ids, dtype=np.int64)
    vocab_size = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise IndexError(f"Token id out of range for a table of {vocab_size} rows")
    return table.value[ids], (table, ids)


def embedding_backward(dout: Tensor, cache: tuple) -> None:
    table, ids = cache
    np.add.at(table.grad, ids.reshape(-1), dout.reshape(-1, table.shape[1]))


# Affine map

def linear(x: Tensor, weight: Parameter, bias: Parameter) -> Tuple[Tensor, tuple]:
    """x [..., p] @ weight [p x q] + bias [q]."""
    p, q = weight.shape
    if x.shape[-1] != p or bias.shape != (q,):
        raise ShapeError(
            f"linear: input {x.shape}, weight {weight.shape}, bias {bias.shape} do not agree"
        )
    return x @ weight.value + bias.value, (x, weight, bias)


def linear_backward(dout: Tensor, cache: tuple) -> Tensor:
    x, weight, bias = cache
    p, q = weight.shape
    weight.grad += x.reshape(-1, p).T @ dout.reshape(-1, q)
    bias.grad += dout.reshape(-1, q).sum(axis=0)
    return dout @ weight.value.T


# Layer normalization

def layer_norm(x: Tensor, gain: Parameter, bias: Parameter, eps: float = 1e-5) -> Tuple[Tensor, tuple]:
    """Normalize the last axis to zero mean / unit population variance, then scale and shift."""
    if x.shape[-1] < 1:
        raise ShapeError("layer_norm needs at least one feature")
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normalized = centered * inv_std
    return normalized * gain.value + bias.value, (normalized, inv_std, gain, bias)


def layer_norm_backward(dout: Tensor, cache: tuple) -> Tensor:
    normalized, inv_std, gain, bias = cache
    d = normalized.shape[-1]
    gain.grad += (dout * normalized).reshape(-1, d).sum(axis=0)
    bias.grad += dout.reshape(-1, d).sum(axis=0)
    dnorm = dout * gain.value
    return inv_std * (
        dnorm
        - dnorm.mean(axis=-1, keepdims=True)
        - normalized * (dnorm * normalized).mean(axis=-1, keepdims=True)
    )


# Softmax and activations

def softmax_rows(x: Tensor) -> Tensor:
    shifted = x - x.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax_backward(dout: Tensor, y: Tensor) -> Tensor:
    return y * (dout - (dout * y).sum(axis=-1, keepdims=True))


def relu(x: Tensor) -> Tuple[Tensor, Tensor]:
    mask = x > 0
    return x * mask, mask


def relu_backward(dout: Tensor, mask: Tensor) -> Tensor:
    return dout * mask


# Attention

@lru_cache(maxsize=64)
def _causal_bias(n: int, dtype_name: str) -> np.ndarray:
    bias = np.triu(np.full((n, n), MASK_VALUE, dtype=np.dtype(dtype_name)), k=1)
    bias.setflags(write=False)
    return bias


def causal_attention(q: Tensor, k: Tensor, v: Tensor) -> Tuple[Tensor, tuple]:
    """Scaled dot-product attention over [..., n, d_h] where position i sees j <= i."""
    if not (q.shape == k.shape == v.shape):
        raise ShapeError(f"Q {q.shape}, K {k.shape}, V {v.shape} must share a shape")
    n, d_head = q.shape[-2], q.shape[-1]
    if n < 1:
        raise ShapeError("Attention needs at least one position")
    scale = 1.0 / np.sqrt(d_head)
    scores = (q @ np.swapaxes(k, -1, -2)) * scale + _causal_bias(n, q.dtype.name)
    weights = softmax_rows(scores)
    return weights @ v, (q, k, v, weights, scale)


def causal_attention_backward(dout: Tensor, cache: tuple) -> Tuple[Tensor, Tensor, Tensor]:
    q, k, v, weights, scale = cache
    dv = np.swapaxes(weights, -1, -2) @ dout
    dweights = dout @ np.swapaxes(v, -1, -2)
    dscores = softmax_backward(dweights, weights) * scale
    dq = dscores @ k
    dk = np.swapaxes(dscores, -1, -2) @ q
    return dq, dk, dv


# Dropout

def dropout(
    x: Tensor,
    rate: float,
    training: bool,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Optional[Tensor]]:
    """Inverted dropout; identity at inference or when rate is 0."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"Dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ParameterError("Training-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * mask, mask


def dropout_backward(dout: Tensor, mask: Optional[Tensor]) -> Tensor:
    return dout if mask is None else dout * mask


# Loss

class LossResult(NamedTuple):
    loss: float
    grad: Tensor
    count: int


def cross_entropy_masked(
    logits: Tensor,
    targets,
    ignore: Collection[int] = (0,),
) -> LossResult:
    """
    Mean negative log-likelihood over positions whose target is not ignored.

    Args:
        logits: [..., V] scores
        targets: [...] integer targets
        ignore: target ids excluded from the mean

    Returns:
        Loss, gradient w.r.t. logits (zero on ignored positions) and the number
        of positions that contributed. The loss is 0 when every target is ignored.
    """
    targets = np.asarray(targets, dtype=np.int64)
    vocab_size = logits.shape[-1]
    if logits.shape[:-1] != targets.shape:
        raise ShapeError(f"logits {logits.shape} and targets {targets.shape} do not agree")
    if targets.size and (targets.min() < 0 or targets.max() >= vocab_size):
        raise IndexError(f"Target id out of range for {vocab_size} classes")

    flat_logits = logits.reshape(-1, vocab_size)
    flat_targets = targets.reshape(-1)
    valid = ~np.isin(flat_targets, list(ignore))
    count = int(valid.sum())
    grad = np.zeros_like(flat_logits)
    if count == 0:
        return LossResult(0.0, grad.reshape(logits.shape), 0)

    rows = np.flatnonzero(valid)
    picked = flat_logits[rows]
    shifted = picked - picked.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    loss = -float(log_probs[np.arange(rows.size), flat_targets[rows]].sum()) / count

    probs = np.exp(log_probs)
    probs[np.arange(rows.size), flat_targets[rows]] -= 1.0
    grad[rows] = probs / count
    return LossResult(loss, grad.reshape(logits.shape), count)


# Gradient checking

class GradCheckResult(NamedTuple):
    max_rel_error: float
    checked: int
    skipped: int


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def grad_check(
    loss_fn: Callable[[], float],
    params: Sequence[Parameter],
    eps: float = 1e-5,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    kink_tol: Optional[float] = None,
) -> GradCheckResult:
    """
    Compare analytic gradients with central finite differences.

    ``loss_fn`` must run forward and backward, accumulating into the grads of
    ``params``, and return the scalar loss. Run it in double precision with
    dropout disabled.

    Args:
        loss_fn: Closure computing the loss and its gradients
        params: Parameters to check
        eps: Finite-difference step
        max_coords: Check at most this many random coordinates per parameter
        rng: Generator used to sample coordinates
        kink_tol: When set, coordinates whose differences at eps and eps/2
            disagree by more than this relative amount are treated as
            non-smooth (e.g. a ReLU kink inside the step) and skipped

    Returns:
        Maximum relative error, number of coordinates checked and skipped
    """
    for param in params:
        param.zero_grad()
    loss_fn()
    analytic = [param.grad.copy() for param in params]
    rng = rng or np.random.default_rng(0)

    def central(param: Parameter, index: tuple, step: float) -> float:
        original = param.value[index]
        param.value[index] = original + step
        upper = loss_fn()
        param.value[index] = original - step
        lower = loss_fn()
        param.value[index] = original
        return (upper - lower) / (2.0 * step)

    worst, checked, skipped = 0.0, 0, 0
    for param, grad in zip(params, analytic):
        coords: List[tuple] = list(np.ndindex(*param.shape))
        if max_coords is not None and len(coords) > max_coords:
            picks = rng.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[i] for i in sorted(picks)]
        for index in coords:
            numeric = central(param, index, eps)
            if kink_tol is not None:
                half = central(param, index, eps / 2.0)
                if relative_error(numeric, half) > kink_tol:
                    skipped += 1
                    continue
            worst = max(worst, relative_error(float(grad[index]), numeric))
            checked += 1

    for param in params:
        param.zero_grad()
    return GradCheckResult(worst, checked, skipped)
