"""
Positional encodings added to activity embeddings: sinusoidal (order) and
structural (ontology position, projected by a learned affine map).
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from ..collectors.event_log import Vocabulary
from ..collectors.ontology import NodeEmbeddingTable, token_embedding_matrix
from ..utils.errors import ConfigurationError, ParameterError, ShapeError
from .core import Parameter, Tensor


class PEMode(str, Enum):
    NONE = "none"
    SINUSOIDAL = "sin"
    STRUCTURAL = "spe"

    @classmethod
    def parse(cls, value) -> "PEMode":
        if isinstance(value, PEMode):
            return value
        aliases = {"sinusoidal": cls.SINUSOIDAL, "structural": cls.STRUCTURAL, "pe": cls.SINUSOIDAL}
        text = str(value).strip().lower()
        if text in aliases:
            return aliases[text]
        try:
            return cls(text)
        except ValueError:
            raise ConfigurationError(
                f"Unknown positional encoding {value!r}; expected none, sin or spe"
            ) from None

    @property
    def label(self) -> str:
        return {"none": "None", "sin": "PE", "spe": "SPE"}[self.value]


@dataclass(frozen=True)
class PEConfig:
    mode: PEMode = PEMode.NONE
    k: int = 32
    d: int = 64

    def __post_init__(self):
        object.__setattr__(self, "mode", PEMode.parse(self.mode))
        if self.k < 1 or self.d < 1:
            raise ConfigurationError(f"PE dimensions must be positive (k={self.k}, d={self.d})")


class SpeContext:
    """Frozen ontology embeddings aligned with a vocabulary as a [V x k] matrix."""

    def __init__(self, table: NodeEmbeddingTable, vocab: Vocabulary):
        self.table = table
        self.vocab = vocab
        matrix = token_embedding_matrix(table, vocab)
        matrix.setflags(write=False)
        self.token_matrix = matrix

    @property
    def k(self) -> int:
        return self.table.k


@lru_cache(maxsize=32)
def _sinusoidal_table(n: int, d: int) -> np.ndarray:
    positions = np.arange(n, dtype=np.float64)[:, None]
    rates = np.power(10000.0, np.arange(0, d, 2, dtype=np.float64) / d)
    table = np.empty((n, d), dtype=np.float64)
    table[:, 0::2] = np.sin(positions / rates)
    table[:, 1::2] = np.cos(positions / rates)
    table.setflags(write=False)
    return table


def sinusoidal_pe(n: int, d: int, dtype=np.float64) -> Tensor:
    """PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same)."""
    if d % 2:
        raise ParameterError(f"Sinusoidal encoding needs an even dimension, got {d}")
    if n < 0:
        raise ParameterError(f"Sequence length must be non-negative, got {n}")
    return _sinusoidal_table(n, d).astype(dtype, copy=False)


def structural_pe(
    ids,
    context: SpeContext,
    theta_w: Parameter,
    theta_b: Parameter,
) -> Tuple[Tensor, tuple]:
    """Row i = embedding_for_token(ids[i]) @ theta_w + theta_b."""
    ids = np.asarray(ids, dtype=np.int64)
    if theta_w.shape[0] != context.k:
        raise ShapeError(f"Theta expects k={theta_w.shape[0]}, ontology gives k={context.k}")
    features = context.token_matrix[ids].astype(theta_w.value.dtype, copy=False)
    return features @ theta_w.value + theta_b.value, (features, theta_w, theta_b)


def structural_pe_backward(dout: Tensor, cache: tuple) -> None:
    features, theta_w, theta_b = cache
    k, d = theta_w.shape
    theta_w.grad += features.reshape(-1, k).T @ dout.reshape(-1, d)
    theta_b.grad += dout.reshape(-1, d).sum(axis=0)


def apply_pe(
    x: Tensor,
    ids,
    config: PEConfig,
    context: Optional[SpeContext] = None,
    theta: Optional[Tuple[Parameter, Parameter]] = None,
) -> Tuple[Tensor, Optional[tuple]]:
    """
    Add the configured positional encoding to embeddings x [..., n, d].

    Returns the encoded tensor and a cache for apply_pe_backward (None unless
    the encoding has learnable parameters).
    """
    n, d = x.shape[-2], x.shape[-1]
    if d != config.d:
        raise ShapeError(f"Embeddings have d={d}, PE configured for d={config.d}")

    if config.mode is PEMode.NONE:
        return x, None
    if config.mode is PEMode.SINUSOIDAL:
        return x + sinusoidal_pe(n, d, x.dtype), None

    if context is None or theta is None:
        raise ConfigurationError("Structural encoding needs an ontology embedding table and Theta")
    encoding, cache = structural_pe(ids, context, *theta)
    return x + encoding, cache


def apply_pe_backward(dout: Tensor, cache: Optional[tuple]) -> Tensor:
    if cache is not None:
        structural_pe_backward(dout, cache)
    return dout
