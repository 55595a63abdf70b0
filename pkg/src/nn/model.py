"""
Decoder-only transformer for next-activity prediction.

Pipeline: token embedding -> positional encoding -> dropout -> ``layers`` Pre-LN
blocks (x + MHA(LN(x)), optionally x + FFN(LN(x))) -> final LN -> two fully
connected layers with a ReLU in between. Logits row i scores the token at
position i + 1.
"""

from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..collectors.event_log import PAD, SOS
from ..utils.errors import ConfigurationError, DataError, ParameterError, ShapeError
from . import core
from .core import Parameter, Tensor
from .pos_encoding import PEConfig, PEMode, SpeContext, apply_pe, apply_pe_backward

EXCLUDED_FROM_RANKING = (PAD, SOS)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters."""
    vocab_size: int
    d_model: int = 64
    hidden: int = 128
    heads: int = 4
    layers: int = 4
    dropout: float = 0.216375
    pe_mode: PEMode = PEMode.NONE
    spe_k: int = 32
    ffn_in_blocks: bool = False
    ln_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "pe_mode", PEMode.parse(self.pe_mode))
        if self.vocab_size < 4:
            raise ConfigurationError(f"Vocabulary needs at least one activity, size={self.vocab_size}")
        if self.heads < 1 or self.d_model % self.heads:
            raise ConfigurationError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if self.layers < 1:
            raise ConfigurationError(f"Need at least one layer, got {self.layers}")
        if self.hidden < 1 or self.spe_k < 1:
            raise ConfigurationError("hidden and spe_k must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"Dropout must be in [0, 1), got {self.dropout}")
        if self.pe_mode is PEMode.SINUSOIDAL and self.d_model % 2:
            raise ConfigurationError("Sinusoidal encoding needs an even d_model")

    @property
    def pe(self) -> PEConfig:
        return PEConfig(self.pe_mode, self.spe_k, self.d_model)

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["pe_mode"] = self.pe_mode.value
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelConfig":
        return cls(**data)


class ModelParams:
    """Ordered registry of named parameters."""

    def __init__(self, params: Sequence[Parameter]):
        self._params: "OrderedDict[str, Parameter]" = OrderedDict((p.name, p) for p in params)

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return list(self._params)

    def count(self) -> int:
        return sum(p.size for p in self)

    def zero_grad(self) -> None:
        for param in self:
            param.zero_grad()

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self}

    def restore(self, snapshot: Dict[str, np.ndarray]) -> None:
        for param in self:
            np.copyto(param.value, snapshot[param.name])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p.value)) for p in self)


def parameter_shapes(config: ModelConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Names and shapes of every parameter, in creation order."""
    d, h, v = config.d_model, config.hidden, config.vocab_size
    shapes: List[Tuple[str, Tuple[int, ...]]] = [("embedding.weight", (v, d))]
    if config.pe_mode is PEMode.STRUCTURAL:
        shapes += [("spe.theta.weight", (config.spe_k, d)), ("spe.theta.bias", (d,))]
    for layer in range(config.layers):
        prefix = f"blocks.{layer}"
        shapes += [(f"{prefix}.ln_attn.gain", (d,)), (f"{prefix}.ln_attn.bias", (d,))]
        for proj in ("q", "k", "v", "o"):
            shapes += [(f"{prefix}.attn.{proj}.weight", (d, d)), (f"{prefix}.attn.{proj}.bias", (d,))]
        if config.ffn_in_blocks:
            shapes += [
                (f"{prefix}.ln_ffn.gain", (d,)), (f"{prefix}.ln_ffn.bias", (d,)),
                (f"{prefix}.ffn.in.weight", (d, h)), (f"{prefix}.ffn.in.bias", (h,)),
                (f"{prefix}.ffn.out.weight", (h, d)), (f"{prefix}.ffn.out.bias", (d,)),
            ]
    shapes += [
        ("final_ln.gain", (d,)), ("final_ln.bias", (d,)),
        ("head.fc1.weight", (d, h)), ("head.fc1.bias", (h,)),
        ("head.fc2.weight", (h, v)), ("head.fc2.bias", (v,)),
    ]
    return shapes


def parameter_count(config: ModelConfig) -> int:
    return int(sum(np.prod(shape) for _, shape in parameter_shapes(config)))


def init_params(config: ModelConfig, seed: int, dtype=np.float32) -> ModelParams:
    """Glorot-uniform weights, zero biases, unit layer-norm gains; deterministic under seed."""
    rng = np.random.default_rng(seed)
    params = []
    for name, shape in parameter_shapes(config):
        if name.endswith(".gain"):
            value = np.ones(shape, dtype=dtype)
        elif name.endswith(".bias"):
            value = np.zeros(shape, dtype=dtype)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            value = rng.uniform(-limit, limit, size=shape).astype(dtype)
        params.append(Parameter(name, value))
    return ModelParams(params)


class NextActivityTransformer:
    """Forward and backward passes over a ModelParams registry."""

    def __init__(self, config: ModelConfig, params: ModelParams, spe: Optional[SpeContext] = None):
        self.config = config
        self.params = params
        self.spe = spe
        self._caches: Optional[dict] = None

        expected = parameter_shapes(config)
        actual = [(p.name, p.shape) for p in params]
        if expected != actual:
            raise ShapeError("Parameters do not match the model configuration")
        if config.pe_mode is PEMode.STRUCTURAL:
            if spe is None:
                raise ConfigurationError("Structural encoding needs an ontology embedding table")
            if spe.k != config.spe_k:
                raise ConfigurationError(f"Ontology table has k={spe.k}, model expects {config.spe_k}")
            if spe.vocab.size != config.vocab_size:
                raise ConfigurationError("Ontology table vocabulary does not match the model")

    @property
    def dtype(self):
        return self.params["embedding.weight"].value.dtype

    def _theta(self) -> Optional[Tuple[Parameter, Parameter]]:
        if self.config.pe_mode is PEMode.STRUCTURAL:
            return self.params["spe.theta.weight"], self.params["spe.theta.bias"]
        return None

    def _linear(self, x: Tensor, name: str) -> Tuple[Tensor, tuple]:
        return core.linear(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"])

    def _layer_norm(self, x: Tensor, name: str) -> Tuple[Tensor, tuple]:
        return core.layer_norm(x, self.params[f"{name}.gain"], self.params[f"{name}.bias"],
                               self.config.ln_eps)

    def _split_heads(self, x: Tensor) -> Tensor:
        batch, n, _ = x.shape
        return x.reshape(batch, n, self.config.heads, self.config.head_dim).transpose(0, 2, 1, 3)

    def _merge_heads(self, x: Tensor) -> Tensor:
        batch, _, n, _ = x.shape
        return x.transpose(0, 2, 1, 3).reshape(batch, n, self.config.d_model)

    def _attention(self, h: Tensor, prefix: str, training: bool, rng) -> Tuple[Tensor, dict]:
        q, cq = self._linear(h, f"{prefix}.attn.q")
        k, ck = self._linear(h, f"{prefix}.attn.k")
        v, cv = self._linear(h, f"{prefix}.attn.v")
        heads, c_att = core.causal_attention(
            self._split_heads(q), self._split_heads(k), self._split_heads(v)
        )
        out, co = self._linear(self._merge_heads(heads), f"{prefix}.attn.o")
        out, c_drop = core.dropout(out, self.config.dropout, training, rng)
        return out, {"q": cq, "k": ck, "v": cv, "att": c_att, "o": co, "drop": c_drop}

    def _attention_backward(self, dout: Tensor, prefix: str, cache: dict) -> Tensor:
        dout = core.dropout_backward(dout, cache["drop"])
        dheads = self._split_heads(core.linear_backward(dout, cache["o"]))
        dq, dk, dv = core.causal_attention_backward(dheads, cache["att"])
        return (
            core.linear_backward(self._merge_heads(dq), cache["q"])
            + core.linear_backward(self._merge_heads(dk), cache["k"])
            + core.linear_backward(self._merge_heads(dv), cache["v"])
        )

    def _ffn(self, h: Tensor, prefix: str, training: bool, rng) -> Tuple[Tensor, dict]:
        a, c_in = self._linear(h, f"{prefix}.ffn.in")
        a, c_relu = core.relu(a)
        out, c_out = self._linear(a, f"{prefix}.ffn.out")
        out, c_drop = core.dropout(out, self.config.dropout, training, rng)
        return out, {"in": c_in, "relu": c_relu, "out": c_out, "drop": c_drop}

    def _ffn_backward(self, dout: Tensor, cache: dict) -> Tensor:
        dout = core.dropout_backward(dout, cache["drop"])
        da = core.relu_backward(core.linear_backward(dout, cache["out"]), cache["relu"])
        return core.linear_backward(da, cache["in"])

    def forward(self, ids, training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Compute logits for ids of shape [n] or [batch, n].

        Returns logits of shape [n, V] or [batch, n, V]. Caches activations for
        backward.
        """
        ids = np.asarray(ids, dtype=np.int64)
        single = ids.ndim == 1
        if single:
            ids = ids[None, :]
        if ids.ndim != 2 or ids.shape[1] < 1:
            raise ShapeError(f"Expected ids of shape [n] or [batch, n] with n >= 1, got {ids.shape}")

        caches: dict = {"single": single, "blocks": []}
        x, caches["embed"] = core.embedding_lookup(self.params["embedding.weight"], ids)
        x, caches["pe"] = apply_pe(x, ids, self.config.pe, self.spe, self._theta())
        x, caches["pe_drop"] = core.dropout(x, self.config.dropout, training, rng)

        for layer in range(self.config.layers):
            prefix = f"blocks.{layer}"
            block: dict = {}
            h, block["ln_attn"] = self._layer_norm(x, f"{prefix}.ln_attn")
            a, block["attn"] = self._attention(h, prefix, training, rng)
            x = x + a
            if self.config.ffn_in_blocks:
                h, block["ln_ffn"] = self._layer_norm(x, f"{prefix}.ln_ffn")
                f, block["ffn"] = self._ffn(h, prefix, training, rng)
                x = x + f
            caches["blocks"].append(block)

        x, caches["final_ln"] = self._layer_norm(x, "final_ln")
        hidden, caches["fc1"] = self._linear(x, "head.fc1")
        hidden, caches["relu"] = core.relu(hidden)
        logits, caches["fc2"] = self._linear(hidden, "head.fc2")

        self._caches = caches
        return logits[0] if single else logits

    def backward(self, dlogits: Tensor) -> None:
        """Accumulate parameter gradients for the most recent forward pass."""
        if self._caches is None:
            raise RuntimeError("backward called before forward")
        caches = self._caches
        if caches["single"]:
            dlogits = dlogits[None]

        dx = core.linear_backward(dlogits, caches["fc2"])
        dx = core.relu_backward(dx, caches["relu"])
        dx = core.linear_backward(dx, caches["fc1"])
        dx = core.layer_norm_backward(dx, caches["final_ln"])

        for layer in reversed(range(self.config.layers)):
            prefix = f"blocks.{layer}"
            block = caches["blocks"][layer]
            if self.config.ffn_in_blocks:
                dh = self._ffn_backward(dx, block["ffn"])
                dx = dx + core.layer_norm_backward(dh, block["ln_ffn"])
            dh = self._attention_backward(dx, prefix, block["attn"])
            dx = dx + core.layer_norm_backward(dh, block["ln_attn"])

        dx = core.dropout_backward(dx, caches["pe_drop"])
        dx = apply_pe_backward(dx, caches["pe"])
        core.embedding_backward(dx, caches["embed"])
        self._caches = None

    def logits(self, ids) -> Tensor:
        """Inference-mode forward pass."""
        out = self.forward(ids, training=False)
        self._caches = None
        return out

    def predict_topk(self, prefix: Sequence[int], k: int) -> List[Tuple[int, float]]:
        """
        Rank candidate next tokens after a prefix.

        PAD and SOS are never ranked; EOS is. Ties go to the lower token id.
        Probabilities are not renormalized after the exclusion.
        """
        if k < 1:
            raise ParameterError(f"k must be at least 1, got {k}")
        prefix = np.asarray(prefix, dtype=np.int64)
        if prefix.ndim != 1 or prefix.size == 0:
            raise ShapeError("Prefix must be a non-empty id sequence")
        if prefix[0] != SOS:
            raise DataError("Prefix must start with the SOS token")

        probs = core.softmax_rows(self.logits(prefix)[-1].astype(np.float64))
        candidates = np.setdiff1d(np.arange(probs.size), EXCLUDED_FROM_RANKING)
        order = candidates[np.lexsort((candidates, -probs[candidates]))]
        return [(int(token), float(probs[token])) for token in order[:k]]
