"""
Accuracy-at-k evaluation of next-activity models.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Protocol, Sequence, Tuple

import numpy as np

from ..collectors.event_log import EncodedTrace
from ..nn.batching import make_batch
from ..nn.core import softmax_rows
from ..nn.model import EXCLUDED_FROM_RANKING
from ..utils.errors import AggregationError, EvaluationError, ParameterError
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

DEFAULT_KS = (1, 3, 5)


class Scorer(Protocol):
    """Anything that maps [B x n] token ids to [B x n x V] next-token logits."""

    def logits(self, ids) -> np.ndarray:
        ...


@dataclass
class EvalReport:
    """Hit counts over every scored position of a dataset."""
    ks: Tuple[int, ...]
    hits: Dict[int, int]
    valid_positions: int
    prefix_hits: Dict[int, int] = field(default_factory=dict)
    prefix_counts: Dict[int, int] = field(default_factory=dict)

    @property
    def accuracy(self) -> Dict[int, float]:
        return {k: self.hits[k] / self.valid_positions for k in self.ks}

    @property
    def prefix_accuracy(self) -> Dict[int, float]:
        """Accuracy@1 keyed by the number of activities in the prefix."""
        return {
            length: self.prefix_hits.get(length, 0) / count
            for length, count in sorted(self.prefix_counts.items())
        }

    def as_dict(self) -> Dict[str, float]:
        return {f"acc@{k}": value for k, value in self.accuracy.items()}

    def merge(self, other: "EvalReport") -> "EvalReport":
        if self.ks != other.ks:
            raise AggregationError(f"Cannot merge reports over k={self.ks} and k={other.ks}")
        lengths = set(self.prefix_counts) | set(other.prefix_counts)
        return EvalReport(
            ks=self.ks,
            hits={k: self.hits[k] + other.hits[k] for k in self.ks},
            valid_positions=self.valid_positions + other.valid_positions,
            prefix_hits={
                n: self.prefix_hits.get(n, 0) + other.prefix_hits.get(n, 0) for n in sorted(lengths)
            },
            prefix_counts={
                n: self.prefix_counts.get(n, 0) + other.prefix_counts.get(n, 0) for n in sorted(lengths)
            },
        )


@dataclass(frozen=True)
class AggregateReport:
    """Population mean and standard deviation of accuracy@k across runs."""
    ks: Tuple[int, ...]
    mean: Dict[int, float]
    std: Dict[int, float]
    n_runs: int


def _check_ks(ks: Iterable[int]) -> Tuple[int, ...]:
    ks = tuple(sorted({int(k) for k in ks}))
    if not ks or ks[0] < 1:
        raise ParameterError(f"Every k must be at least 1, got {ks}")
    return ks


def target_ranks(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """
    Zero-based rank of each target among the rankable tokens.

    A token outranks the target when its probability is higher, or equal with
    a lower id. PAD and SOS are never counted.
    """
    probs = softmax_rows(np.asarray(logits, dtype=np.float64))
    probs[..., list(EXCLUDED_FROM_RANKING)] = -np.inf
    targets = np.asarray(targets, dtype=np.int64)[..., None]
    target_probs = np.take_along_axis(probs, targets, axis=-1)
    token_ids = np.arange(probs.shape[-1])
    outranks = (probs > target_probs) | ((probs == target_probs) & (token_ids < targets))
    return outranks.sum(axis=-1)


def accuracy_at_k(
    model: Scorer,
    dataset: Sequence[EncodedTrace],
    ks: Iterable[int] = DEFAULT_KS,
    batch_size: int = 64,
) -> EvalReport:
    """
    Micro-averaged accuracy@k over every valid next-token position.

    A position is valid when its target is not PAD, which is exactly the set of
    positions contributing to the training loss. EOS targets count.

    Args:
        model: Scorer producing next-token logits
        dataset: Encoded traces sharing the model's vocabulary
        ks: Cut-offs to report
        batch_size: Traces scored per forward pass

    Returns:
        EvalReport with hit counts and a per-prefix-length accuracy@1 breakdown
    """
    if not dataset:
        raise EvaluationError("Cannot evaluate on an empty dataset")
    ks = _check_ks(ks)

    hits = {k: 0 for k in ks}
    valid = 0
    prefix_hits: Dict[int, int] = {}
    prefix_counts: Dict[int, int] = {}
    for start in range(0, len(dataset), batch_size):
        batch = make_batch(dataset[start:start + batch_size])
        ranks = target_ranks(model.logits(batch.inputs), batch.targets)
        mask = batch.mask
        for k in ks:
            hits[k] += int(((ranks < k) & mask).sum())
        valid += int(mask.sum())

        lengths = np.broadcast_to(np.arange(mask.shape[1]), mask.shape)[mask]
        counts = np.bincount(lengths)
        top1 = np.bincount(lengths, weights=(ranks == 0)[mask])
        for length in np.flatnonzero(counts):
            length = int(length)
            prefix_counts[length] = prefix_counts.get(length, 0) + int(counts[length])
            prefix_hits[length] = prefix_hits.get(length, 0) + int(top1[length])

    if valid == 0:
        raise EvaluationError("Dataset has no scorable positions")
    logger.debug(f"Scored {valid} positions over {len(dataset)} traces")
    return EvalReport(ks, hits, valid, dict(sorted(prefix_hits.items())),
                      dict(sorted(prefix_counts.items())))


def aggregate_runs(reports: Sequence[EvalReport]) -> AggregateReport:
    """Population mean and std of accuracy@k over reports with identical k sets."""
    if not reports:
        raise AggregationError("Need at least one report to aggregate")
    ks = reports[0].ks
    for report in reports[1:]:
        if report.ks != ks:
            raise AggregationError(f"Mismatched k sets: {ks} and {report.ks}")

    table = np.array([[report.accuracy[k] for k in ks] for report in reports])
    mean, std = table.mean(axis=0), table.std(axis=0)
    return AggregateReport(
        ks=ks,
        mean={k: float(m) for k, m in zip(ks, mean)},
        std={k: float(s) for k, s in zip(ks, std)},
        n_runs=len(reports),
    )

