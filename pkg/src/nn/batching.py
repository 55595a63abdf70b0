"""
Next-token training pairs and padded batches.
"""

from typing import NamedTuple, Sequence

import numpy as np

from ..collectors.event_log import PAD, EncodedTrace
from ..utils.errors import DataError

# Target ids that never contribute to the loss or to accuracy. SOS cannot be a
# target since it only appears at position 0.
IGNORED_TARGETS = (PAD,)


class TrainingPairs(NamedTuple):
    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray


def make_training_pairs(trace: EncodedTrace) -> TrainingPairs:
    """Shift by one: inputs = ids[:-1], targets = ids[1:], mask marks non-PAD targets."""
    ids = trace.as_array()
    inputs, targets = ids[:-1], ids[1:]
    return TrainingPairs(inputs, targets, ~np.isin(targets, IGNORED_TARGETS))


def make_batch(traces: Sequence[EncodedTrace]) -> TrainingPairs:
    """
    Stack traces into [B x n] pairs, trimmed to the longest true length in the batch.

    Trimming only drops columns whose targets are PAD for every row, so the
    loss and its gradients are unchanged.
    """
    if not traces:
        raise DataError("Cannot build a batch from zero traces")
    width = max(trace.true_length for trace in traces) - 1
    ids = np.stack([trace.as_array()[:width + 1] for trace in traces])
    inputs, targets = ids[:, :-1], ids[:, 1:]
    return TrainingPairs(inputs, targets, ~np.isin(targets, IGNORED_TARGETS))
