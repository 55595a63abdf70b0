"""
Unit tests for next-token pairs and batches.
"""

import numpy as np
import pytest

from src.collectors.event_log import EOS, PAD, SOS, Trace, Vocabulary, encode_trace
from src.nn.batching import make_batch, make_training_pairs
from src.utils.errors import DataError


def _encode(activities, l_max):
    vocab = Vocabulary(["a", "b", "c"])
    return encode_trace(Trace("c", tuple(activities)), vocab, l_max)


class TestTrainingPairs:
    """Test suite for the one-step shift."""

    def test_shift(self):
        """[SOS, a, b, EOS, PAD, PAD] gives targets [a, b, EOS, PAD, PAD] with PAD ignored."""
        pairs = make_training_pairs(_encode("ab", 6))

        assert pairs.inputs.tolist() == [SOS, 3, 4, EOS, PAD]
        assert pairs.targets.tolist() == [3, 4, EOS, PAD, PAD]
        assert pairs.mask.tolist() == [True, True, True, False, False]

    @pytest.mark.parametrize("activities", ["a", "ab", "abc", "cabba"])
    def test_valid_target_count(self, activities):
        """A trace of m activities yields m + 1 valid targets."""
        pairs = make_training_pairs(_encode(activities, 12))

        assert int(pairs.mask.sum()) == len(activities) + 1

    def test_minimal_trace(self):
        pairs = make_training_pairs(_encode("a", 3))

        assert pairs.targets[pairs.mask].tolist() == [3, EOS]

    def test_sos_is_never_a_target(self):
        pairs = make_training_pairs(_encode("abc", 8))

        assert SOS not in pairs.targets.tolist()


class TestMakeBatch:
    """Test suite for padded batches."""

    def test_trims_to_longest_trace(self):
        batch = make_batch([_encode("a", 10), _encode("abc", 10)])

        assert batch.inputs.shape == (2, 4)
        assert batch.targets[1].tolist() == [3, 4, 5, EOS]
        assert batch.mask.sum() == 2 + 4

    def test_matches_pairs(self):
        traces = [_encode("ab", 7), _encode("cab", 7)]

        batch = make_batch(traces)

        for row, trace in enumerate(traces):
            pairs = make_training_pairs(trace)
            width = batch.inputs.shape[1]
            assert np.array_equal(batch.inputs[row], pairs.inputs[:width])
            assert np.array_equal(batch.mask[row], pairs.mask[:width])
            assert not pairs.mask[width:].any()

    def test_empty(self):
        with pytest.raises(DataError):
            make_batch([])
