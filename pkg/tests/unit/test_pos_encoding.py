"""
Unit tests for sinusoidal and structural positional encodings.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.collectors.event_log import PAD, SOS
from src.collectors.ontology import NodeEmbeddingTable, NodeKind
from src.nn import core
from src.nn.core import Parameter
from src.nn.pos_encoding import (
    PEConfig,
    PEMode,
    SpeContext,
    apply_pe,
    apply_pe_backward,
    sinusoidal_pe,
    structural_pe,
)
from src.utils.errors import ConfigurationError, ParameterError


def _theta(rng, k, d):
    return Parameter("w", rng.standard_normal((k, d))), Parameter("b", rng.standard_normal(d))


class TestPEMode:
    """Test suite for encoding mode parsing."""

    @pytest.mark.parametrize("text, mode", [
        ("none", PEMode.NONE), ("sin", PEMode.SINUSOIDAL), ("PE", PEMode.SINUSOIDAL),
        ("spe", PEMode.STRUCTURAL), ("Structural", PEMode.STRUCTURAL),
    ])
    def test_parse(self, text, mode):
        assert PEMode.parse(text) is mode

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            PEMode.parse("rotary")

    def test_labels(self):
        assert [m.label for m in PEMode] == ["None", "PE", "SPE"]


class TestSinusoidalPE:
    """Test suite for the sinusoidal table."""

    def test_position_zero(self):
        table = sinusoidal_pe(4, 6)

        assert_allclose(table[0], [0, 1, 0, 1, 0, 1])

    def test_scalar_value(self):
        assert sinusoidal_pe(3, 8)[1, 0] == pytest.approx(0.84147, abs=1e-5)

    def test_range(self):
        table = sinusoidal_pe(200, 64)

        assert table.shape == (200, 64)
        assert np.abs(table).max() <= 1.0

    def test_odd_dimension(self):
        with pytest.raises(ParameterError):
            sinusoidal_pe(4, 5)


class TestStructuralPE:
    """Test suite for the structural encoding."""

    def test_all_pad_rows_equal_bias(self, sample_table, sample_vocab):
        rng = np.random.default_rng(0)
        weight, bias = _theta(rng, 4, 6)

        out, _ = structural_pe([PAD] * 5, SpeContext(sample_table, sample_vocab), weight, bias)

        assert_allclose(out, np.tile(bias.value, (5, 1)))

    def test_position_independent(self, sample_table, sample_vocab):
        """The same activity at positions 2 and 7 gets identical rows."""
        rng = np.random.default_rng(1)
        weight, bias = _theta(rng, 4, 6)
        pay = sample_vocab.id_of("pay")
        ids = [SOS, 3, pay, 4, 5, 3, 4, pay]

        out, _ = structural_pe(ids, SpeContext(sample_table, sample_vocab), weight, bias)

        assert np.array_equal(out[2], out[7])

    def test_zero_weight(self, sample_table, sample_vocab):
        weight = Parameter("w", np.zeros((4, 6)))
        bias = Parameter("b", np.arange(6.0))

        out, _ = structural_pe([3, 4, 5], SpeContext(sample_table, sample_vocab), weight, bias)

        assert_allclose(out, np.tile(bias.value, (3, 1)))

    def test_shares_vectors_of_the_ontology(self, sample_table, sample_vocab):
        weight = Parameter("w", np.eye(4))
        bias = Parameter("b", np.zeros(4))
        token = sample_vocab.id_of("check")

        out, _ = structural_pe([token], SpeContext(sample_table, sample_vocab), weight, bias)

        assert_allclose(out[0], sample_table.vectors["check"])

    def test_theta_gradients(self, sample_table, sample_vocab):
        rng = np.random.default_rng(2)
        context = SpeContext(sample_table, sample_vocab)
        config = PEConfig(PEMode.STRUCTURAL, k=4, d=6)
        weight, bias = _theta(rng, 4, 6)
        ids = rng.integers(0, sample_vocab.size, size=(2, 5))
        x = rng.standard_normal((2, 5, 6))
        direction = rng.standard_normal((2, 5, 6))

        def loss():
            out, cache = apply_pe(x, ids, config, context, (weight, bias))
            apply_pe_backward(direction, cache)
            return float((out * direction).sum())

        assert core.grad_check(loss, [weight, bias]).max_rel_error < 1e-4


class TestApplyPE:
    """Test suite for adding the configured encoding."""

    def test_none_is_identity(self):
        x = np.random.default_rng(0).standard_normal((3, 4))

        out, cache = apply_pe(x, [1, 3, 4], PEConfig(PEMode.NONE, d=4))

        assert out is x
        assert cache is None

    def test_sinusoidal_on_zero_input(self):
        out, _ = apply_pe(np.zeros((5, 8)), [1] * 5, PEConfig(PEMode.SINUSOIDAL, d=8))

        assert_allclose(out, sinusoidal_pe(5, 8))

    def test_sinusoidal_batched(self):
        out, _ = apply_pe(np.zeros((2, 5, 8)), np.ones((2, 5), dtype=int), PEConfig(PEMode.SINUSOIDAL, d=8))

        assert_allclose(out[1], sinusoidal_pe(5, 8))

    def test_structural_with_zero_table(self, sample_vocab):
        """An all-zero table adds only the bias."""
        names = sample_vocab.activity_names
        table = NodeEmbeddingTable(3, {n: np.zeros(3) for n in names},
                                   {n: NodeKind.ACTIVITY for n in names})
        rng = np.random.default_rng(3)
        weight, bias = _theta(rng, 3, 4)
        x = rng.standard_normal((4, 4))

        out, _ = apply_pe(x, [1, 3, 4, 5], PEConfig(PEMode.STRUCTURAL, k=3, d=4),
                          SpeContext(table, sample_vocab), (weight, bias))

        assert_allclose(out, x + bias.value)

    def test_structural_without_table(self):
        with pytest.raises(ConfigurationError):
            apply_pe(np.zeros((2, 4)), [1, 3], PEConfig(PEMode.STRUCTURAL, k=3, d=4))
