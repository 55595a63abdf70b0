"""
Unit tests for the next-activity transformer.
"""

from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.collectors.event_log import EOS, PAD, SOS
from src.nn import core
from src.nn.model import (
    ModelConfig,
    NextActivityTransformer,
    init_params,
    parameter_count,
    parameter_shapes,
)
from src.nn.pos_encoding import PEMode
from src.utils.errors import ConfigurationError, DataError, ParameterError, ShapeError


def _loss_closure(model, ids, targets):
    def loss():
        result = core.cross_entropy_masked(model.forward(ids), targets)
        model.backward(result.grad)
        return result.loss

    return loss


class TestModelConfig:
    """Test suite for architecture validation."""

    def test_heads_must_divide_width(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(vocab_size=10, d_model=30, heads=4)

    def test_dropout_range(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(vocab_size=10, dropout=1.0)

    def test_dict_round_trip(self, tiny_model_config):
        data = tiny_model_config.to_dict()

        assert data["pe_mode"] == "spe"
        assert ModelConfig.from_dict(data) == tiny_model_config


class TestParameters:
    """Test suite for parameter layout and initialization."""

    def test_reference_parameter_count(self):
        """Reference architecture with 85 tokens and k = 32 has a fixed size."""
        config = ModelConfig(vocab_size=85, d_model=64, hidden=128, heads=4, layers=4,
                             pe_mode=PEMode.STRUCTURAL, spe_k=32)

        assert parameter_count(config) == 94037

    def test_structural_adds_theta(self):
        base = ModelConfig(vocab_size=85, pe_mode=PEMode.SINUSOIDAL)

        assert parameter_count(replace(base, pe_mode=PEMode.STRUCTURAL)) - parameter_count(base) == 32 * 64 + 64

    def test_ffn_blocks_add_parameters(self):
        config = ModelConfig(vocab_size=85)
        with_ffn = replace(config, ffn_in_blocks=True)

        extra = config.layers * (2 * 64 + 64 * 128 + 128 + 128 * 64 + 64)
        assert parameter_count(with_ffn) - parameter_count(config) == extra

    def test_same_seed_same_parameters(self, tiny_model_config):
        first = init_params(tiny_model_config, seed=3)
        second = init_params(tiny_model_config, seed=3)

        for a, b in zip(first, second):
            assert np.array_equal(a.value, b.value)

    def test_different_seed(self, tiny_model_config):
        first = init_params(tiny_model_config, seed=3)["embedding.weight"].value
        second = init_params(tiny_model_config, seed=4)["embedding.weight"].value

        assert not np.array_equal(first, second)

    def test_initial_values(self, tiny_model_config):
        params = init_params(tiny_model_config, seed=0)

        assert np.all(params["final_ln.gain"].value == 1.0)
        assert np.all(params["blocks.0.ln_attn.gain"].value == 1.0)
        assert np.all(params["head.fc1.bias"].value == 0.0)
        limit = np.sqrt(6.0 / (tiny_model_config.d_model + tiny_model_config.hidden))
        assert np.abs(params["head.fc1.weight"].value).max() <= limit

    def test_shapes_follow_config(self, tiny_model_config):
        names = [name for name, _ in parameter_shapes(tiny_model_config)]

        assert names[:3] == ["embedding.weight", "spe.theta.weight", "spe.theta.bias"]
        assert names[-1] == "head.fc2.bias"

    def test_snapshot_and_restore(self, tiny_model_config):
        params = init_params(tiny_model_config, seed=0)
        snapshot = params.snapshot()
        params["embedding.weight"].value += 1.0

        params.restore(snapshot)

        assert np.array_equal(params["embedding.weight"].value, snapshot["embedding.weight"])


class TestForward:
    """Test suite for the forward pass."""

    def test_output_shape(self):
        config = ModelConfig(vocab_size=85, dropout=0.0, pe_mode=PEMode.SINUSOIDAL)
        model = NextActivityTransformer(config, init_params(config, 0))
        ids = np.r_[SOS, np.arange(3, 12)]

        assert model.logits(ids).shape == (10, 85)

    def test_batched_shape(self, tiny_model_config, make_model, sample_encoded):
        model = make_model(tiny_model_config)
        ids = np.stack([e.as_array() for e in sample_encoded])

        assert model.logits(ids).shape == ids.shape + (tiny_model_config.vocab_size,)

    def test_single_token(self, tiny_model_config, make_model):
        logits = make_model(tiny_model_config).logits([SOS])

        assert logits.shape == (1, tiny_model_config.vocab_size)
        assert np.all(np.isfinite(logits))

    @pytest.mark.parametrize("mode", list(PEMode))
    def test_causality(self, tiny_model_config, make_model, mode):
        """Changing the token at position 5 leaves logits rows 0..4 unchanged."""
        model = make_model(replace(tiny_model_config, pe_mode=mode))
        ids = np.array([SOS, 3, 4, 5, 6, 7, 3, EOS])
        changed = ids.copy()
        changed[5] = 4

        before = model.logits(ids)
        after = model.logits(changed)

        assert np.array_equal(before[:5], after[:5])
        assert not np.array_equal(before[5], after[5])

    @pytest.mark.parametrize("mode", list(PEMode))
    def test_causality_at_every_position(self, tiny_model_config, make_model, mode):
        """Rewriting the suffix after any position of 100 random sequences keeps earlier logits."""
        model = make_model(replace(tiny_model_config, pe_mode=mode))
        vocab_size = tiny_model_config.vocab_size
        rng = np.random.default_rng(7)

        for _ in range(100):
            n = int(rng.integers(2, 11))
            ids = np.r_[SOS, rng.integers(EOS, vocab_size, size=n - 1)]
            reference = model.logits(ids)
            for position in range(n - 1):
                changed = ids.copy()
                changed[position + 1:] = rng.integers(EOS, vocab_size, size=n - position - 1)

                assert np.array_equal(model.logits(changed)[:position + 1], reference[:position + 1])

    def test_padding_does_not_leak(self, tiny_model_config, make_model):
        """Trailing PAD tokens do not change the logits of earlier positions."""
        model = make_model(tiny_model_config)

        short = model.logits([SOS, 3, 4, EOS])
        padded = model.logits([SOS, 3, 4, EOS, PAD, PAD])

        assert_allclose(short, padded[:4], rtol=0, atol=1e-12)

    def test_deterministic(self, tiny_model_config, make_model):
        ids = [SOS, 3, 5, 4]

        assert np.array_equal(make_model(tiny_model_config).logits(ids),
                              make_model(tiny_model_config).logits(ids))

    def test_dropout_only_in_training(self, tiny_model_config, make_model):
        model = make_model(replace(tiny_model_config, dropout=0.5))
        ids = [SOS, 3, 5, 4]

        assert np.array_equal(model.logits(ids), model.logits(ids))
        train = model.forward(ids, training=True, rng=np.random.default_rng(0))
        assert not np.array_equal(train, model.logits(ids))

    def test_rejects_bad_shape(self, tiny_model_config, make_model):
        with pytest.raises(ShapeError):
            make_model(tiny_model_config).logits(np.zeros((1, 1, 2), dtype=int))

    def test_structural_needs_table(self, tiny_model_config):
        with pytest.raises(ConfigurationError):
            NextActivityTransformer(tiny_model_config, init_params(tiny_model_config, 0))

    def test_mismatched_parameters(self, tiny_model_config, make_model):
        other = replace(tiny_model_config, layers=1)

        with pytest.raises(ShapeError):
            NextActivityTransformer(tiny_model_config, init_params(other, 0))


class TestBackward:
    """Test suite for end-to-end gradients."""

    @pytest.mark.parametrize("ffn", [False, True])
    def test_gradient_check(self, tiny_model_config, make_model, ffn):
        """Analytic gradients of the masked loss match finite differences."""
        config = replace(tiny_model_config, ffn_in_blocks=ffn)
        model = make_model(config, seed=1)
        ids = np.array([[SOS, 3, 4, 5, 6], [SOS, 7, 3, EOS, PAD]])
        targets = np.array([[3, 4, 5, 6, EOS], [7, 3, EOS, PAD, PAD]])

        def loss():
            result = core.cross_entropy_masked(model.forward(ids), targets)
            model.backward(result.grad)
            return result.loss

        check = core.grad_check(loss, list(model.params), eps=1e-4, max_coords=6,
                                rng=np.random.default_rng(0), kink_tol=1e-2)

        assert check.max_rel_error < 1e-3
        assert check.checked > check.skipped

    def test_gradient_check_random_configs(self, sample_vocab, make_model):
        """Twenty random architectures pass the finite-difference check."""
        rng = np.random.default_rng(11)
        modes = list(PEMode)

        for trial in range(20):
            d_model = int(rng.choice([4, 6, 8]))
            config = ModelConfig(
                vocab_size=sample_vocab.size,
                d_model=d_model,
                hidden=int(rng.choice([4, 8, 12])),
                heads=int(rng.choice([h for h in (1, 2, 3) if d_model % h == 0])),
                layers=int(rng.integers(1, 3)),
                dropout=0.0,
                pe_mode=modes[trial % len(modes)],
                spe_k=4,
                ffn_in_blocks=bool(rng.integers(2)),
            )
            model = make_model(config, seed=trial)
            tokens = rng.integers(EOS, sample_vocab.size, size=(2, 5))
            ids = np.c_[np.full(2, SOS), tokens[:, :4]]
            targets = tokens.copy()
            targets[1, 3:] = PAD

            check = core.grad_check(_loss_closure(model, ids, targets), list(model.params),
                                    eps=1e-4, max_coords=3, rng=rng, kink_tol=1e-2)

            assert check.max_rel_error < 1e-3, config

    def test_appended_padding_leaves_gradients(self, tiny_model_config, make_model):
        """Positions with ignored targets contribute exactly nothing to the gradients."""
        model = make_model(tiny_model_config)

        def gradients(ids, targets):
            for param in model.params:
                param.zero_grad()
            result = core.cross_entropy_masked(model.forward(np.array(ids)), np.array(targets))
            model.backward(result.grad)
            return result, {param.name: param.grad.copy() for param in model.params}

        short, short_grads = gradients([SOS, 3, 4, 5], [3, 4, 5, EOS])
        padded, padded_grads = gradients([SOS, 3, 4, 5, EOS, PAD], [3, 4, 5, EOS, PAD, PAD])

        assert padded.count == short.count == 4
        assert not padded.grad[4:].any()
        for name, grad in short_grads.items():
            assert_allclose(padded_grads[name], grad, rtol=0, atol=1e-13, err_msg=name)

    def test_backward_requires_forward(self, tiny_model_config, make_model):
        model = make_model(tiny_model_config)

        with pytest.raises(RuntimeError):
            model.backward(np.zeros((2, tiny_model_config.vocab_size)))

    def test_pad_rows_get_no_embedding_gradient(self, tiny_model_config, make_model):
        """Ignored targets never push gradient into unused embedding rows."""
        config = replace(tiny_model_config, pe_mode=PEMode.NONE)
        model = make_model(config)
        ids = np.array([SOS, 3, EOS])
        result = core.cross_entropy_masked(model.forward(ids), np.array([3, EOS, PAD]))

        model.backward(result.grad)

        assert not model.params["embedding.weight"].grad[PAD].any()
        assert not model.params["embedding.weight"].grad[5].any()


class TestPredictTopK:
    """Test suite for next-activity ranking."""

    def test_excludes_pad_and_sos(self, tiny_model_config, make_model):
        model = make_model(tiny_model_config)
        vocab_size = tiny_model_config.vocab_size

        ranking = model.predict_topk([SOS, 3], vocab_size - 2)

        tokens = [t for t, _ in ranking]
        assert sorted(tokens) == [EOS] + list(range(3, vocab_size))
        probs = core.softmax_rows(model.logits([SOS, 3])[-1].astype(np.float64))
        assert sum(p for _, p in ranking) == pytest.approx(1.0 - probs[PAD] - probs[SOS])

    def test_sorted_and_deterministic(self, tiny_model_config, make_model):
        model = make_model(tiny_model_config)

        first = model.predict_topk([SOS, 3, 4], 3)
        second = model.predict_topk([SOS, 3, 4], 3)

        assert first == second
        assert [p for _, p in first] == sorted((p for _, p in first), reverse=True)

    def test_untrained_model_is_close_to_uniform(self):
        config = ModelConfig(vocab_size=85, dropout=0.0, pe_mode=PEMode.SINUSOIDAL)
        model = NextActivityTransformer(config, init_params(config, 0))

        (_, top), = model.predict_topk([SOS, 10, 20], 1)

        assert abs(top - 1 / 85) < 0.05

    def test_invalid_k(self, tiny_model_config, make_model):
        with pytest.raises(ParameterError):
            make_model(tiny_model_config).predict_topk([SOS], 0)

    def test_prefix_must_start_with_sos(self, tiny_model_config, make_model):
        with pytest.raises(DataError):
            make_model(tiny_model_config).predict_topk([3, 4], 1)
