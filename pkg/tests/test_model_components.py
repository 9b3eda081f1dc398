import math

import numpy as np
import pytest

from bdlm.errors import InvalidConfig, OddDimension, ShapeMismatch
from bdlm.model import (ModelConfig, cross_entropy, layer_norm, patchify,
                        sinusoidal_position_table, softmax, value_embed)
from bdlm.model.network import layer_norm_backward

from oracles import finite_difference_grad, oracle_cross_entropy


class TestPatchify:
    def test_published_config_patch_count(self):
        window = np.arange(2048.0)
        patches = patchify(window, 128, 8)
        assert patches.shape == (241, 128)

    def test_patch_equals_window(self):
        window = np.arange(64.0)
        patches = patchify(window, 64, 8)
        assert patches.shape == (1, 64)
        assert np.array_equal(patches[0], window)

    def test_coarse_stride(self):
        assert patchify(np.zeros(2048), 128, 64).shape == (31, 128)

    def test_row_contents(self, rng):
        w = rng.standard_normal(100)
        patches = patchify(w, 16, 7)
        for i in range(patches.shape[0]):
            assert np.array_equal(patches[i], w[i * 7:i * 7 + 16])

    def test_batched(self, rng):
        w = rng.standard_normal((3, 256))
        patches = patchify(w, 32, 16)
        assert patches.shape == (3, 15, 32)
        assert np.array_equal(patches[1, 2], w[1, 32:64])

    def test_invalid(self):
        with pytest.raises(InvalidConfig):
            patchify(np.zeros(16), 32, 4)
        with pytest.raises(InvalidConfig):
            patchify(np.zeros(64), 16, 0)


class TestSinusoidalTable:
    def test_row_zero(self):
        table = sinusoidal_position_table(4, 8)
        assert np.array_equal(table[0], np.array([0.0, 1.0] * 4))

    def test_first_frequency_is_unit(self):
        table = sinusoidal_position_table(4, 8)
        assert table[1, 0] == pytest.approx(math.sin(1.0), abs=1e-15)
        assert table[1, 1] == pytest.approx(math.cos(1.0), abs=1e-15)

    def test_pairs_on_unit_circle(self):
        table = sinusoidal_position_table(16, 12)
        sq = table[:, 0::2] ** 2 + table[:, 1::2] ** 2
        assert np.max(np.abs(sq - 1.0)) < 1e-12

    def test_frequency_formula(self):
        d = 10
        table = sinusoidal_position_table(5, d)
        for k in range(d // 2):
            omega = 10000.0 ** (-2.0 * k / d)
            assert table[3, 2 * k] == pytest.approx(math.sin(omega * 3), abs=1e-12)
            assert table[3, 2 * k + 1] == pytest.approx(math.cos(omega * 3), abs=1e-12)

    def test_odd_dimension(self):
        with pytest.raises(OddDimension):
            sinusoidal_position_table(4, 7)


class TestValueEmbed:
    def test_zero_kernel(self):
        out = value_embed(np.ones((5, 16)), np.zeros((8, 16)), np.zeros(8))
        assert np.array_equal(out, np.zeros((5, 8)))

    def test_identity_kernel(self, rng):
        patches = rng.standard_normal((4, 8))
        out = value_embed(patches, np.eye(8), np.zeros(8))
        assert np.array_equal(out, patches)

    def test_matches_matrix_product_oracle(self, rng):
        patches = rng.standard_normal((6, 12))
        kernel = rng.standard_normal((5, 12))
        bias = rng.standard_normal(5)
        out = value_embed(patches, kernel, bias)
        expected = np.array([[float(kernel[j] @ patches[i]) + bias[j]
                              for j in range(5)] for i in range(6)])
        assert np.max(np.abs(out - expected)) < 1e-12

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatch):
            value_embed(rng.standard_normal((4, 12)), rng.standard_normal((5, 10)),
                        np.zeros(5))
        with pytest.raises(ShapeMismatch):
            value_embed(rng.standard_normal((4, 12)), rng.standard_normal((5, 12)),
                        np.zeros(6))


class TestLayerNorm:
    def test_basic_statistics(self):
        y, _ = layer_norm(np.array([1.0, 2.0, 3.0]), np.ones(3), np.zeros(3), 1e-5)
        assert abs(y.mean()) < 1e-9
        assert y.var() == pytest.approx(1.0, abs=2e-5)

    def test_zero_gamma_returns_beta(self, rng):
        x = rng.standard_normal(8)
        beta = rng.standard_normal(8)
        y, _ = layer_norm(x, np.zeros(8), beta, 1e-5)
        assert np.array_equal(y, beta)

    def test_gradients_match_finite_differences(self, rng):
        d = 6
        x = rng.standard_normal(d)
        gamma = rng.uniform(0.5, 1.5, d)
        beta = rng.standard_normal(d)
        w = rng.standard_normal(d)  # random linear functional as the loss

        def loss():
            y, _ = layer_norm(x, gamma, beta, 1e-5)
            return float(w @ y)

        y, cache = layer_norm(x, gamma, beta, 1e-5)
        dx, dgamma, dbeta = layer_norm_backward(w.copy(), cache, gamma)
        for name, arr, grad in (("x", x, dx), ("gamma", gamma, dgamma), ("beta", beta, dbeta)):
            fd = finite_difference_grad(loss, arr, h=1e-4)
            rel = np.abs(fd - grad) / np.maximum(np.maximum(np.abs(fd), np.abs(grad)), 1e-8)
            assert rel.max() < 1e-4, name


class TestCrossEntropy:
    def test_confident_correct_is_tiny(self):
        logits = np.array([[50.0, 0.0, 0.0, 0.0]])
        onehot = np.array([[1.0, 0.0, 0.0, 0.0]])
        assert cross_entropy(logits, onehot) < 1e-20

    def test_uniform_logits(self):
        logits = np.zeros((3, 4))
        onehot = np.eye(4)[:3]
        assert cross_entropy(logits, onehot) == pytest.approx(math.log(4.0), abs=1e-12)

    def test_matches_oracle(self, rng):
        logits = rng.standard_normal((16, 5)) * 3
        labels = rng.integers(0, 5, 16)
        onehot = np.eye(5)[labels]
        assert cross_entropy(logits, onehot) == pytest.approx(
            oracle_cross_entropy(logits, onehot), abs=1e-12)

    def test_permutation_equivariance(self, rng):
        logits = rng.standard_normal((8, 4))
        labels = rng.integers(0, 4, 8)
        onehot = np.eye(4)[labels]
        perm = rng.permutation(4)
        assert cross_entropy(logits[:, perm], onehot[:, perm]) == pytest.approx(
            cross_entropy(logits, onehot), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            cross_entropy(np.zeros((2, 3)), np.zeros((2, 4)))


class TestSoftmax:
    def test_rows_sum_to_one(self, rng):
        z = rng.standard_normal((4, 3, 9)) * 20
        p = softmax(z)
        assert np.max(np.abs(p.sum(axis=-1) - 1.0)) < 1e-12

    def test_stable_for_large_values(self):
        p = softmax(np.array([1e4, 1e4 + 1.0]))
        assert np.isfinite(p).all()
        assert p.sum() == pytest.approx(1.0, abs=1e-12)


class TestModelConfig:
    def test_patch_count_property(self):
        cfg = ModelConfig(n_classes=4)
        assert cfg.n_patches == 241

    def test_validation(self):
        with pytest.raises(InvalidConfig):
            ModelConfig(n_classes=4, d_model=30, n_heads=4)
        with pytest.raises(InvalidConfig):
            ModelConfig(n_classes=4, patch_len=4096)
        with pytest.raises(InvalidConfig):
            ModelConfig(n_classes=1)
        with pytest.raises(InvalidConfig):
            ModelConfig(n_classes=4, pooling="max")

    def test_roundtrip_dict(self):
        from bdlm.model import LoraConfig
        cfg = ModelConfig(n_classes=3, d_model=32, n_heads=2, n_layers=1,
                          lora=LoraConfig(rank=2, alpha=4.0))
        back = ModelConfig.from_dict(cfg.to_dict())
        assert back == cfg
