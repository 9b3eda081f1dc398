import dataclasses

import numpy as np
import pytest

from bdlm.errors import InvalidConfig
from bdlm.model import (LoraConfig, ModelConfig, TrainHyper, attach_lora,
                        dequantize_matrix, forward, init_parameters, lora_merge,
                        quantize_base, quantize_matrix, train)

from oracles import oracle_quantize_roundtrip

BASE = ModelConfig(n_classes=3, patch_len=16, stride=8, d_model=16, n_heads=2,
                   n_layers=2, window_len=64, seed=21)


def with_lora(cfg, rank=4, alpha=8.0, targets=("q", "v")):
    return dataclasses.replace(cfg, lora=LoraConfig(rank=rank, alpha=alpha, targets=targets))


class TestLora:
    def test_fresh_adapters_are_noop_bitwise(self, rng):
        base_pset = init_parameters(BASE)
        cfg = with_lora(BASE)
        pset = init_parameters(cfg)
        for name in base_pset.params:
            assert np.array_equal(base_pset.params[name], pset.params[name]), name
        w = rng.standard_normal(64)
        assert np.array_equal(forward(w, base_pset, BASE), forward(w, pset, cfg))

    def test_attach_lora_is_noop_bitwise(self, rng):
        base_pset = init_parameters(BASE)
        cfg = with_lora(BASE, rank=3)
        pset = attach_lora(base_pset, cfg, seed=99)
        w = rng.standard_normal((5, 64))
        assert np.array_equal(forward(w, base_pset, BASE), forward(w, pset, cfg))

    def test_alpha_zero_has_no_effect(self, rng):
        cfg = with_lora(BASE, rank=2, alpha=0.0)
        pset = init_parameters(cfg)
        for name in pset.params:
            if ".lora." in name:
                pset.params[name][:] = rng.standard_normal(pset.params[name].shape)
        base_pset = init_parameters(BASE)
        w = rng.standard_normal(64)
        assert np.max(np.abs(forward(w, pset, cfg) - forward(w, base_pset, BASE))) == 0.0

    @pytest.mark.parametrize("rank", [1, 2, 4, 8])
    def test_merge_equivalence_random_adapters(self, rank, rng):
        cfg = with_lora(BASE, rank=rank, alpha=2.0 * rank)
        pset = init_parameters(cfg)
        for name in pset.params:
            if ".lora." in name:
                pset.params[name][:] = rng.normal(0, 0.05, pset.params[name].shape)
        merged = lora_merge(pset, cfg)
        assert not any(".lora." in n for n in merged.params)
        w = rng.standard_normal((10, 64))
        adapted = forward(w, pset, cfg)
        plain = forward(w, merged, BASE)
        assert np.max(np.abs(adapted - plain)) < 1e-10

    def test_merge_after_training(self, rng):
        cfg = with_lora(BASE, rank=2, alpha=4.0)
        train_x = rng.standard_normal((24, 64))
        train_y = rng.integers(0, 3, 24)
        result = train(train_x, train_y, train_x[:6], train_y[:6], cfg,
                       TrainHyper(epochs=3, batch_size=8, seed=0))
        pset = result.state.params
        assert any(np.any(pset.params[n] != 0) for n in pset.params
                   if ".lora." in n and n.endswith(".b"))
        merged = lora_merge(pset, cfg)
        w = rng.standard_normal((100, 64))
        assert np.max(np.abs(forward(w, pset, cfg) - forward(w, merged, BASE))) < 1e-10

    def test_rank_exceeding_dim_rejected(self):
        with pytest.raises(InvalidConfig):
            ModelConfig(n_classes=3, d_model=16, n_heads=2,
                        lora=LoraConfig(rank=32, alpha=1.0))

    def test_bad_targets_rejected(self):
        with pytest.raises(InvalidConfig):
            LoraConfig(rank=2, alpha=1.0, targets=("k",))


class TestQuantization:
    def test_constant_block_exact_roundtrip(self):
        w = np.full((8, 16), -0.37)
        q = quantize_matrix(w)
        assert np.array_equal(dequantize_matrix(q), w)

    def test_zero_block_exact(self):
        w = np.zeros((4, 16))
        q = quantize_matrix(w)
        assert np.array_equal(dequantize_matrix(q), w)
        assert np.all(q.scales == 0)

    def test_error_bound_absmax_over_seven(self, rng):
        for _ in range(25):
            w = rng.standard_normal((rng.integers(1, 9) * 8, rng.integers(1, 9) * 8))
            q = quantize_matrix(w)
            recon = dequantize_matrix(q)
            flat_w = w.ravel()
            flat_r = recon.ravel()
            for b in range(q.scales.size):
                lo, hi = b * 64, min((b + 1) * 64, flat_w.size)
                err = np.abs(flat_w[lo:hi] - flat_r[lo:hi]).max() if hi > lo else 0.0
                assert err <= q.scales[b] / 7.0

    def test_partial_final_block(self, rng):
        w = rng.standard_normal((3, 25))  # 75 elements: one full + one partial block
        q = quantize_matrix(w)
        assert q.scales.size == 2
        recon = dequantize_matrix(q)
        assert recon.shape == w.shape
        assert np.abs(w - recon).max() <= q.scales.max() / 7.0

    def test_matches_oracle_bit_for_bit(self, rng):
        w = rng.standard_normal((256, 256))
        recon = dequantize_matrix(quantize_matrix(w))
        oracle_recon, bound = oracle_quantize_roundtrip(w)
        assert np.array_equal(recon, oracle_recon)
        assert np.all(np.abs(w - recon) <= bound)

    def test_codes_are_int4_range(self, rng):
        q = quantize_matrix(rng.standard_normal((64, 64)) * 100)
        assert q.codes.dtype == np.int8
        assert q.codes.min() >= -7 and q.codes.max() <= 7

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidConfig):
            quantize_matrix(np.array([[1.0, np.nan]]))


class TestQuantizedBase:
    def test_frozen_matrices_quantized_dense_matches(self):
        cfg = dataclasses.replace(BASE, quantize_base=True)
        pset = init_parameters(cfg)
        assert pset.quantized, "frozen weight matrices should be quantized"
        for name, q in pset.quantized.items():
            assert name in pset.frozen
            assert pset.params[name].ndim == 2
            assert np.array_equal(pset.params[name], dequantize_matrix(q))
        # trainable and 1-D frozen tensors stay full precision
        assert "embed.kernel" not in pset.quantized
        assert "layers.0.attn.bq" not in pset.quantized

    def test_quantized_model_trains_and_freezes_codes(self, rng):
        cfg = dataclasses.replace(with_lora(BASE, rank=2), quantize_base=True)
        pset_before = init_parameters(cfg)
        codes_before = {n: q.codes.copy() for n, q in pset_before.quantized.items()}
        x = rng.standard_normal((20, 64))
        y = rng.integers(0, 3, 20)
        result = train(x, y, x[:5], y[:5], cfg, TrainHyper(epochs=2, batch_size=8, seed=3))
        pset = result.state.params
        for name, codes in codes_before.items():
            assert np.array_equal(pset.quantized[name].codes, codes)
            assert np.array_equal(pset.params[name], pset_before.params[name])
