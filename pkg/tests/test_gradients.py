"""Analytic gradients against central finite differences."""

import numpy as np
import pytest

from bdlm.model import LoraConfig, ModelConfig, forward_backward, init_parameters


def max_rel_error(analytic, numeric, floor=1e-8):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def finite_difference_check(cfg, batch=2, h=1e-4, sample_per_tensor=None, seed=0,
                            floor=1e-8):
    """Returns {name: max rel error} comparing forward_backward gradients with
    central differences, optionally on a random subsample of entries."""
    pset = init_parameters(cfg)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, cfg.window_len))
    y = np.eye(cfg.n_classes)[rng.integers(0, cfg.n_classes, batch)]
    # make any zero-initialized adapters active so their gradients are exercised
    if cfg.lora is not None:
        for name in sorted(pset.trainable):
            if ".lora." in name and name.endswith(".b"):
                pset.params[name][:] = rng.normal(0.0, 0.02, pset.params[name].shape)

    _, grads, _ = forward_backward(x, y, pset, cfg)

    def loss_only():
        loss, _, _ = forward_backward(x, y, pset, cfg)
        return loss

    errors = {}
    for name in sorted(pset.trainable):
        flat = pset.params[name].ravel()
        if sample_per_tensor is None or flat.size <= sample_per_tensor:
            idx = np.arange(flat.size)
        else:
            idx = rng.choice(flat.size, size=sample_per_tensor, replace=False)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_only()
            flat[i] = orig - h
            lm = loss_only()
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            worst = max(worst, max_rel_error(np.array(grads[name].ravel()[i]),
                                             np.array(fd), floor=floor))
        errors[name] = worst
    return errors


class TestGradients:
    def test_small_model_every_parameter_sampled(self):
        cfg = ModelConfig(n_classes=3, patch_len=16, stride=8, d_model=16, n_heads=1,
                          n_layers=2, window_len=64, seed=11)
        errors = finite_difference_check(cfg, sample_per_tensor=6)
        assert max(errors.values()) <= 1e-4, errors

    def test_multihead_and_lora(self):
        # adapter gradients here are ~1e-8, below the round-off floor of
        # central differences at h=1e-4, so compare against a 1e-6 floor
        cfg = ModelConfig(n_classes=4, patch_len=8, stride=4, d_model=8, n_heads=2,
                          n_layers=1, window_len=32, seed=12,
                          lora=LoraConfig(rank=2, alpha=4.0))
        errors = finite_difference_check(cfg, sample_per_tensor=8, floor=1e-6)
        assert max(errors.values()) <= 1e-4, errors
        assert any(".lora." in name for name in errors)

    def test_last_pooling(self):
        cfg = ModelConfig(n_classes=3, patch_len=8, stride=8, d_model=8, n_heads=1,
                          n_layers=1, window_len=32, seed=13, pooling="last")
        errors = finite_difference_check(cfg, sample_per_tensor=6)
        assert max(errors.values()) <= 1e-4, errors

    def test_zero_loss_limit_gives_tiny_gradients(self, rng):
        cfg = ModelConfig(n_classes=3, patch_len=8, stride=4, d_model=8, n_heads=1,
                          n_layers=1, window_len=24, seed=14)
        pset = init_parameters(cfg)
        pset.params["head.weight"][:] = 0.0
        pset.params["head.bias"][:] = [80.0, 0.0, 0.0]   # huge margin for class 0
        x = rng.standard_normal((4, 24))
        y = np.eye(3)[np.zeros(4, dtype=int)]
        loss, grads, _ = forward_backward(x, y, pset, cfg)
        assert loss < 1e-20
        for name, g in grads.items():
            assert np.linalg.norm(g) < 1e-8, name
