"""Parameter storage with an immutable frozen/trainable partition.

Frozen: attention projection weights/biases and FFN weights/biases (randomly
initialized stand-ins for pretrained blocks). Trainable: value-embedding
kernel, position table, every LayerNorm gamma/beta, the classifier head, and
any LoRA adapters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidConfig
from .config import ModelConfig
from .network import sinusoidal_position_table
from .quantize import QuantizedMatrix, dequantize_matrix, quantize_matrix

INIT_STD = 0.02


@dataclass
class ParameterSet:
    params: dict[str, np.ndarray]
    trainable: frozenset[str]
    quantized: dict[str, QuantizedMatrix] = field(default_factory=dict)

    def __post_init__(self):
        unknown = self.trainable - set(self.params)
        if unknown:
            raise InvalidConfig(f"trainable tags for unknown tensors: {sorted(unknown)}")

    @property
    def frozen(self) -> frozenset[str]:
        return frozenset(self.params) - self.trainable

    def copy(self) -> "ParameterSet":
        return ParameterSet(
            params={k: v.copy() for k, v in self.params.items()},
            trainable=self.trainable,
            quantized={k: QuantizedMatrix(q.codes.copy(), q.scales.copy(), q.shape, q.block_size)
                       for k, q in self.quantized.items()},
        )


def _lora_names(config: ModelConfig):
    names = []
    if config.lora is not None:
        for i in range(config.n_layers):
            for target in config.lora.targets:
                names.append((i, target))
    return names


def init_parameters(config: ModelConfig) -> ParameterSet:
    """Seeded initialization. Base weights are drawn before any LoRA adapter,
    so the base model is bitwise independent of adapter presence."""
    rng = np.random.default_rng(config.seed)
    d, p = config.d_model, config.patch_len
    f = config.ffn_mult * d
    params: dict[str, np.ndarray] = {}
    trainable: set[str] = set()

    def draw(shape):
        return rng.normal(0.0, INIT_STD, size=shape)

    params["embed.kernel"] = draw((d, p))
    params["embed.bias"] = np.zeros(d)
    trainable.update(("embed.kernel", "embed.bias"))

    params["pos.table"] = sinusoidal_position_table(config.n_patches, d)
    trainable.add("pos.table")

    for i in range(config.n_layers):
        pre = f"layers.{i}"
        for ln in ("ln1", "ln2"):
            params[f"{pre}.{ln}.gamma"] = np.ones(d)
            params[f"{pre}.{ln}.beta"] = np.zeros(d)
            trainable.update((f"{pre}.{ln}.gamma", f"{pre}.{ln}.beta"))
        for name in ("wq", "wk", "wv", "wo"):
            params[f"{pre}.attn.{name}"] = draw((d, d))
        for name in ("bq", "bk", "bv", "bo"):
            params[f"{pre}.attn.{name}"] = np.zeros(d)
        params[f"{pre}.ffn.w1"] = draw((f, d))
        params[f"{pre}.ffn.b1"] = np.zeros(f)
        params[f"{pre}.ffn.w2"] = draw((d, f))
        params[f"{pre}.ffn.b2"] = np.zeros(d)

    params["final_ln.gamma"] = np.ones(d)
    params["final_ln.beta"] = np.zeros(d)
    trainable.update(("final_ln.gamma", "final_ln.beta"))

    params["head.weight"] = draw((config.n_classes, d))
    params["head.bias"] = np.zeros(config.n_classes)
    trainable.update(("head.weight", "head.bias"))

    for i, target in _lora_names(config):
        a_name = f"layers.{i}.lora.{target}.a"
        b_name = f"layers.{i}.lora.{target}.b"
        params[a_name] = draw((config.lora.rank, d))
        params[b_name] = np.zeros((d, config.lora.rank))
        trainable.update((a_name, b_name))

    pset = ParameterSet(params=params, trainable=frozenset(trainable))
    if config.quantize_base:
        pset = quantize_base(pset)
    return pset


def quantize_base(pset: ParameterSet) -> ParameterSet:
    """Store frozen weight matrices blockwise-quantized; the dense tensors the
    forward pass reads become their dequantized images. LoRA adapters and all
    trainable tensors stay full precision."""
    out = pset.copy()
    for name in sorted(out.frozen):
        w = out.params[name]
        if w.ndim == 2:
            q = quantize_matrix(w)
            out.quantized[name] = q
            out.params[name] = dequantize_matrix(q)
    return out


def attach_lora(pset: ParameterSet, config: ModelConfig, seed: int) -> ParameterSet:
    """Add freshly initialized adapters (A gaussian, B zero) to an existing
    parameter set; base tensors are untouched."""
    if config.lora is None:
        raise InvalidConfig("config has no lora section")
    rng = np.random.default_rng(seed)
    out = pset.copy()
    trainable = set(out.trainable)
    for i, target in _lora_names(config):
        a_name = f"layers.{i}.lora.{target}.a"
        b_name = f"layers.{i}.lora.{target}.b"
        out.params[a_name] = rng.normal(0.0, INIT_STD, size=(config.lora.rank, config.d_model))
        out.params[b_name] = np.zeros((config.d_model, config.lora.rank))
        trainable.update((a_name, b_name))
    return ParameterSet(params=out.params, trainable=frozenset(trainable),
                        quantized=out.quantized)


def lora_merge(pset: ParameterSet, config: ModelConfig) -> ParameterSet:
    """Fold adapters into their base matrices: W' = W + (alpha/r) B A.

    The merged set has no adapters; merged matrices become dense even if the
    base was quantized, since the fold leaves the int4 grid.
    """
    if config.lora is None:
        raise InvalidConfig("config has no lora section")
    scale = config.lora.scale
    params = {k: v.copy() for k, v in pset.params.items()}
    quantized = dict(pset.quantized)
    trainable = set(pset.trainable)
    target_key = {"q": "wq", "v": "wv"}
    for i, target in _lora_names(config):
        a_name = f"layers.{i}.lora.{target}.a"
        b_name = f"layers.{i}.lora.{target}.b"
        w_name = f"layers.{i}.attn.{target_key[target]}"
        params[w_name] = params[w_name] + scale * (params[b_name] @ params[a_name])
        quantized.pop(w_name, None)
        del params[a_name], params[b_name]
        trainable.discard(a_name)
        trainable.discard(b_name)
    return ParameterSet(params=params, trainable=frozenset(trainable), quantized=quantized)


@dataclass
class ModelState:
    """A configured model with its parameters; the unit of checkpointing."""

    config: ModelConfig
    params: ParameterSet

    def copy(self) -> "ModelState":
        return ModelState(config=self.config, params=self.params.copy())
