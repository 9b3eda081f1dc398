"""Desk-scale frozen-transformer classifier with LoRA and int4-quantized
base-weight support."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import LoraConfig, ModelConfig
from .network import (cross_entropy, forward, forward_backward, gelu, layer_norm,
                      patchify, sinusoidal_position_table, softmax, value_embed)
from .params import (ModelState, ParameterSet, attach_lora, init_parameters,
                     lora_merge, quantize_base)
from .quantize import QuantizedMatrix, dequantize_matrix, quantize_matrix
from .train import (EpochRecord, TrainHyper, TrainResult, evaluate_accuracy,
                    pooled_features, predict, train)

__all__ = [
    "LoraConfig", "ModelConfig", "ModelState", "ParameterSet", "QuantizedMatrix",
    "EpochRecord", "TrainHyper", "TrainResult",
    "attach_lora", "cross_entropy", "dequantize_matrix", "evaluate_accuracy",
    "forward", "forward_backward", "gelu", "init_parameters", "layer_norm",
    "load_checkpoint", "lora_merge", "patchify", "pooled_features", "predict",
    "quantize_base", "quantize_matrix", "save_checkpoint",
    "sinusoidal_position_table", "softmax", "train", "value_embed",
]
