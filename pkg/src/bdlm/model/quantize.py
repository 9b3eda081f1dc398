"""Symmetric blockwise int4 quantization for frozen weight matrices.

Each flat block of 64 values is scaled by its absolute maximum and rounded to
the 15-level grid {-7..7}. Dequantization error is therefore at most half a
step, comfortably inside the absmax/7 contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidConfig

BLOCK_SIZE = 64
_LEVELS = 7  # int4 symmetric grid spans -7..7


@dataclass
class QuantizedMatrix:
    """int4 codes (stored widened to int8) plus one absmax scale per block."""

    codes: np.ndarray
    scales: np.ndarray
    shape: tuple[int, ...]
    block_size: int = BLOCK_SIZE

    def __post_init__(self):
        if self.codes.dtype != np.int8:
            raise InvalidConfig("codes must be int8")
        if self.codes.size != int(np.prod(self.shape)):
            raise InvalidConfig("code count does not match shape")


def quantize_matrix(w: np.ndarray, block_size: int = BLOCK_SIZE) -> QuantizedMatrix:
    if not np.all(np.isfinite(w)):
        raise InvalidConfig("cannot quantize non-finite values")
    flat = np.ascontiguousarray(w, dtype=np.float64).ravel()
    n_blocks = -(-flat.size // block_size)
    padded = np.zeros(n_blocks * block_size)
    padded[:flat.size] = flat
    blocks = padded.reshape(n_blocks, block_size)
    scales = np.abs(blocks).max(axis=1)
    safe = np.where(scales > 0, scales, 1.0)
    codes = np.rint(blocks * (_LEVELS / safe[:, None]))
    codes = np.clip(codes, -_LEVELS, _LEVELS).astype(np.int8)
    codes[scales == 0] = 0
    return QuantizedMatrix(codes=codes.ravel()[:flat.size].copy(),
                           scales=scales, shape=tuple(w.shape), block_size=block_size)


def dequantize_matrix(q: QuantizedMatrix) -> np.ndarray:
    n = q.codes.size
    n_blocks = q.scales.size
    padded = np.zeros(n_blocks * q.block_size)
    padded[:n] = q.codes.astype(np.float64)
    blocks = padded.reshape(n_blocks, q.block_size)
    out = (blocks * q.scales[:, None]) / _LEVELS
    return out.ravel()[:n].reshape(q.shape)
