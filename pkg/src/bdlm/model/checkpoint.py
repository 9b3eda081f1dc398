"""Binary checkpoint format.

Layout: magic ``BDLM``, format version (u16), reserved u16, a JSON header
(u32 length prefix) holding the model config, trainable tags and quantized
tensor manifest, then length-prefixed named tensors (little-endian), and a
trailing CRC32 of everything before it. The header reserves an
``external_weights`` field for importing pretrained block weights later.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from ..errors import CorruptFile, VersionMismatch
from .config import ModelConfig
from .params import ModelState, ParameterSet
from .quantize import QuantizedMatrix, dequantize_matrix

MAGIC = b"BDLM"
FORMAT_VERSION = 1

_DTYPES = {0: "<f8", 1: "<f4", 2: "i1"}
_DTYPE_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1, np.dtype("int8"): 2}


def _pack_tensor(name: str, array: np.ndarray) -> bytes:
    data = np.ascontiguousarray(array)
    if data.dtype == np.float64:
        raw = data.astype("<f8").tobytes()
    elif data.dtype == np.int8:
        raw = data.tobytes()
    else:
        raw = data.astype("<f8").tobytes()
        data = data.astype(np.float64)
    code = _DTYPE_CODES[data.dtype]
    name_b = name.encode("utf-8")
    head = struct.pack("<H", len(name_b)) + name_b + struct.pack("<BB", code, data.ndim)
    head += struct.pack(f"<{data.ndim}I", *data.shape) if data.ndim else b""
    head += struct.pack("<Q", len(raw))
    return head + raw


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptFile(f"truncated checkpoint at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def save_checkpoint(state: ModelState, path: str) -> None:
    header = {
        "config": state.config.to_dict(),
        "trainable": sorted(state.params.trainable),
        "quantized": {
            name: {"shape": list(q.shape), "block": q.block_size}
            for name, q in state.params.quantized.items()
        },
        "external_weights": None,
    }
    header_b = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<HH", FORMAT_VERSION, 0),
              struct.pack("<I", len(header_b)), header_b]

    tensors: list[tuple[str, np.ndarray]] = []
    for name in sorted(state.params.params):
        if name in state.params.quantized:
            q = state.params.quantized[name]
            tensors.append((name + "#codes", q.codes))
            tensors.append((name + "#scales", q.scales))
        else:
            tensors.append((name, state.params.params[name]))
    chunks.append(struct.pack("<I", len(tensors)))
    chunks.extend(_pack_tensor(name, arr) for name, arr in tensors)
    body = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_checkpoint(path: str) -> ModelState:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12:
        raise CorruptFile(f"file too short to be a checkpoint: {len(blob)} bytes")
    body, crc_b = blob[:-4], blob[-4:]
    if struct.unpack("<I", crc_b)[0] != zlib.crc32(body):
        raise CorruptFile("checksum mismatch")
    r = _Reader(body)
    if r.take(4) != MAGIC:
        raise CorruptFile("bad magic bytes")
    version, _ = r.unpack("<HH")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format {version}, this build reads {FORMAT_VERSION}",
                              found=version, expected=FORMAT_VERSION)
    try:
        header_len, = r.unpack("<I")
        header = json.loads(r.take(header_len).decode("utf-8"))
        count, = r.unpack("<I")
        raw: dict[str, np.ndarray] = {}
        for _ in range(count):
            name_len, = r.unpack("<H")
            name = r.take(name_len).decode("utf-8")
            code, ndim = r.unpack("<BB")
            shape = r.unpack(f"<{ndim}I") if ndim else ()
            nbytes, = r.unpack("<Q")
            if code not in _DTYPES:
                raise CorruptFile(f"unknown dtype code {code} for tensor {name!r}")
            arr = np.frombuffer(r.take(nbytes), dtype=_DTYPES[code]).reshape(shape)
            raw[name] = arr.astype(np.float64) if code != 2 else arr.astype(np.int8)
        config = ModelConfig.from_dict(header["config"])
    except (KeyError, ValueError, TypeError, struct.error) as exc:
        raise CorruptFile(f"malformed checkpoint structure: {exc}") from exc

    params: dict[str, np.ndarray] = {}
    quantized: dict[str, QuantizedMatrix] = {}
    for name, meta in header["quantized"].items():
        try:
            codes = raw.pop(name + "#codes")
            scales = raw.pop(name + "#scales")
        except KeyError as exc:
            raise CorruptFile(f"quantized tensor {name!r} missing its data") from exc
        q = QuantizedMatrix(codes=codes, scales=scales, shape=tuple(meta["shape"]),
                            block_size=meta["block"])
        quantized[name] = q
        params[name] = dequantize_matrix(q)
    params.update(raw)
    pset = ParameterSet(params=params, trainable=frozenset(header["trainable"]),
                        quantized=quantized)
    return ModelState(config=config, params=pset)
