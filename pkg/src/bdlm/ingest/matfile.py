"""Minimal Level-5 MAT-file reader.

Covers the subset CWRU-style recordings need: a 128-byte header, top-level
data elements with small-element packing, 2-D real double/single miMATRIX
variables, and zlib-compressed (miCOMPRESSED) wrappers. Everything else is
rejected with a structured error; no read ever leaves the declared element
bounds, so truncated or bit-flipped input fails loudly instead of crashing.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from ..errors import BadMagic, CorruptElement, UnsupportedElement, VariableNotFound
from ..signals import FaultLabel, Signal

MI_INT8 = 1
MI_UINT8 = 2
MI_INT32 = 5
MI_UINT32 = 6
MI_SINGLE = 7
MI_DOUBLE = 9
MI_MATRIX = 14
MI_COMPRESSED = 15

MX_DOUBLE = 6
MX_SINGLE = 7

_CLASS_NAMES = {MX_DOUBLE: "double", MX_SINGLE: "single"}

HEADER_LEN = 128
_MAX_DIMS = 8


@dataclass
class MatArray:
    """One numeric variable: data is kept flattened in the stored
    (column-major) order."""

    name: str
    shape: tuple[int, int]
    element_type: str
    data: np.ndarray
    byte_order: str

    @property
    def matrix(self) -> np.ndarray:
        return self.data.reshape(self.shape, order="F")


class _Stream:
    def __init__(self, buf: bytes, order: str, base_offset: int = 0):
        self.buf = buf
        self.order = order
        self.pos = 0
        self.base = base_offset

    @property
    def offset(self) -> int:
        return self.base + self.pos

    def remaining(self) -> int:
        return len(self.buf) - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise CorruptElement("read past end of element stream", self.offset)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return int(np.frombuffer(self.take(4), dtype=self.order + "u4")[0])


def _align8(n: int) -> int:
    return (n + 7) & ~7


def _read_tag(stream: _Stream):
    """Returns (mi_type, data bytes). Handles small data elements and skips
    the 8-byte alignment padding of normal ones."""
    first = stream.u32()
    small_size = first >> 16
    if small_size:
        mi_type = first & 0xFFFF
        if small_size > 4:
            raise CorruptElement(f"small element claims {small_size} bytes", stream.offset)
        data = stream.take(4)[:small_size]
        return mi_type, data
    size = stream.u32()
    if size > stream.remaining():
        raise CorruptElement(
            f"element of type {first} claims {size} bytes, {stream.remaining()} left",
            stream.offset)
    data = stream.take(size)
    if first != MI_COMPRESSED:
        # compressed elements are stored unpadded; everything else aligns to 8
        pad = _align8(size) - size
        stream.take(min(pad, stream.remaining()))
    return first, data


def _parse_matrix(data: bytes, order: str, base_offset: int) -> MatArray:
    sub = _Stream(data, order, base_offset)

    mi_type, flags_b = _read_tag(sub)
    if mi_type != MI_UINT32 or len(flags_b) != 8:
        raise CorruptElement("array flags sub-element malformed", sub.offset)
    flags_class = int(np.frombuffer(flags_b[:4], dtype=order + "u4")[0])
    mx_class = flags_class & 0xFF
    if (flags_class >> 11) & 1:
        raise UnsupportedElement("complex arrays are not supported", type_code=mx_class)
    if mx_class not in _CLASS_NAMES:
        raise UnsupportedElement(f"array class {mx_class} is not supported "
                                 "(only real double/single matrices)", type_code=mx_class)

    mi_type, dims_b = _read_tag(sub)
    if mi_type != MI_INT32 or len(dims_b) % 4 != 0:
        raise CorruptElement("dimensions sub-element malformed", sub.offset)
    dims = np.frombuffer(dims_b, dtype=order + "i4")
    if dims.size != 2:
        raise UnsupportedElement(f"{dims.size}-D arrays are not supported",
                                 type_code=mx_class)
    rows, cols = int(dims[0]), int(dims[1])
    if rows < 0 or cols < 0 or rows * cols > len(data):
        raise CorruptElement(f"implausible dimensions {rows}x{cols}", sub.offset)

    mi_type, name_b = _read_tag(sub)
    if mi_type != MI_INT8:
        raise CorruptElement("array name sub-element malformed", sub.offset)
    name = name_b.decode("ascii", errors="replace")

    mi_type, real_b = _read_tag(sub)
    if mi_type == MI_DOUBLE:
        dtype, esize, kind = order + "f8", 8, "double"
    elif mi_type == MI_SINGLE:
        dtype, esize, kind = order + "f4", 4, "single"
    else:
        raise UnsupportedElement(
            f"numeric storage type {mi_type} is not supported (only miDOUBLE/miSINGLE)",
            type_code=mi_type)
    if len(real_b) != rows * cols * esize:
        raise CorruptElement(
            f"variable {name!r} has {len(real_b)} data bytes, expected {rows * cols * esize}",
            sub.offset)
    values = np.frombuffer(real_b, dtype=dtype).astype(np.float64)
    return MatArray(name=name, shape=(rows, cols), element_type=kind,
                    data=values, byte_order=order)


def read_mat_arrays(path: str) -> list[MatArray]:
    """Parse every supported variable from a MAT-v5 file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_LEN:
        raise BadMagic(f"file is {len(blob)} bytes, shorter than the 128-byte header",
                       path=path)
    if blob[:4] == b"\x00\x00\x00\x00":
        raise BadMagic("leading zero bytes: not a Level-5 MAT-file", path=path)
    endian = blob[126:128]
    if endian == b"IM":
        order = "<"
    elif endian == b"MI":
        order = ">"
    else:
        raise BadMagic(f"bad endian indicator {endian!r}", path=path)
    version = int(np.frombuffer(blob[124:126], dtype=order + "u2")[0])
    if version != 0x0100:
        raise BadMagic(f"unsupported MAT version 0x{version:04x}", path=path)

    stream = _Stream(blob[HEADER_LEN:], order, base_offset=HEADER_LEN)
    arrays: list[MatArray] = []
    while stream.remaining() >= 8:
        element_start = stream.offset
        mi_type, data = _read_tag(stream)
        if mi_type == MI_COMPRESSED:
            try:
                inner = zlib.decompress(data)
            except zlib.error as exc:
                raise CorruptElement(f"zlib failure: {exc}", element_start) from exc
            inner_stream = _Stream(inner, order, base_offset=element_start)
            inner_type, inner_data = _read_tag(inner_stream)
            if inner_type != MI_MATRIX:
                raise UnsupportedElement(
                    f"compressed element holds type {inner_type}, expected miMATRIX",
                    type_code=inner_type)
            arrays.append(_parse_matrix(inner_data, order, element_start))
        elif mi_type == MI_MATRIX:
            arrays.append(_parse_matrix(data, order, element_start))
        else:
            raise UnsupportedElement(f"top-level element type {mi_type} is not supported",
                                     type_code=mi_type)
    if stream.remaining():
        raise CorruptElement(f"{stream.remaining()} trailing bytes after last element",
                             stream.offset)
    return arrays


def load_mat_v5(path: str, variable: str, sample_rate_hz: float, dataset_id: str,
                condition_id: str, label: FaultLabel) -> Signal:
    """Extract one named variable, flattened column-major, as a Signal."""
    arrays = read_mat_arrays(path)
    for arr in arrays:
        if arr.name == variable:
            return Signal(samples=arr.data, sample_rate_hz=sample_rate_hz,
                          dataset_id=dataset_id, condition_id=condition_id, label=label,
                          signal_id=f"{path.rsplit('/', 1)[-1]}#{variable}")
    raise VariableNotFound(variable, [a.name for a in arrays], path=path)
