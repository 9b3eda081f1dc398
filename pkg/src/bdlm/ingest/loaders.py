"""CSV and raw binary signal loaders."""

from __future__ import annotations

import csv
import os

import numpy as np

from ..errors import MissingColumn, NonNumericCell, SizeMismatch
from ..signals import FaultLabel, Signal

_RAW_DTYPES = {("f32", "little"): "<f4", ("f32", "big"): ">f4",
               ("f64", "little"): "<f8", ("f64", "big"): ">f8"}


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_csv(path: str, column, sample_rate_hz: float, dataset_id: str,
             condition_id: str, label: FaultLabel) -> Signal:
    """One signal from a numeric CSV column (by header name or 0-based index).

    A header row is auto-detected; data rows are numbered from 1 in errors.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise MissingColumn(f"{path!r} is empty", path=path, column=str(column))

    has_header = any(not _is_number(cell) for cell in rows[0])
    header = rows[0] if has_header else None
    data_rows = rows[1:] if has_header else rows

    if isinstance(column, str):
        if header is None or column not in header:
            raise MissingColumn(f"column {column!r} not in {path!r}",
                                path=path, column=column)
        col_idx = header.index(column)
    else:
        col_idx = int(column)
        width = len(header) if header is not None else len(rows[0])
        if not 0 <= col_idx < width:
            raise MissingColumn(f"column index {col_idx} out of range for {path!r}",
                                path=path, column=str(column))

    values = np.empty(len(data_rows))
    for i, row in enumerate(data_rows, start=1):
        if col_idx >= len(row) or not _is_number(row[col_idx]):
            cell = row[col_idx] if col_idx < len(row) else "<missing>"
            raise NonNumericCell(f"non-numeric cell {cell!r} in column {column!r} "
                                 f"of {path!r} at row {i}", row=i, path=path)
        values[i - 1] = float(row[col_idx])
    return Signal(samples=values, sample_rate_hz=sample_rate_hz, dataset_id=dataset_id,
                  condition_id=condition_id, label=label,
                  signal_id=f"{os.path.basename(path)}#{column}")


def load_raw(path: str, element_type: str, byte_order: str, sample_rate_hz: float,
             dataset_id: str, condition_id: str, label: FaultLabel) -> Signal:
    """Decode a headerless binary file of f32/f64 samples."""
    key = (element_type, byte_order)
    if key not in _RAW_DTYPES:
        raise SizeMismatch(f"unsupported raw encoding {element_type}/{byte_order}",
                           element_type=element_type, byte_order=byte_order)
    with open(path, "rb") as fh:
        blob = fh.read()
    esize = 4 if element_type == "f32" else 8
    if len(blob) % esize != 0:
        raise SizeMismatch(
            f"{path!r} has {len(blob)} bytes, not a multiple of element size {esize}",
            path=path, size=len(blob), element_size=esize)
    samples = np.frombuffer(blob, dtype=_RAW_DTYPES[key]).astype(np.float64)
    return Signal(samples=samples, sample_rate_hz=sample_rate_hz, dataset_id=dataset_id,
                  condition_id=condition_id, label=label,
                  signal_id=f"{os.path.basename(path)}#raw")


def write_raw(samples: np.ndarray, path: str, element_type: str = "f64",
              byte_order: str = "little") -> None:
    """Inverse of load_raw, used to materialize raw fixtures."""
    key = (element_type, byte_order)
    if key not in _RAW_DTYPES:
        raise SizeMismatch(f"unsupported raw encoding {element_type}/{byte_order}",
                           element_type=element_type, byte_order=byte_order)
    np.asarray(samples, dtype=np.float64).astype(_RAW_DTYPES[key]).tofile(path)
