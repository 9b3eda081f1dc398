"""Dataset manifests: structured JSON describing where recordings live and
what they are."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

from ..errors import BdlmError, InvalidConfig, ManifestError, ManifestLabelError
from ..signals import FaultLabel, Signal
from .loaders import load_csv, load_raw
from .matfile import load_mat_v5

logger = logging.getLogger("bdlm.ingest")

ALL_LABELS = tuple(FaultLabel)


@dataclass
class ManifestEntry:
    path: str
    sample_rate_hz: float
    condition_id: str
    label: FaultLabel
    format: str = ""
    variable: str = ""
    column: object = 0
    element_type: str = "f64"
    byte_order: str = "little"

    def resolved_format(self) -> str:
        if self.format:
            return self.format
        ext = os.path.splitext(self.path)[1].lower()
        if ext == ".mat":
            return "mat"
        if ext == ".csv":
            return "csv"
        return "raw"


@dataclass
class DatasetManifest:
    dataset_id: str
    entries: list[ManifestEntry]
    label_space: tuple[FaultLabel, ...] = ALL_LABELS
    base_dir: str = "."

    def __post_init__(self):
        seen = set()
        for i, entry in enumerate(self.entries):
            key = (entry.path, entry.variable or entry.column)
            if key in seen:
                raise InvalidConfig(f"duplicate manifest entry {key!r} at index {i}",
                                    entry=i)
            seen.add(key)


def parse_manifest(path: str) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        label_space = tuple(FaultLabel.from_name(n) for n in
                            doc.get("label_space", [l.value for l in ALL_LABELS]))
        entries = []
        for raw in doc["entries"]:
            entries.append(ManifestEntry(
                path=raw["path"],
                sample_rate_hz=float(raw["sample_rate_hz"]),
                condition_id=str(raw["condition_id"]),
                label=FaultLabel.from_name(raw["label"]),
                format=raw.get("format", ""),
                variable=raw.get("variable", ""),
                column=raw.get("column", 0),
                element_type=raw.get("element_type", "f64"),
                byte_order=raw.get("byte_order", "little"),
            ))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfig(f"manifest {path!r} malformed: {exc}", path=path) from exc
    return DatasetManifest(dataset_id=str(doc.get("dataset_id", "unnamed")),
                           entries=entries, label_space=label_space,
                           base_dir=os.path.dirname(os.path.abspath(path)))


def _load_entry(manifest: DatasetManifest, entry: ManifestEntry) -> Signal:
    if entry.label not in manifest.label_space:
        raise ManifestLabelError(
            f"label {entry.label.short_name!r} outside the declared label space "
            f"{[l.short_name for l in manifest.label_space]} of dataset {manifest.dataset_id}",
            label=entry.label.short_name, dataset=manifest.dataset_id)
    full = entry.path if os.path.isabs(entry.path) else os.path.join(manifest.base_dir, entry.path)
    fmt = entry.resolved_format()
    meta = dict(sample_rate_hz=entry.sample_rate_hz, dataset_id=manifest.dataset_id,
                condition_id=entry.condition_id, label=entry.label)
    if fmt == "mat":
        return load_mat_v5(full, entry.variable, **meta)
    if fmt == "csv":
        return load_csv(full, entry.column, **meta)
    if fmt == "raw":
        return load_raw(full, entry.element_type, entry.byte_order, **meta)
    raise InvalidConfig(f"unknown entry format {fmt!r}", format=fmt)


def load_manifest(path: str) -> list[Signal]:
    """Load every entry, in manifest order. Per-entry failures are collected
    and raised together with their entry indices."""
    manifest = parse_manifest(path)
    if not manifest.entries:
        logger.warning("manifest %r has no entries", path)
        return []
    signals: list[Signal] = []
    failures: list[tuple[int, Exception]] = []
    for i, entry in enumerate(manifest.entries):
        try:
            signals.append(_load_entry(manifest, entry))
        except (BdlmError, OSError) as exc:
            failures.append((i, exc))
    if failures:
        raise ManifestError(failures, path=path)
    return signals
