"""Stratified, seeded, class-balanced split planning plus the leakage audit."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..errors import ClassTooSmall, InvalidConfig
from ..signals import Segment
from .metrics import CLASS_ORDER

_MODES = {
    "train_val_test_811": (8, 1, 1),
    "train_test_82": (8, 2),
    "train_val_81": (8, 1),
}
_MIN_PER_CLASS = {
    "train_val_test_811": 10,
    "train_test_82": 5,
    "train_val_81": 9,
}


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "train_val_test_811"
    seed: int = 0
    balance: bool = True

    def __post_init__(self):
        if self.mode not in _MODES:
            raise InvalidConfig(f"unknown split mode {self.mode!r}; options: {sorted(_MODES)}")


@dataclass
class Splits:
    train: list
    test: list
    val: list | None = None

    def parts(self) -> list[tuple[str, list]]:
        out = [("train", self.train)]
        if self.val is not None:
            out.append(("val", self.val))
        out.append(("test", self.test))
        return out


def _by_class(segments) -> dict:
    groups: dict = {label: [] for label in CLASS_ORDER}
    for seg in segments:
        groups[seg.label].append(seg)
    return {label: segs for label, segs in groups.items() if segs}


def balance_classes(segments: list[Segment], seed: int) -> list[Segment]:
    """Downsample every class to the minimum class count (seeded, order kept)."""
    groups = _by_class(segments)
    if not groups:
        return []
    target = min(len(v) for v in groups.values())
    rng = np.random.default_rng(seed)
    kept = []
    for label in CLASS_ORDER:
        if label not in groups:
            continue
        segs = groups[label]
        idx = np.sort(rng.choice(len(segs), size=target, replace=False))
        kept.extend(segs[i] for i in idx)
    return kept


def build_splits(segments: list[Segment], spec: SplitSpec) -> Splits:
    """Stratified per class: every class contributes the same fractions.

    With balancing, classes are first cut to the minimum class count so all
    present classes are equally represented. Splits partition the segments,
    so no window origin appears in two splits.
    """
    fractions = _MODES[spec.mode]
    total = sum(fractions)
    pool = balance_classes(segments, spec.seed) if spec.balance else list(segments)
    groups = _by_class(pool)
    rng = np.random.default_rng(spec.seed)
    buckets: list[list[Segment]] = [[] for _ in fractions]
    for label in CLASS_ORDER:
        if label not in groups:
            continue
        segs = groups[label]
        n = len(segs)
        if n < _MIN_PER_CLASS[spec.mode]:
            raise ClassTooSmall(
                f"class {label.short_name!r} has {n} segments, mode {spec.mode} needs "
                f">= {_MIN_PER_CLASS[spec.mode]}", label=label.short_name, count=n)
        order = rng.permutation(n)
        sizes = [n * f // total for f in fractions[1:]]
        sizes.insert(0, n - sum(sizes))
        lo = 0
        for bucket, size in zip(buckets, sizes):
            bucket.extend(segs[i] for i in order[lo:lo + size])
            lo += size
    if spec.mode == "train_val_test_811":
        return Splits(train=buckets[0], val=buckets[1], test=buckets[2])
    if spec.mode == "train_val_81":
        return Splits(train=buckets[0], val=buckets[1], test=[])
    return Splits(train=buckets[0], test=buckets[1])


def subsample_stratified(segments: list[Segment], fraction: float, seed: int) -> list[Segment]:
    """Seeded class-proportional subsample (floor of fraction per class)."""
    if not 0 < fraction <= 1:
        raise InvalidConfig(f"fraction must be in (0, 1], got {fraction}")
    groups = _by_class(segments)
    rng = np.random.default_rng(seed)
    kept = []
    for label in CLASS_ORDER:
        if label not in groups:
            continue
        segs = groups[label]
        m = int(len(segs) * fraction)
        if m < 1:
            raise ClassTooSmall(
                f"class {label.short_name!r} empties at fraction {fraction}",
                label=label.short_name, count=len(segs))
        idx = np.sort(rng.choice(len(segs), size=m, replace=False))
        kept.extend(segs[i] for i in idx)
    return kept


def audit_leakage(*segment_lists) -> int:
    """Number of (signal_id, window start) origins present in more than one of
    the given lists. Zero means the splits are leakage-free."""
    seen: dict[tuple, set[int]] = {}
    for part_index, part in enumerate(segment_lists):
        for seg in part:
            seen.setdefault(seg.origin, set()).add(part_index)
    return sum(1 for parts in seen.values() if len(parts) > 1)


def membership_hash(segments) -> str:
    """Order-independent digest of split membership, for paired-arm audits."""
    keys = sorted(f"{sid}:{start}" for sid, start in (s.origin for s in segments))
    return hashlib.sha256("|".join(keys).encode("utf-8")).hexdigest()
