"""Synthetic segment builders for dataset-free experiments and tests.

Each segment is generated as an independent window-length signal, so fixture
splits can never share raw-signal regions.
"""

from __future__ import annotations

from ..signals import (FaultLabel, Segment, SYNTH_FIXTURE_VERSION, derive_seed,
                       fixture_spec, synth_signal)
from .metrics import CLASS_ORDER

FIXTURE_SAMPLE_RATE = 12000.0

# Carrier-band scaling per synthetic dataset; bands overlap enough for
# knowledge transfer while keeping each dataset distinct.
DATASET_CARRIER_SCALES = {"SYNA": 1.0, "SYNB": 0.85, "SYNC": 1.15, "SYND": 0.7}

# Impact-rate scaling per synthetic operating condition (speed proxy).
CONDITION_RATE_SCALES = {"0": 1.0, "1": 0.9, "2": 1.1}


def synthetic_segments(dataset_id: str = "SYNA", n_per_class: int = 200,
                       window_len: int = 2048, sample_rate_hz: float = FIXTURE_SAMPLE_RATE,
                       seed: int = 0, condition_id: str = "0", carrier_scale: float = 1.0,
                       rate_scale: float = 1.0,
                       labels: tuple[FaultLabel, ...] = CLASS_ORDER) -> list[Segment]:
    """n_per_class independent one-window signals per label."""
    segments = []
    for label in labels:
        for i in range(n_per_class):
            spec = fixture_spec(
                label, window_len, sample_rate_hz,
                seed=derive_seed(SYNTH_FIXTURE_VERSION, seed, dataset_id,
                                 condition_id, label.short_name, i),
                carrier_scale=carrier_scale, rate_scale=rate_scale)
            signal = synth_signal(spec)
            segments.append(Segment(
                samples=signal.samples, signal_id=signal.signal_id, start=0,
                label=label, condition_id=condition_id, dataset_id=dataset_id,
                sample_rate_hz=sample_rate_hz))
    return segments


def synthetic_condition_suite(dataset_id: str = "SYNA", n_per_class: int = 60,
                              window_len: int = 2048, seed: int = 0,
                              conditions: dict[str, float] | None = None,
                              labels: tuple[FaultLabel, ...] = CLASS_ORDER) -> list:
    """One synthetic dataset spanning several operating conditions."""
    conditions = conditions or CONDITION_RATE_SCALES
    segments = []
    for condition_id, rate_scale in conditions.items():
        segments.extend(synthetic_segments(
            dataset_id=dataset_id, n_per_class=n_per_class, window_len=window_len,
            seed=seed, condition_id=condition_id, rate_scale=rate_scale, labels=labels))
    return segments


def synthetic_dataset_suite(n_per_class: int = 60, window_len: int = 2048, seed: int = 0,
                            datasets: dict[str, float] | None = None,
                            labels: tuple[FaultLabel, ...] = CLASS_ORDER) -> list:
    """Several synthetic datasets with distinct carrier bands."""
    datasets = datasets or DATASET_CARRIER_SCALES
    segments = []
    for dataset_id, carrier_scale in datasets.items():
        segments.extend(synthetic_segments(
            dataset_id=dataset_id, n_per_class=n_per_class, window_len=window_len,
            seed=seed, carrier_scale=carrier_scale, labels=labels))
    return segments


_CARRIER_CYCLE = (1.0, 0.85, 1.15, 0.7)
_RATE_CYCLE = (0.88, 0.96, 1.04, 1.12)


def synthetic_for_plan(plan, n_per_class: int = 40, window_len: int | None = None,
                       seed: int = 0) -> list:
    """Synthetic stand-in data shaped to whatever a plan references: every
    named dataset gets its own carrier band, every named condition its own
    impact-rate scale."""
    window_len = window_len or plan.model.get("window_len", 2048)
    if plan.kind in ("cross_dataset_full", "cross_dataset_limited"):
        names = []
        for case in plan.cases:
            for name in list(case.get("sources", ())) + [case.get("target")]:
                if name and name not in names:
                    names.append(name)
        segments = []
        for i, name in enumerate(names):
            segments.extend(synthetic_segments(
                dataset_id=name, n_per_class=n_per_class, window_len=window_len,
                seed=seed, carrier_scale=_CARRIER_CYCLE[i % len(_CARRIER_CYCLE)]))
        return segments
    if plan.kind == "cross_condition":
        conditions = []
        for case in plan.cases:
            for cond in list(case.get("train_conditions", ())) + [case.get("test_condition")]:
                if cond is not None and cond not in conditions:
                    conditions.append(cond)
        dataset_id = plan.dataset_id or "SYNA"
        segments = []
        for i, cond in enumerate(sorted(conditions)):
            segments.extend(synthetic_segments(
                dataset_id=dataset_id, n_per_class=n_per_class, window_len=window_len,
                seed=seed, condition_id=str(cond),
                rate_scale=_RATE_CYCLE[i % len(_RATE_CYCLE)]))
        return segments
    return synthetic_segments(dataset_id=plan.dataset_id or "SYNA",
                              n_per_class=n_per_class, window_len=window_len, seed=seed)
