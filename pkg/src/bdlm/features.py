"""The 24 time- and frequency-domain statistics computed per segment.

p1..p12 come from the raw window, p13..p24 from its one-sided magnitude
spectrum. Indices whose defining ratio loses meaning (a base statistic
underflows) are flagged degenerate and carried as NaN rather than aborting
the segment, so downstream text rendering can say "undefined".
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput
from .signals import Segment
from .spectral import Spectrum, magnitude_spectrum

UNDERFLOW = 1e-30

FEATURE_NAMES = (
    "mean value", "standard deviation", "square root amplitude", "absolute mean value",
    "peak value", "skewness", "kurtosis", "variance",
    "kurtosis index", "peak index", "waveform index", "pulse index",
    "frequency mean value", "frequency variance", "frequency skewness", "frequency kurtosis",
    "gravity frequency", "frequency standard deviation", "frequency root mean square",
    "average frequency", "regularity degree", "variation parameter",
    "eighth-order moment", "sixteenth-order moment",
)


@dataclass
class FeatureVector:
    """Values p1..p24 (1-based indexing via ``p()``) plus degenerate flags."""

    values: np.ndarray
    flags: frozenset[int] = field(default_factory=frozenset)

    def p(self, index: int) -> float:
        if not 1 <= index <= 24:
            raise IndexError(f"feature index must be 1..24, got {index}")
        return float(self.values[index - 1])

    def is_flagged(self, index: int) -> bool:
        return index in self.flags


def _div(num: float, den: float) -> float:
    return num / den if abs(den) >= UNDERFLOW else float("nan")


def time_features(samples: np.ndarray, literal_kurtosis_index: bool = False):
    """p1..p12 from a raw window.

    ``literal_kurtosis_index`` switches p9 to the as-printed p7/p6 form whose
    denominator is the raw third moment; the default p7/p8^2 is the standard
    kurtosis factor. In either mode p9 is flagged degenerate when the third
    moment underflows, as are p10/p11 when the standard deviation does and
    p11/p12 when the absolute mean does.

    Returns (values[12], flags set of 1-based indices).
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise EmptyInput(f"need at least 2 samples, got {x.size}")
    n = x.size
    ax = np.abs(x)

    p1 = x.mean()
    p2 = float(np.sqrt(np.sum((x - p1) ** 2) / (n - 1)))
    p3 = float(np.mean(np.sqrt(ax)) ** 2)
    p4 = float(ax.mean())
    p5 = float(ax.max())
    p6 = float(np.mean(x ** 3))
    p7 = float(np.mean(x ** 4))
    p8 = float(np.mean(x ** 2))

    flags: set[int] = set()
    if abs(p6) < UNDERFLOW:
        flags.add(9)
    if abs(p2) < UNDERFLOW:
        flags.update((10, 11))
    if abs(p4) < UNDERFLOW:
        flags.update((11, 12))

    if literal_kurtosis_index:
        p9 = _div(p7, p6)
    else:
        p9 = _div(p7, p8 * p8)
        if abs(p8 * p8) < UNDERFLOW:
            flags.add(9)
    p10 = _div(p5, p2)
    p11 = _div(p2, p4)
    p12 = _div(p5, p4)

    values = np.array([p1, p2, p3, p4, p5, p6, p7, p8, p9, p10, p11, p12])
    values[[i - 1 for i in flags]] = np.nan
    return values, flags


def frequency_features(spectrum: Spectrum):
    """p13..p24 from a one-sided magnitude spectrum.

    A feature is flagged degenerate when its own denominator underflows
    (spectral variance for p15/p16, gravity frequency for p22, spectral
    standard deviation for p23/p24, and the relevant weighted sums for
    p17..p21 when the spectrum has no mass).

    Returns (values[12], flags set of 1-based indices).
    """
    s = np.asarray(spectrum.magnitudes, dtype=np.float64)
    f = np.asarray(spectrum.freqs_hz, dtype=np.float64)
    if s.size < 2:
        raise EmptyInput(f"need at least 2 spectrum bins, got {s.size}")
    k = s.size
    total = float(s.sum())

    p13 = float(s.mean())
    p14 = float(np.sum((s - p13) ** 2) / (k - 1))

    flags: set[int] = set()
    p15 = _div(float(np.sum((s - p13) ** 3)), k * p14 ** 1.5)
    if abs(k * p14 ** 1.5) < UNDERFLOW:
        flags.add(15)
    p16 = _div(float(np.sum((s - p13) ** 4)), k * p14 ** 2)
    if abs(k * p14 ** 2) < UNDERFLOW:
        flags.add(16)

    sf = float(np.sum(f * s))
    sf2 = float(np.sum(f ** 2 * s))
    sf4 = float(np.sum(f ** 4 * s))

    p17 = _div(sf, total)
    if abs(total) < UNDERFLOW:
        flags.update(range(17, 25))
        p18 = p19 = p20 = p21 = p22 = p23 = p24 = float("nan")
    else:
        centered2 = float(np.sum((f - p17) ** 2 * s))
        centered3 = float(np.sum((f - p17) ** 3 * s))
        centered4 = float(np.sum((f - p17) ** 4 * s))
        p18 = float(np.sqrt(centered2 / (k * total)))
        p19 = float(np.sqrt(sf2 / total))
        if abs(sf2) < UNDERFLOW:
            p20 = float("nan")
            flags.add(20)
        else:
            p20 = float(np.sqrt(sf4 / sf2))
        den21 = float(np.sqrt(total * sf4))
        p21 = _div(sf2, den21)
        if abs(den21) < UNDERFLOW:
            flags.add(21)
        p22 = _div(p18, p17)
        if abs(p17) < UNDERFLOW:
            flags.add(22)
        p23 = _div(centered3, k * p18 ** 3)
        p24 = _div(centered4, k * p18 ** 4)
        if abs(k * p18 ** 3) < UNDERFLOW:
            flags.update((23, 24))

    values = np.array([p13, p14, p15, p16, p17, p18, p19, p20, p21, p22, p23, p24])
    values[[i - 13 for i in flags]] = np.nan
    return values, flags


def extract_features(segment: Segment, literal_kurtosis_index: bool = False) -> FeatureVector:
    """All 24 statistics of one segment, in fixed p1..p24 order.

    The values stay unnormalized to preserve their physical scale.
    """
    tvals, tflags = time_features(segment.samples, literal_kurtosis_index=literal_kurtosis_index)
    spectrum = magnitude_spectrum(segment.samples, segment.sample_rate_hz)
    fvals, fflags = frequency_features(spectrum)
    return FeatureVector(values=np.concatenate([tvals, fvals]),
                         flags=frozenset(tflags | fflags))


def write_feature_csv(rows: list[tuple[Segment, FeatureVector]], path: str) -> int:
    """One row per segment: p1..p24 then label, dataset_id, condition_id.

    Flagged features are written as ``nan``. Returns rows written.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"p{i}" for i in range(1, 25)]
                        + ["label", "dataset_id", "condition_id"])
        for segment, fv in rows:
            writer.writerow([repr(float(v)) for v in fv.values]
                            + [segment.label.short_name, segment.dataset_id, segment.condition_id])
    return len(rows)
