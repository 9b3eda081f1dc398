"""Core signal types, sliding-window segmentation, instance normalization and
a synthetic bearing-signal generator used by dataset-free tests."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidConfig, SignalTooShort

INSTANCE_NORM_EPS = 1e-12


class FaultLabel(Enum):
    """The four bearing health states. Datasets may use a subset."""

    Normal = "normal"
    InnerRace = "inner"
    OuterRace = "outer"
    RollingElement = "ball"

    @property
    def short_name(self) -> str:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "FaultLabel":
        key = name.strip().lower()
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise InvalidConfig(f"unknown fault label {name!r}", label=name)


@dataclass
class Signal:
    """A labeled vibration recording.

    ``signal_id`` must be unique among signals fed to the same experiment;
    loaders derive it from the source file, the synthetic generator from the
    seed.
    """

    samples: np.ndarray
    sample_rate_hz: float
    dataset_id: str
    condition_id: str
    label: FaultLabel
    signal_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InvalidConfig("signal samples must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidConfig("signal samples must all be finite")
        if not self.sample_rate_hz > 0:
            raise InvalidConfig(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not self.signal_id:
            self.signal_id = f"{self.dataset_id}:{self.condition_id}:{self.label.short_name}"

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class Segment:
    """A fixed-length window cut from a signal, carrying its provenance."""

    samples: np.ndarray
    signal_id: str
    start: int
    label: FaultLabel
    condition_id: str
    dataset_id: str
    sample_rate_hz: float

    @property
    def origin(self) -> tuple[str, int]:
        return (self.signal_id, self.start)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class SegmentationConfig:
    """Sliding-window parameters. The default 50% overlap is a convention;
    the step is a free knob bounded by the window length."""

    window_len: int = 2048
    step: int = 1024

    def __post_init__(self):
        if self.window_len <= 0:
            raise InvalidConfig(f"window_len must be positive, got {self.window_len}")
        if not (0 < self.step <= self.window_len):
            raise InvalidConfig(
                f"step must be in (0, window_len], got step={self.step} window_len={self.window_len}"
            )


def segment_sliding_window(signal: Signal, cfg: SegmentationConfig) -> list[Segment]:
    """Cut a signal into ``floor((len - window) / step) + 1`` windows.

    Tail samples not covered by a full window are dropped.
    """
    n = len(signal)
    if n < cfg.window_len:
        raise SignalTooShort(
            f"signal {signal.signal_id!r} has {n} samples, window needs {cfg.window_len}",
            signal=signal.signal_id, length=n, window_len=cfg.window_len,
        )
    count = (n - cfg.window_len) // cfg.step + 1
    segments = []
    for i in range(count):
        start = i * cfg.step
        segments.append(Segment(
            samples=signal.samples[start:start + cfg.window_len].copy(),
            signal_id=signal.signal_id,
            start=start,
            label=signal.label,
            condition_id=signal.condition_id,
            dataset_id=signal.dataset_id,
            sample_rate_hz=signal.sample_rate_hz,
        ))
    return segments


def instance_normalize(samples: np.ndarray, eps: float = INSTANCE_NORM_EPS) -> np.ndarray:
    """Zero-mean / unit-variance standardization: (x - mean) / sqrt(var + eps).

    Variance is the population (1/N) variance. Constant input maps to all
    zeros because the numerator vanishes while eps keeps the denominator
    positive.
    """
    x = np.asarray(samples, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of one synthetic bearing signal. Deterministic per seed."""

    label: FaultLabel
    carrier_hz: float
    impact_rate_hz: float
    decay: float
    noise_std: float
    length: int
    sample_rate_hz: float
    seed: int

    def __post_init__(self):
        if self.length <= 0:
            raise InvalidConfig(f"length must be positive, got {self.length}")
        if self.sample_rate_hz <= 0:
            raise InvalidConfig("sample_rate_hz must be positive")
        if self.label is not FaultLabel.Normal:
            if not (0 < self.carrier_hz < self.sample_rate_hz / 2):
                raise InvalidConfig(
                    f"carrier {self.carrier_hz} Hz violates Nyquist for rate {self.sample_rate_hz} Hz",
                    carrier_hz=self.carrier_hz, sample_rate_hz=self.sample_rate_hz,
                )
            if self.impact_rate_hz <= 0:
                raise InvalidConfig("impact_rate_hz must be positive for fault classes")
            if self.decay <= 0:
                raise InvalidConfig("decay must be positive")
        if self.noise_std < 0:
            raise InvalidConfig("noise_std must be nonnegative")


# Per-class generator parameters, versioned so fixture-derived numbers stay
# stable. Impact rates loosely follow characteristic fault frequencies of a
# small drive-end bearing near 1800 rpm; carriers are separated resonance bands.
SYNTH_FIXTURE_V1: dict[FaultLabel, dict[str, float]] = {
    FaultLabel.Normal: {"carrier_hz": 0.0, "impact_rate_hz": 0.0, "decay": 1.0, "noise_std": 1.0},
    FaultLabel.InnerRace: {"carrier_hz": 3200.0, "impact_rate_hz": 162.0, "decay": 600.0, "noise_std": 0.25},
    FaultLabel.OuterRace: {"carrier_hz": 2200.0, "impact_rate_hz": 107.0, "decay": 500.0, "noise_std": 0.25},
    FaultLabel.RollingElement: {"carrier_hz": 1200.0, "impact_rate_hz": 135.0, "decay": 450.0, "noise_std": 0.25},
}
SYNTH_FIXTURE_VERSION = "v1"


def fixture_spec(label: FaultLabel, length: int, sample_rate_hz: float, seed: int,
                 carrier_scale: float = 1.0, rate_scale: float = 1.0) -> SyntheticSpec:
    """SyntheticSpec from the versioned per-class table, with optional carrier
    and impact-rate scaling used to emulate distinct datasets / conditions."""
    p = SYNTH_FIXTURE_V1[label]
    return SyntheticSpec(
        label=label,
        carrier_hz=p["carrier_hz"] * carrier_scale,
        impact_rate_hz=p["impact_rate_hz"] * rate_scale,
        decay=p["decay"],
        noise_std=p["noise_std"],
        length=length,
        sample_rate_hz=sample_rate_hz,
        seed=seed,
    )


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labeled parts (order-sensitive)."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.blake2s(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & (2**63 - 1)


def synth_signal(spec: SyntheticSpec) -> Signal:
    """Generate one synthetic signal.

    Normal is white gaussian noise. Fault classes are periodic exponentially
    decaying impulses at ``impact_rate_hz`` modulating a ``carrier_hz``
    sinusoid, plus noise. Bitwise deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.length, dtype=np.float64) / spec.sample_rate_hz
    if spec.label is FaultLabel.Normal:
        x = np.zeros(spec.length)
    else:
        period = 1.0 / spec.impact_rate_hz
        k = np.floor(t / period)
        frac = t - k * period
        # closed-form sum over all past impulses: geometric series of decayed tails
        r = np.exp(-spec.decay * period)
        envelope = np.exp(-spec.decay * frac) * (1.0 - r ** (k + 1.0)) / (1.0 - r)
        x = envelope * np.sin(2.0 * np.pi * spec.carrier_hz * t)
    if spec.noise_std > 0:
        x = x + spec.noise_std * rng.standard_normal(spec.length)
    return Signal(
        samples=x,
        sample_rate_hz=spec.sample_rate_hz,
        dataset_id="synthetic",
        condition_id="0",
        label=spec.label,
        signal_id=f"synth:{spec.label.short_name}:{spec.seed}",
    )
