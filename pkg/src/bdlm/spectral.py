"""Discrete Fourier analysis: one-sided magnitude spectra and STFT spectrograms.

The transform is computed by an in-house iterative radix-2 FFT for power-of-two
lengths and by Bluestein's chirp-z algorithm otherwise, so results do not
depend on an external FFT backend.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, InvalidConfig, SignalTooShort


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev = (rev << 1) | ((idx >> b) & 1)
    return rev


def _fft_pow2(x: np.ndarray) -> np.ndarray:
    """Iterative Cooley-Tukey DIT FFT. len(x) must be a power of two."""
    n = x.shape[-1]
    a = np.ascontiguousarray(x, dtype=np.complex128)[..., _bit_reverse_indices(n)]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        a = a.reshape(*a.shape[:-1], n // size, size)
        even = a[..., :half].copy()
        odd = a[..., half:] * tw
        a[..., :half] = even + odd
        a[..., half:] = even - odd
        a = a.reshape(*a.shape[:-2], n)
        size *= 2
    return a


def _next_pow2(n: int) -> int:
    m = 1
    while m < n:
        m <<= 1
    return m


def _fft_bluestein(x: np.ndarray) -> np.ndarray:
    """Chirp-z FFT for arbitrary length, built on the radix-2 kernel."""
    n = x.shape[-1]
    k = np.arange(n, dtype=np.int64)
    # k^2 mod 2n keeps the chirp argument small, avoiding range reduction error
    k2 = (k * k) % (2 * n)
    w = np.exp(-1j * np.pi * k2 / n)
    m = _next_pow2(2 * n - 1)
    a = np.zeros(x.shape[:-1] + (m,), dtype=np.complex128)
    a[..., :n] = x * w
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(w)
    b[m - n + 1:] = np.conj(w[1:][::-1])
    fa = _fft_pow2(a)
    fb = _fft_pow2(b)
    conv = np.conj(_fft_pow2(np.conj(fa * fb))) / m
    return conv[..., :n] * w


def dft(x: np.ndarray) -> np.ndarray:
    """Full complex DFT of the last axis (no scaling, e^{-2πikn/N} kernel)."""
    x = np.asarray(x)
    n = x.shape[-1]
    if n == 0:
        raise EmptyInput("cannot transform an empty sequence")
    if n == 1:
        return x.astype(np.complex128)
    if n & (n - 1) == 0:
        return _fft_pow2(x)
    return _fft_bluestein(x)


@dataclass
class Spectrum:
    """One-sided magnitude spectrum with its frequency axis."""

    magnitudes: np.ndarray
    freqs_hz: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        if self.magnitudes.shape != self.freqs_hz.shape:
            raise InvalidConfig("magnitudes and freqs_hz must have equal length")

    def __len__(self) -> int:
        return self.magnitudes.size


def magnitude_spectrum(samples: np.ndarray, sample_rate_hz: float) -> Spectrum:
    """Raw |DFT| over the K = floor(N/2)+1 nonnegative-frequency bins.

    No amplitude scaling is applied and the DC bin is included; downstream
    statistics use the magnitudes only through ratios and weighted moments,
    so the convention just needs to be fixed, and this is it.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise EmptyInput(f"need at least 2 samples, got {x.size}")
    n = x.size
    k = n // 2 + 1
    mags = np.abs(dft(x)[:k])
    freqs = np.arange(k, dtype=np.float64) * (sample_rate_hz / n)
    return Spectrum(magnitudes=mags, freqs_hz=freqs, sample_rate_hz=sample_rate_hz)


_WINDOWS = {
    "rect": lambda n: np.ones(n),
    # periodic Hann, the DFT-friendly variant
    "hann": lambda n: 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n),
}


@dataclass
class Spectrogram:
    """STFT magnitude frames (frame x frequency bin)."""

    frames: np.ndarray
    frame_times_s: np.ndarray
    freqs_hz: np.ndarray
    window_len: int
    hop: int


def stft(samples: np.ndarray, sample_rate_hz: float, window_len: int = 256,
         hop: int = 128, window_fn: str = "hann") -> Spectrogram:
    """Short-time magnitude spectra of sliding windows.

    Frame count is floor((len - window_len) / hop) + 1; frame times are the
    window start times.
    """
    x = np.asarray(samples, dtype=np.float64)
    if hop < 1:
        raise InvalidConfig(f"hop must be >= 1, got {hop}")
    if window_fn not in _WINDOWS:
        raise InvalidConfig(f"window_fn must be one of {sorted(_WINDOWS)}, got {window_fn!r}")
    if x.size < window_len:
        raise SignalTooShort(
            f"signal has {x.size} samples, STFT window needs {window_len}",
            length=x.size, window_len=window_len,
        )
    win = _WINDOWS[window_fn](window_len)
    count = (x.size - window_len) // hop + 1
    frames = np.empty((count, window_len // 2 + 1))
    for i in range(count):
        sl = x[i * hop:i * hop + window_len] * win
        frames[i] = magnitude_spectrum(sl, sample_rate_hz).magnitudes
    freqs = np.arange(window_len // 2 + 1, dtype=np.float64) * (sample_rate_hz / window_len)
    times = np.arange(count, dtype=np.float64) * (hop / sample_rate_hz)
    return Spectrogram(frames=frames, frame_times_s=times, freqs_hz=freqs,
                       window_len=window_len, hop=hop)


def write_spectrogram_csv(spec: Spectrogram, path: str) -> int:
    """Plot-ready CSV: header of frequencies, one row per frame prefixed by
    the frame time. Returns the number of frame rows written."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s"] + [repr(float(f)) for f in spec.freqs_hz])
        for t, row in zip(spec.frame_times_s, spec.frames):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return spec.frames.shape[0]
