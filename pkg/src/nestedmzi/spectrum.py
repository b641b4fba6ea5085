"""Sampling, disturbances, windowing, radix-2 FFT and periodogram analysis.

Periodogram convention: for an N-point (windowed) series with DFT ``X_k``,
``power_k = |X_k|**2 / N`` for the DC and Nyquist bins and twice that for the
others.  With this choice ``sum(power) == sum(x**2)`` (Parseval).

Noise uses ``numpy.random.default_rng(seed)``, i.e. the 64-bit PCG64 generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .beams import trace_paths_batch
from .detector import QuadratureSpec, qcd_signal_batch
from .errors import DegenerateError, DomainError
from .model import InterferometerGraph, validate_graph

WINDOWS = ("rectangular", "hann")


@dataclass(frozen=True)
class Band:
    low: float
    high: float

    def __post_init__(self):
        if not 0 <= self.low < self.high:
            raise DomainError(f"band needs 0 <= low < high, got {self.low}:{self.high}")

    def check(self, nyquist: float):
        if self.high > nyquist:
            raise DomainError(f"band upper edge {self.high} Hz above Nyquist {nyquist} Hz")

    def __str__(self):
        return f"{self.low:g}:{self.high:g}"


@dataclass(frozen=True)
class SamplingSpec:
    sample_rate: float = 2048.0
    duration: float = 2.0
    window: str = "hann"

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.duration))

    def problems(self, max_frequency: float = 0.0) -> List[str]:
        out = []
        n = self.n_samples
        if not (self.sample_rate > 0 and self.duration > 0):
            out.append("sample_rate and duration must be > 0")
        elif n < 256 or n & (n - 1):
            out.append(f"sample_rate*duration must round to a power of two >= 256 (got {n})")
        if self.window not in WINDOWS:
            out.append(f"unknown window {self.window!r}")
        if not self.sample_rate > 2 * max_frequency:
            out.append(
                f"sample_rate {self.sample_rate} Hz must exceed twice the highest frequency {max_frequency} Hz"
            )
        return out


@dataclass(frozen=True)
class Tone:
    frequency: float
    relative_amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class DisturbanceSpec:
    """Additive disturbances on the difference signal.

    Tone amplitudes and ``noise_sigma`` are relative to the mean total power
    reaching the detector, so they scale with the light actually detected.
    """

    tones: Tuple[Tone, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0

    def problems(self, nyquist: float) -> List[str]:
        out = []
        for tone in self.tones:
            if not 0 < tone.frequency < nyquist:
                out.append(f"disturbance at {tone.frequency} Hz not below Nyquist {nyquist} Hz")
            if tone.relative_amplitude < 0:
                out.append(f"disturbance at {tone.frequency} Hz has negative amplitude")
        if self.noise_sigma < 0:
            out.append("noise_sigma must be >= 0")
        return out


ACOUSTIC_LINES = DisturbanceSpec(tones=(Tone(280.0, 1e-4), Tone(310.0, 1e-4)))


@dataclass(frozen=True)
class TimeSeries:
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("time series must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise DomainError("time series contains non-finite samples")
        object.__setattr__(self, "samples", arr)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class PowerSpectrum:
    bin_width: float
    powers: np.ndarray
    normalized_band: Optional[Band] = None
    padded: bool = False

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.powers.size) * self.bin_width

    @property
    def nyquist(self) -> float:
        return (self.powers.size - 1) * self.bin_width

    def band_mask(self, band: Band) -> np.ndarray:
        f = self.frequencies
        return (f >= band.low) & (f <= band.high)

    def band_integral(self, band: Band) -> float:
        return float(np.sum(self.powers[self.band_mask(band)]) * self.bin_width)


def simulate_time_series(
    graph: InterferometerGraph,
    sampling: SamplingSpec = SamplingSpec(),
    disturbances: DisturbanceSpec = DisturbanceSpec(),
    quadrature: QuadratureSpec = QuadratureSpec(),
) -> TimeSeries:
    """Quad-cell difference signal sampled at ``k / sample_rate``.

    Optical samples are computed first; tones and seeded Gaussian noise are
    added afterwards in a fixed order, so the output is byte-deterministic.
    """
    validate_graph(graph).raise_if_invalid()
    freqs = [m.frequency for m in graph.mirrors().values()]
    freqs += [t.frequency for t in disturbances.tones]
    problems = sampling.problems(max(freqs, default=0.0))
    problems += disturbances.problems(sampling.sample_rate / 2)
    if problems:
        raise DomainError("; ".join(problems))

    n = sampling.n_samples
    t = np.arange(n) / sampling.sample_rate
    amps, disp, tilts = trace_paths_batch(graph, t)
    diff, total = qcd_signal_batch(amps, disp, tilts, graph.beam_waist, quadrature)

    scale = float(np.mean(total))
    for tone in disturbances.tones:
        diff = diff + scale * tone.relative_amplitude * np.sin(
            2 * math.pi * tone.frequency * t + tone.phase
        )
    if disturbances.noise_sigma > 0:
        rng = np.random.default_rng(disturbances.seed)
        diff = diff + scale * disturbances.noise_sigma * rng.standard_normal(n)
    return TimeSeries(sampling.sample_rate, diff)


def window_coefficients(n: int, window: str) -> np.ndarray:
    if window == "rectangular":
        return np.ones(n)
    if window == "hann":
        if n == 1:
            return np.ones(1)
        k = np.arange(n)
        return 0.5 * (1.0 - np.cos(2.0 * math.pi * k / (n - 1)))
    raise DomainError(f"unknown window {window!r}")


def apply_window(ts: TimeSeries, window: str = "hann") -> TimeSeries:
    if window == "rectangular":
        return ts
    return TimeSeries(ts.sample_rate, ts.samples * window_coefficients(len(ts), window))


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_radix2(x) -> np.ndarray:
    """Iterative decimation-in-time Cooley-Tukey FFT; ``len(x)`` must be a power of two."""
    a = np.asarray(x, dtype=complex)
    n = a.size
    if n == 0 or n & (n - 1):
        raise DomainError(f"radix-2 FFT needs a power-of-two length, got {n}")
    a = a[_bit_reverse(n)].copy()
    # twiddles from exact integer indices keep rounding at the 1e-16 level
    twiddle = np.exp(-2j * math.pi * np.arange(n // 2) / n)
    size = 2
    while size <= n:
        half = size // 2
        w = twiddle[:: n // size][:half]
        blocks = a.reshape(-1, size)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * w
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        size *= 2
    return a


def power_spectrum(ts: TimeSeries) -> PowerSpectrum:
    """One-sided periodogram; non power-of-two inputs are zero-padded and flagged."""
    x = np.asarray(ts.samples, dtype=float)
    if x.size == 0:
        raise DomainError("empty time series")
    n = 1 << (x.size - 1).bit_length()
    padded = n != x.size
    if padded:
        x = np.concatenate([x, np.zeros(n - x.size)])
    spectrum = fft_radix2(x)[: n // 2 + 1]
    powers = (spectrum.real ** 2 + spectrum.imag ** 2) / n
    if n > 1:
        powers[1 : n // 2] *= 2.0
    return PowerSpectrum(ts.sample_rate / n, powers, None, padded)


def band_normalize(spec: PowerSpectrum, band: Band) -> PowerSpectrum:
    """Scale the spectrum so its integral over ``band`` equals one."""
    band.check(spec.nyquist)
    if spec.normalized_band == band:
        return spec
    integral = spec.band_integral(band)
    if not integral > 0:
        raise DegenerateError(f"zero spectral power in band {band}")
    return PowerSpectrum(spec.bin_width, spec.powers / integral, band, spec.padded)


def _nearest_bin(spec: PowerSpectrum, frequency: float) -> int:
    if not 0 <= frequency < spec.nyquist:
        raise DomainError(f"frequency {frequency} Hz not below Nyquist {spec.nyquist} Hz")
    return int(round(frequency / spec.bin_width))


def peak_heights(spec: PowerSpectrum, frequencies: Iterable[float], tolerance_bins: int = 1) -> Dict[float, float]:
    """Largest power within ``tolerance_bins`` of each requested frequency's bin."""
    out = {}
    for f in frequencies:
        k = _nearest_bin(spec, f)
        lo, hi = max(0, k - tolerance_bins), min(spec.powers.size, k + tolerance_bins + 1)
        out[f] = float(np.max(spec.powers[lo:hi]))
    return out


def masked_band(spec: PowerSpectrum, band: Band, exclude: Sequence[float] = (), exclusion_halfwidth: float = 0.0) -> np.ndarray:
    """Boolean bin mask for ``band`` minus ``+-exclusion_halfwidth`` around each excluded line."""
    band.check(spec.nyquist)
    mask = spec.band_mask(band)
    f = spec.frequencies
    for line in exclude:
        mask &= ~(np.abs(f - line) <= exclusion_halfwidth)
    return mask


def dominant_peak(
    spec: PowerSpectrum,
    band: Band,
    exclude: Sequence[float] = (),
    exclusion_halfwidth: float = 0.0,
) -> float:
    """Frequency of the strongest unmasked bin in ``band``; ties go to the lowest."""
    mask = masked_band(spec, band, exclude, exclusion_halfwidth)
    if not mask.any():
        raise DomainError("band is empty after masking")
    idx = np.flatnonzero(mask)
    # argmax returns the first maximum, i.e. the lowest frequency on ties
    best = idx[int(np.argmax(spec.powers[idx]))]
    return float(best * spec.bin_width)


def masked_median(spec: PowerSpectrum, band: Band, exclude: Sequence[float] = (), exclusion_halfwidth: float = 0.0) -> float:
    mask = masked_band(spec, band, exclude, exclusion_halfwidth)
    if not mask.any():
        raise DomainError("band is empty after masking")
    return float(np.median(spec.powers[mask]))


def analyze_series(
    ts: TimeSeries,
    window: str = "hann",
    band: Optional[Band] = None,
    normalize: bool = False,
) -> PowerSpectrum:
    """Window, transform and optionally band-normalise a series."""
    spec = power_spectrum(apply_window(ts, window))
    if normalize:
        if band is None:
            raise DomainError("normalisation needs a band")
        spec = band_normalize(spec, band)
    return spec
