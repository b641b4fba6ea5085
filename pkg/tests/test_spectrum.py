import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nestedmzi.errors import DegenerateError, DomainError
from nestedmzi.model import SetupParams, build_danan_setup
from nestedmzi.spectrum import (
    Band,
    DisturbanceSpec,
    PowerSpectrum,
    SamplingSpec,
    TimeSeries,
    Tone,
    analyze_series,
    band_normalize,
    dominant_peak,
    fft_radix2,
    masked_band,
    masked_median,
    peak_heights,
    power_spectrum,
    simulate_time_series,
    window_coefficients,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def _naive_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


@pytest.mark.parametrize("n", [1, 2, 4, 8, 64, 256])
def test_fft_matches_naive_dft(n):
    x = np.random.default_rng(n).standard_normal(n) + 0.5j
    assert np.allclose(fft_radix2(x), _naive_dft(x), rtol=0, atol=1e-10 * n)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(DomainError):
        fft_radix2(np.ones(12))


@settings(max_examples=30, deadline=None)
@given(
    x=arrays(float, 64, elements=finite),
    y=arrays(float, 64, elements=finite),
    a=st.floats(-10, 10), b=st.floats(-10, 10),
)
def test_fft_is_linear(x, y, a, b):
    lhs = fft_radix2(a * x + b * y)
    rhs = a * fft_radix2(x) + b * fft_radix2(y)
    scale = 1.0 + np.max(np.abs(lhs)) + np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * scale


@settings(max_examples=50, deadline=None)
@given(x=st.integers(3, 10).flatmap(lambda e: arrays(float, 2 ** e, elements=finite)))
def test_parseval(x):
    spec = power_spectrum(TimeSeries(100.0, x))
    energy = float(np.sum(x * x))
    assert spec.powers.sum() == pytest.approx(energy, rel=1e-9, abs=1e-9)


def test_bin_centred_tone_rectangular_power():
    n, k0, amp = 256, 20, 3.0
    x = amp * np.sin(2 * np.pi * k0 * np.arange(n) / n)
    spec = power_spectrum(TimeSeries(256.0, x))
    assert spec.powers[k0] == pytest.approx(amp ** 2 * n / 2, rel=1e-12)
    others = np.delete(spec.powers, k0)
    assert np.max(others) < 1e-18 * spec.powers[k0]


@pytest.mark.parametrize("n", [16, 255, 4096])
def test_hann_power_sum(n):
    # sum of squared symmetric Hann coefficients is exactly 3 (n - 1) / 8
    w = window_coefficients(n, "hann")
    assert np.sum(w * w) == pytest.approx(3 * (n - 1) / 8, rel=1e-12)
    assert w[0] == 0.0 and w[-1] == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(w, w[::-1])


def test_zero_padding_is_flagged():
    spec = power_spectrum(TimeSeries(100.0, np.ones(100)))
    assert spec.padded and spec.powers.size == 65
    assert spec.bin_width == pytest.approx(100.0 / 128)
    assert not power_spectrum(TimeSeries(100.0, np.ones(128))).padded


def test_band_validation():
    with pytest.raises(DomainError):
        Band(10.0, 5.0)
    with pytest.raises(DomainError):
        Band(10.0, 600.0).check(512.0)
    assert str(Band(270, 340)) == "270:340"


def test_band_normalize_integrates_to_one_and_is_idempotent():
    x = np.random.default_rng(1).standard_normal(1024)
    spec = power_spectrum(TimeSeries(1024.0, x))
    band = Band(100.0, 200.0)
    norm = band_normalize(spec, band)
    assert norm.band_integral(band) == pytest.approx(1.0, rel=1e-12)
    assert band_normalize(norm, band) is norm
    with pytest.raises(DegenerateError):
        band_normalize(power_spectrum(TimeSeries(1024.0, np.zeros(1024))), band)


def _flat(values, bin_width=1.0):
    return PowerSpectrum(bin_width, np.asarray(values, dtype=float))


def test_dominant_peak_ties_and_exclusions():
    p = np.zeros(65)
    p[10] = p[20] = 5.0
    p[30] = 9.0
    spec = _flat(p)
    band = Band(0.0, 40.0)
    assert dominant_peak(spec, band) == 30.0
    assert dominant_peak(spec, band, exclude=[30.0], exclusion_halfwidth=1.0) == 10.0
    with pytest.raises(DomainError):
        dominant_peak(spec, Band(5.0, 6.0), exclude=[5.5], exclusion_halfwidth=2.0)


def test_masked_median_and_peaks():
    p = np.arange(65, dtype=float)
    spec = _flat(p)
    band = Band(10.0, 20.0)
    assert masked_band(spec, band).sum() == 11
    assert masked_median(spec, band) == 15.0
    assert masked_median(spec, band, exclude=[20.0], exclusion_halfwidth=2.0) == 13.5
    assert peak_heights(spec, [12.0], tolerance_bins=1)[12.0] == 13.0
    assert peak_heights(spec, [12.0], tolerance_bins=0)[12.0] == 12.0


def test_sampling_problems():
    assert SamplingSpec().problems(332.0) == []
    assert SamplingSpec(sample_rate=600.0, duration=1.0).problems(332.0)
    assert SamplingSpec(sample_rate=1000.0, duration=1.0).problems(100.0)
    assert SamplingSpec(window="blackman").problems(0.0)


def test_simulation_rejects_aliasing():
    g = build_danan_setup("nested-2b")
    with pytest.raises(DomainError):
        simulate_time_series(g, SamplingSpec(512.0, 1.0))


def test_tone_scales_with_mean_total_power():
    g = build_danan_setup("two-path", SetupParams().with_mirror("E", enabled=False).with_mirror("C", enabled=False))
    sampling = SamplingSpec(1024.0, 0.25)
    quiet = simulate_time_series(g, sampling)
    loud = simulate_time_series(g, sampling, DisturbanceSpec((Tone(100.0, 1e-3),)))
    extra = loud.samples - quiet.samples
    # both paths interfere constructively at rest: total power is w sqrt(pi/2)
    total = 1e-3 * math.sqrt(math.pi / 2)
    t = np.arange(256) / 1024.0
    assert np.allclose(extra, total * 1e-3 * np.sin(2 * np.pi * 100.0 * t), rtol=0, atol=1e-12 * total)


def test_noise_is_seeded():
    g = build_danan_setup("two-path")
    sampling = SamplingSpec(1024.0, 0.25)
    a = simulate_time_series(g, sampling, DisturbanceSpec(noise_sigma=1e-4, seed=3))
    b = simulate_time_series(g, sampling, DisturbanceSpec(noise_sigma=1e-4, seed=3))
    c = simulate_time_series(g, sampling, DisturbanceSpec(noise_sigma=1e-4, seed=4))
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_nested_spectrum_has_peaks_at_driven_mirrors():
    g = build_danan_setup("nested-2b")
    spec = analyze_series(simulate_time_series(g, SamplingSpec(1024.0, 1.0)), "hann")
    band = Band(270.0, 340.0)
    median = masked_median(spec, band)
    heights = peak_heights(spec, [288.0, 298.0, 318.0, 275.0])
    assert min(heights[f] for f in (288.0, 298.0, 318.0)) > 1e3 * median
    assert heights[275.0] < 10 * median


def test_normalisation_needs_band():
    with pytest.raises(DomainError):
        analyze_series(TimeSeries(1.0, np.ones(8)), "hann", None, True)


def test_time_series_rejects_non_finite():
    with pytest.raises(DomainError):
        TimeSeries(1.0, np.array([1.0, np.nan]))


def test_c_peak_power_is_quadratic_in_c_amplitude():
    sampling = SamplingSpec(1024.0, 1.0)
    powers = []
    amplitudes = (1e-9, 1e-8)
    for a in amplitudes:
        g = build_danan_setup("nested-2b", SetupParams().with_mirror("C", piezo_amplitude=a))
        spec = analyze_series(simulate_time_series(g, sampling), "hann")
        powers.append(peak_heights(spec, [318.0])[318.0])
    assert powers[1] / powers[0] == pytest.approx(100.0, rel=0.01)
