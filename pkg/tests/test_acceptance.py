"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned here and nowhere else.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from nestedmzi.artifacts import quantize, series_from_columns
from nestedmzi.beams import PathContribution, displacement_at_distance, tilt_from_piezo
from nestedmzi.cli import calibration_graph, main
from nestedmzi.detector import (
    QuadratureSpec,
    calibrate_misalignment,
    closed_form_single_gaussian,
    qcd_difference_signal,
    visibility,
)
from nestedmzi.errors import IllConditionedWeakValue
from nestedmzi.model import MirrorId, ScenarioVariant, build_danan_setup, mirror_frequencies
from nestedmzi.scenario import load_scenario
from nestedmzi.spectrum import (
    TimeSeries,
    analyze_series,
    dominant_peak,
    fft_radix2,
    masked_median,
    peak_heights,
    power_spectrum,
    simulate_time_series,
)
from nestedmzi.tsvf import compare_predictions, overlap_set, weak_value

LEVER_REL_TOL = 1e-12
STRONG_DB = 30.0
WEAK_DB = 6.0
VIS_TARGET, VIS_TOL = 0.95, 0.005
E_MARGIN_DB = 6.0
FFT_REL_TOL = 1e-9
PARSEVAL_REL_TOL = 1e-9
QUAD_REL_TOL = 1e-9
BISECT_TOL = 1e-6
SLOPE, SLOPE_TOL = 2.0, 0.02
SCENARIO_SECONDS = 10.0
ORACLE_SECONDS = 30.0


def _db(ratio):
    return 10.0 * math.log10(ratio)


def _simulate(cfg):
    raw = simulate_time_series(cfg.graph(), cfg.sampling, cfg.disturbances)
    series = series_from_columns(quantize(raw.times), raw.samples)
    return analyze_series(series, cfg.sampling.window, cfg.band, cfg.normalize)


@pytest.fixture(scope="module")
def blocked_run():
    cfg = load_scenario("blocked-2c")
    start = time.perf_counter()
    spec = _simulate(cfg)
    return cfg, spec, time.perf_counter() - start


def test_criterion_1_lever_arm(record_criterion):
    tilt = tilt_from_piezo(10e-9, 1e-2)
    disp = displacement_at_distance(tilt, 0.10, 1)
    rel = abs(disp - 100e-9) / 100e-9
    ok = rel < LEVER_REL_TOL
    record_criterion(1, ok, f"displacement {disp:.15e} m, relative error {rel:.2e} (< {LEVER_REL_TOL:g})")
    assert ok


def test_criterion_2_three_peaks(record_criterion):
    cfg = load_scenario("nested-2b")
    start = time.perf_counter()
    spec = _simulate(cfg)
    elapsed = time.perf_counter() - start
    median = masked_median(spec, cfg.band, cfg.exclude, cfg.exclusion_halfwidth)
    freqs = mirror_frequencies(cfg.graph())
    heights = peak_heights(spec, freqs.values(), cfg.tolerance_bins)
    level = {m: _db(heights[f] / median) if heights[f] > 0 else -math.inf for m, f in freqs.items()}
    strong = all(level[m] >= STRONG_DB for m in (MirrorId.A, MirrorId.B, MirrorId.C))
    weak = all(level[m] <= WEAK_DB for m in (MirrorId.E, MirrorId.F))
    ok = strong and weak and elapsed <= SCENARIO_SECONDS
    detail = ", ".join(f"{m}={level[m]:+.1f} dB" for m in sorted(level, key=str))
    record_criterion(2, ok, f"{detail} vs masked median; {elapsed:.2f} s")
    assert ok


def test_criterion_3_blocked_arm_dominant_e(record_criterion, blocked_run):
    cfg, spec, elapsed = blocked_run
    ref = calibration_graph(cfg)
    vis = visibility(ref.with_segment(ref.leak_segment, transverse_offset=cfg.params.leak_offset))
    peak = dominant_peak(spec, cfg.band, cfg.exclude, cfg.exclusion_halfwidth)
    freqs = mirror_frequencies(cfg.graph())
    heights = peak_heights(spec, freqs.values(), cfg.tolerance_bins)
    e_over_a = _db(heights[freqs[MirrorId.E]] / heights[freqs[MirrorId.A]])
    e_over_b = _db(heights[freqs[MirrorId.E]] / heights[freqs[MirrorId.B]])
    ok = (
        abs(vis - VIS_TARGET) <= VIS_TOL
        and spec.normalized_band == cfg.band
        and set(cfg.exclude) == {280.0, 310.0}
        and abs(peak - freqs[MirrorId.E]) <= spec.bin_width * cfg.tolerance_bins
        and e_over_a >= E_MARGIN_DB
        and e_over_b >= E_MARGIN_DB
        and elapsed <= SCENARIO_SECONDS
    )
    record_criterion(
        3, ok,
        f"visibility {vis:.4f}, dominant {peak:g} Hz, E-A {e_over_a:.2f} dB, E-B {e_over_b:.2f} dB; {elapsed:.2f} s",
    )
    assert ok


def test_criterion_4_tsvf_sets(record_criterion, blocked_run):
    cfg, spec, _ = blocked_run
    nested = overlap_set(build_danan_setup(ScenarioVariant.NestedTuned2b)).overlap_set
    blocked_graph = cfg.graph()
    report = overlap_set(blocked_graph)
    try:
        weak_value(blocked_graph, MirrorId.C)
        raised = False
    except IllConditionedWeakValue:
        raised = True
    agreement = compare_predictions(
        report, spec, mirror_frequencies(blocked_graph), cfg.band,
        cfg.threshold_db, cfg.exclude, cfg.exclusion_halfwidth, cfg.tolerance_bins,
    )
    flagged = set(agreement.disagreements)
    core = {MirrorId.A, MirrorId.B, MirrorId.C}
    ok = (
        nested == {MirrorId.A, MirrorId.B, MirrorId.C}
        and report.overlap_set == {MirrorId.A, MirrorId.B}
        and raised
        and MirrorId.E in flagged
        and not flagged & core
    )

    def name(s):
        return "{" + ",".join(sorted(map(str, s))) + "}"

    record_criterion(
        4, ok,
        f"2b {name(nested)}, 2c {name(report.overlap_set)}, weak value raises={raised}, disagreements {name(flagged)}",
    )
    assert ok


def _naive_dft(x):
    n = x.size
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def test_criterion_5_numerical_oracles(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(12345)
    fft_err = 0.0
    for n in (256, 512, 1024):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ref = _naive_dft(x)
        fft_err = max(fft_err, np.max(np.abs(fft_radix2(x) - ref)) / np.max(np.abs(ref)))

    parseval_err = 0.0
    for _ in range(100):
        n = int(rng.choice([256, 512, 1024]))
        x = rng.standard_normal(n) * rng.uniform(0.1, 10.0)
        spec = power_spectrum(TimeSeries(1000.0, x))
        energy = float(np.sum(x * x))
        parseval_err = max(parseval_err, abs(spec.powers.sum() - energy) / energy)

    w = 1e-3
    quad_err = 0.0
    for ratio in (0.0, 0.1, 0.5, 1.0, 2.0):
        got = qcd_difference_signal([PathContribution(1.0, ratio * w, 0.0, ())], w, QuadratureSpec())
        exact = closed_form_single_gaussian(ratio * w, w)
        scale = abs(exact.difference) if ratio else exact.total
        quad_err = max(
            quad_err,
            abs(got.difference - exact.difference) / scale,
            abs(got.total - exact.total) / exact.total,
        )

    graph = build_danan_setup(ScenarioVariant.TwoPathAligned)
    target = 0.9
    offset = calibrate_misalignment(graph, target)
    bisect_err = abs(visibility(graph.with_segment(graph.leak_segment, transverse_offset=offset)) - target)

    elapsed = time.perf_counter() - start
    ok = (
        fft_err <= FFT_REL_TOL
        and parseval_err <= PARSEVAL_REL_TOL
        and quad_err <= QUAD_REL_TOL
        and bisect_err <= BISECT_TOL
        and elapsed <= ORACLE_SECONDS
    )
    record_criterion(
        5, ok,
        f"fft {fft_err:.1e}, parseval {parseval_err:.1e}, quadrature {quad_err:.1e}, "
        f"bisection {bisect_err:.1e}; {elapsed:.2f} s",
    )
    assert ok


def test_criterion_6_quadratic_scaling(record_criterion):
    cfg = load_scenario("nested-2b")
    f_c = cfg.params.mirrors[MirrorId.C].frequency
    amplitudes = np.logspace(-9, -8, 4)
    powers = []
    for a in amplitudes:
        params = cfg.params
        for m in params.mirrors:
            params = params.with_mirror(m, piezo_amplitude=float(a))
        run = replace(cfg, params=params, normalize=False)
        powers.append(peak_heights(_simulate(run), [f_c], cfg.tolerance_bins)[f_c])
    slope = float(np.polyfit(np.log10(amplitudes), np.log10(powers), 1)[0])
    ok = abs(slope - SLOPE) <= SLOPE_TOL
    record_criterion(6, ok, f"log-log slope {slope:.4f} over 1-10 nm (target {SLOPE} +- {SLOPE_TOL})")
    assert ok


def test_criterion_7_determinism(record_criterion, tmp_path):
    outs = [tmp_path / "first", tmp_path / "second"]
    codes = [main(["run", "--scenario", "blocked-2c", "--out", str(o), "--seed", "7"]) for o in outs]
    same = {
        name: (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        for name in ("timeseries.csv", "spectrum.csv")
    }
    ok = codes == [0, 0] and all(same.values())
    record_criterion(7, ok, ", ".join(f"{k} {'identical' if v else 'differs'}" for k, v in same.items()))
    assert ok
