"""Command line entry point: ``nestedmzi run | tsvf | calibrate | analyze``.

Exit codes: 0 success, 1 validation or parse failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Optional, Sequence

from . import __version__
from .artifacts import (
    manifest_text,
    quantize,
    read_timeseries,
    series_from_columns,
    sha256_file,
    spectrum_csv,
    spectrum_svg,
    timeseries_csv,
    write_text,
)
from .detector import calibrate_misalignment, visibility
from .errors import NestedMZIError
from .model import ScenarioVariant, big_loop_reference, mirror_frequencies
from .scenario import ScenarioConfig, format_scenario, load_scenario, parse_band
from .spectrum import (
    Band,
    PowerSpectrum,
    TimeSeries,
    analyze_series,
    dominant_peak,
    simulate_time_series,
)
from .tsvf import AgreementReport, OverlapReport, compare_predictions, format_report, overlap_set

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


@dataclass
class RunResult:
    manifest: Dict[str, str]
    series: TimeSeries
    spectrum: PowerSpectrum
    overlap: OverlapReport
    agreement: AgreementReport


def calibration_graph(cfg: ScenarioConfig):
    """Graph whose fringe contrast is the big-loop visibility of ``cfg``."""
    if cfg.variant is ScenarioVariant.TwoPathAligned:
        return cfg.graph()
    return big_loop_reference(cfg.params)


def calibrate_config(cfg: ScenarioConfig, target_visibility: float):
    """Return ``(offset, achieved_visibility, updated_config)``."""
    graph = calibration_graph(cfg)
    offset = calibrate_misalignment(graph, target_visibility)
    achieved = visibility(graph.with_segment(graph.leak_segment, transverse_offset=offset))
    updated = replace(
        cfg,
        params=replace(cfg.params, leak_offset=offset),
        target_visibility=target_visibility,
    )
    return offset, achieved, updated


def _spectrum_of(ts: TimeSeries, cfg: ScenarioConfig) -> PowerSpectrum:
    return analyze_series(ts, cfg.sampling.window, cfg.band, cfg.normalize)


def run_scenario(cfg: ScenarioConfig, out_dir, seed: Optional[int] = None, svg: Optional[bool] = None) -> RunResult:
    """Simulate, analyse and write every artifact of one scenario run."""
    if seed is not None:
        cfg = replace(cfg, disturbances=replace(cfg.disturbances, seed=seed))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph = cfg.graph()

    raw = simulate_time_series(graph, cfg.sampling, cfg.disturbances)
    # analyse exactly what lands in the CSV so `analyze` reproduces it byte for byte
    series = series_from_columns(quantize(raw.times), raw.samples)
    spec = _spectrum_of(series, cfg)
    freqs = mirror_frequencies(graph)
    overlap = overlap_set(graph)
    agreement = compare_predictions(
        overlap, spec, freqs, cfg.band, cfg.threshold_db,
        cfg.exclude, cfg.exclusion_halfwidth, cfg.tolerance_bins,
    )

    files = {
        "timeseries.csv": timeseries_csv(series),
        "spectrum.csv": spectrum_csv(spec),
        "tsvf_report.txt": format_report(graph, overlap, agreement),
    }
    if cfg.svg if svg is None else svg:
        files["spectrum.svg"] = spectrum_svg(
            spec, cfg.band, {str(m): f for m, f in freqs.items()},
            title=f"{cfg.variant.value} quad-cell spectrum",
        )
    for name, text in files.items():
        write_text(out / name, text)
    checksums = {name: sha256_file(out / name) for name in files}
    scenario_text = format_scenario(cfg)
    inputs = {
        "variant": cfg.variant.value,
        "seed": str(cfg.disturbances.seed),
        "sample_rate_hz": repr(cfg.sampling.sample_rate),
        "samples": str(len(series)),
        "band_hz": str(cfg.band),
        "normalized": str(cfg.normalize).lower(),
        "dominant_peak_hz": repr(dominant_peak(spec, cfg.band, cfg.exclude, cfg.exclusion_halfwidth)),
    }
    write_text(out / "manifest.txt", manifest_text(inputs, checksums, scenario_text))
    return RunResult(checksums, series, spec, overlap, agreement)


def analyze(
    csv_path,
    band: Band,
    normalize: bool = False,
    exclusions: Sequence[float] = (),
    exclusion_halfwidth: float = 2.0,
    window: str = "hann",
    out_dir=None,
    svg: bool = False,
):
    """Spectrum of an external ``t_seconds,signal`` CSV; writes spectrum.csv (and SVG)."""
    ts = read_timeseries(csv_path)
    spec = analyze_series(ts, window, band, normalize)
    out = Path(out_dir) if out_dir is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "spectrum.csv", spectrum_csv(spec))
    if svg:
        write_text(out / "spectrum.svg", spectrum_svg(spec, band, title="quad-cell spectrum"))
    peak = dominant_peak(spec, band, exclusions, exclusion_halfwidth)
    return spec, peak


def _cmd_run(args) -> int:
    cfg = load_scenario(args.scenario)
    result = run_scenario(cfg, args.out, seed=args.seed, svg=True if args.svg else None)
    print(f"wrote {', '.join(sorted(result.manifest))} and manifest.txt to {args.out}")
    print("TSVF overlap set: {" + ", ".join(sorted(map(str, result.overlap.overlap_set))) + "}")
    print("detected peaks:   {" + ", ".join(sorted(map(str, result.agreement.detected))) + "}")
    if result.agreement.disagreements:
        print("disagreements:    {" + ", ".join(map(str, result.agreement.disagreements)) + "}")
    return EXIT_OK


def _cmd_tsvf(args) -> int:
    cfg = load_scenario(args.scenario)
    graph = cfg.graph()
    sys.stdout.write(format_report(graph, overlap_set(graph, args.threshold)))
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    cfg = load_scenario(args.scenario)
    offset, achieved, updated = calibrate_config(cfg, args.visibility)
    w = cfg.params.beam_waist
    print(f"leak_offset = {offset!r} m  ({offset / w:.6f} beam waists)")
    print(f"visibility = {achieved:.9f}")
    if args.write:
        write_text(args.write, format_scenario(updated))
        print(f"updated scenario written to {args.write}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    band = parse_band(args.band)
    exclusions = [float(x) for x in args.exclude.split(",") if x.strip()] if args.exclude else []
    spec, peak = analyze(
        args.csv, band, args.normalize, exclusions, args.halfwidth,
        args.window, args.out, args.svg,
    )
    print(f"bins = {spec.powers.size}, bin_width = {spec.bin_width:g} Hz")
    if spec.normalized_band is not None:
        print(f"normalized over {spec.normalized_band} Hz")
    print(f"dominant_peak = {peak:g} Hz")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors are parse failures, not I/O failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="nestedmzi",
        description="Nested Mach-Zehnder quad-cell simulator with a two-state-vector comparison.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write CSV/SVG artifacts")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("tsvf", help="forward/backward states, overlap set and weak values")
    p.add_argument("--scenario", required=True)
    p.add_argument("--threshold", type=float, default=1e-9)
    p.set_defaults(func=_cmd_tsvf)

    p = sub.add_parser("calibrate", help="static leak offset for a target big-loop visibility")
    p.add_argument("--scenario", required=True)
    p.add_argument("--visibility", type=float, required=True)
    p.add_argument("--write", help="write the updated scenario to this file")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("analyze", help="power spectrum of an external time-series CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--band", required=True, help="low:high in Hz")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--exclude", help="comma-separated lines to mask, in Hz")
    p.add_argument("--halfwidth", type=float, default=2.0, help="exclusion half-width in Hz")
    p.add_argument("--window", choices=("hann", "rectangular"), default="hann")
    p.add_argument("--out", default=".")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=_cmd_analyze)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NestedMZIError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
