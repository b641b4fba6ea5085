"""CSV, SVG and manifest writers for run artifacts.

CSV values use lowercase scientific notation with 12 significant digits and
LF line endings, so files are byte-stable across runs.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .spectrum import Band, PowerSpectrum, TimeSeries


class CsvFormatError(DomainError):
    pass


def fmt12(x: float) -> str:
    return format(float(x), ".11e")


def quantize(values) -> np.ndarray:
    """Round to exactly what a 12-significant-digit CSV cell holds."""
    return np.array([float(fmt12(v)) for v in np.asarray(values, dtype=float)])


def csv_text(header: Sequence[str], columns: Sequence[Sequence[float]]) -> str:
    rows = [",".join(header)]
    for row in zip(*columns):
        rows.append(",".join(fmt12(v) for v in row))
    return "\n".join(rows) + "\n"


def read_csv(path, expected_header: Sequence[str]) -> List[np.ndarray]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CsvFormatError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if header != list(expected_header):
        raise CsvFormatError(f"{path}: expected header {','.join(expected_header)}, got {lines[0]!r}")
    cols: List[List[float]] = [[] for _ in header]
    for i, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != len(header):
            raise CsvFormatError(f"{path} line {i}: expected {len(header)} fields, got {len(cells)}")
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise CsvFormatError(f"{path} line {i}: non-numeric field") from None
        if not all(math.isfinite(v) for v in vals):
            raise CsvFormatError(f"{path} line {i}: non-finite field")
        for col, v in zip(cols, vals):
            col.append(v)
    if not cols[0]:
        raise CsvFormatError(f"{path}: no data rows")
    return [np.array(c) for c in cols]


def timeseries_csv(ts: TimeSeries) -> str:
    return csv_text(("t_seconds", "signal"), (ts.times, ts.samples))


def spectrum_csv(spec: PowerSpectrum) -> str:
    return csv_text(("frequency_hz", "power"), (spec.frequencies, spec.powers))


def series_from_columns(t, x) -> TimeSeries:
    """Rebuild a uniformly sampled series from its CSV columns.

    The sample rate is inferred from the time span and rounded to ten
    significant digits, which absorbs the 12-digit rounding of the times.
    """
    t = np.asarray(t, dtype=float)
    if t.size < 2:
        raise CsvFormatError("need at least two samples to infer the sample rate")
    span = t[-1] - t[0]
    if not span > 0:
        raise CsvFormatError("time column must be increasing")
    rate = float(format((t.size - 1) / span, ".9e"))
    steps = np.diff(t)
    if np.max(np.abs(steps * rate - 1.0)) > 1e-6:
        raise CsvFormatError("time column is not uniformly sampled")
    return TimeSeries(rate, quantize(x))


def read_timeseries(path) -> TimeSeries:
    t, x = read_csv(path, ("t_seconds", "signal"))
    return series_from_columns(t, x)


def read_spectrum(path) -> Tuple[np.ndarray, np.ndarray]:
    f, p = read_csv(path, ("frequency_hz", "power"))
    return f, p


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def spectrum_svg(
    spec: PowerSpectrum,
    band: Optional[Band] = None,
    markers: Optional[Dict[str, float]] = None,
    title: str = "power spectrum",
) -> str:
    """Minimal 800x500 SVG line plot of the spectrum in dB."""
    width, height = 800, 500
    left, right, top, bottom = 70, 20, 40, 50
    f = spec.frequencies
    p = spec.powers
    if band is not None:
        sel = (f >= band.low) & (f <= band.high)
        f, p = f[sel], p[sel]
    positive = p[p > 0]
    floor = float(np.max(positive)) * 1e-16 if positive.size else 1.0
    db = 10.0 * np.log10(np.maximum(p, floor))
    x0, x1 = float(f[0]), float(f[-1]) if f.size > 1 else float(f[0]) + 1.0
    y0, y1 = float(np.min(db)), float(np.max(db))
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 1.0, y1 + 1.0

    def sx(v):
        return left + (v - x0) / (x1 - x0) * (width - left - right)

    def sy(v):
        return height - bottom - (v - y0) / (y1 - y0) * (height - top - bottom)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
    ]
    for i in range(6):
        fv = x0 + (x1 - x0) * i / 5
        parts.append(f'<line x1="{sx(fv):.2f}" y1="{height - bottom}" x2="{sx(fv):.2f}" y2="{height - bottom + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx(fv):.2f}" y="{height - bottom + 20}" font-family="sans-serif" font-size="12" text-anchor="middle">{fv:.1f}</text>')
        dv = y0 + (y1 - y0) * i / 5
        parts.append(f'<line x1="{left - 5}" y1="{sy(dv):.2f}" x2="{left}" y2="{sy(dv):.2f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{sy(dv) + 4:.2f}" font-family="sans-serif" font-size="12" text-anchor="end">{dv:.0f}</text>')
    parts.append(f'<text x="{width / 2:.1f}" y="{height - 10}" font-family="sans-serif" font-size="13" text-anchor="middle">frequency (Hz)</text>')
    parts.append(f'<text x="16" y="{height / 2:.1f}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {height / 2:.1f})">power (dB)</text>')
    for label, fm in sorted((markers or {}).items()):
        if x0 <= fm <= x1:
            parts.append(f'<line x1="{sx(fm):.2f}" y1="{top}" x2="{sx(fm):.2f}" y2="{height - bottom}" stroke="#bbbbbb" stroke-dasharray="4 4"/>')
            parts.append(f'<text x="{sx(fm):.2f}" y="{top + 12}" font-family="sans-serif" font-size="12" text-anchor="middle">{label}</text>')
    points = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(f, db))
    parts.append(f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.2" points="{points}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def manifest_text(inputs: Dict[str, str], artifacts: Dict[str, str], scenario_text: str) -> str:
    lines = ["# nestedmzi run manifest"]
    for key in sorted(inputs):
        lines.append(f"{key} = {inputs[key]}")
    lines.append("")
    lines.append("# artifacts (sha256)")
    for name in sorted(artifacts):
        lines.append(f"{artifacts[name]}  {name}")
    lines.append("")
    lines.append("# scenario echo")
    lines += [f"| {ln}" if ln else "|" for ln in scenario_text.splitlines()]
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> Dict[str, str]:
    """Artifact name -> checksum from a manifest."""
    out = {}
    section = None
    for ln in text.splitlines():
        if ln.startswith("# "):
            section = ln
            continue
        if section == "# artifacts (sha256)" and ln.strip():
            digest, name = ln.split(None, 1)
            out[name.strip()] = digest
    return out
