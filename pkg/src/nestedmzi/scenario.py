"""Scenario files: a small line-based ``[section]`` / ``key = value`` format.

Example::

    variant = blocked-2c

    [misalignment]
    leak_offset = 1.05 mm     # calibrated, see `nestedmzi calibrate`

    [mirror E]
    frequency = 275 Hz

    [analysis]
    band = 270:340

Quantities accept SI suffixes (``nm um mm cm m``, ``Hz kHz``, ``s ms``,
``rad mrad urad deg``); bare numbers are read in base SI units.  Anything
not given takes the built-in default.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import ScenarioError, ValidationError
from .model import (
    LENGTH_FIELDS,
    MirrorId,
    ScenarioVariant,
    SetupParams,
    build_danan_setup,
)
from .spectrum import WINDOWS, Band, DisturbanceSpec, SamplingSpec, Tone

UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "frequency": {"Hz": 1.0, "kHz": 1e3},
    "time": {"s": 1.0, "ms": 1e-3},
    "angle": {"rad": 1.0, "mrad": 1e-3, "urad": 1e-6, "deg": math.pi / 180.0},
    "unitless": {},
}
BASE_UNIT = {"length": "m", "frequency": "Hz", "time": "s", "angle": "rad", "unitless": ""}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d].*)?$")


@dataclass(frozen=True)
class ScenarioConfig:
    variant: ScenarioVariant = ScenarioVariant.NestedTuned2b
    params: SetupParams = field(default_factory=SetupParams)
    sampling: SamplingSpec = SamplingSpec()
    disturbances: DisturbanceSpec = DisturbanceSpec()
    band: Band = Band(270.0, 340.0)
    normalize: bool = False
    exclude: Tuple[float, ...] = ()
    exclusion_halfwidth: float = 2.0
    threshold_db: float = 20.0
    tolerance_bins: int = 1
    target_visibility: Optional[float] = None
    svg: bool = False

    def graph(self):
        return build_danan_setup(self.variant, self.params)


def _quantity(text: str, dimension: str, line: int) -> float:
    m = _NUMBER.match(text)
    if not m:
        raise ScenarioError(f"cannot parse number {text.strip()!r}", line)
    value = float(m.group(1))
    unit = (m.group(2) or "").strip()
    if unit:
        table = UNITS[dimension]
        if unit not in table:
            raise ScenarioError(f"unit {unit!r} not valid for a {dimension} value", line)
        value *= table[unit]
    return value


def _bool(text: str, line: int) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ScenarioError(f"expected a boolean, got {text.strip()!r}", line)


def _int(text: str, line: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ScenarioError(f"expected an integer, got {text.strip()!r}", line) from None


def _band(text: str, line: int) -> Band:
    parts = text.split(":")
    if len(parts) != 2:
        raise ScenarioError(f"band must look like low:high, got {text.strip()!r}", line)
    lo = _quantity(parts[0], "frequency", line)
    hi = _quantity(parts[1], "frequency", line)
    if not 0 <= lo < hi:
        raise ScenarioError(f"band needs 0 <= low < high, got {text.strip()}", line)
    return Band(lo, hi)


def parse_band(text: str) -> Band:
    return _band(text, None)


def _check(cond: bool, message: str, line: int):
    if not cond:
        raise ScenarioError(message, line)


# (dimension, constraint, message) for plain numeric keys
_GEOMETRY_KEYS = {name: ("length", lambda v: v >= 0, "must be >= 0") for name in LENGTH_FIELDS}
_GEOMETRY_KEYS.update({
    "beam_waist": ("length", lambda v: v > 0, "must be > 0"),
    "deflection_factor": ("unitless", lambda v: v in (1, 2), "must be 1 or 2"),
    "inner_phase": ("angle", lambda v: True, ""),
})
_MIRROR_KEYS = {
    "frequency": ("frequency", lambda v: v > 0, "must be > 0"),
    "amplitude": ("length", lambda v: v >= 0, "must be >= 0"),
    "pivot_offset": ("length", lambda v: v > 0, "must be > 0"),
    "static_tilt": ("angle", lambda v: True, ""),
    "phase": ("angle", lambda v: True, ""),
}
_MIRROR_FIELD = {
    "frequency": "frequency", "amplitude": "piezo_amplitude", "pivot_offset": "pivot_offset",
    "static_tilt": "static_tilt", "phase": "oscillation_phase", "enabled": "enabled",
}


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse scenario text into a validated :class:`ScenarioConfig`.

    Raises ScenarioError (with the line number where possible) on syntax
    errors, unknown sections or keys, duplicates and out-of-range values.
    """
    section = ""
    seen_sections = {"": 0}
    seen_keys = set()
    top: Dict[str, object] = {}
    geometry: Dict[str, object] = {}
    mirrors: Dict[MirrorId, Dict[str, object]] = {}
    freq_lines: Dict[float, int] = {}
    sampling: Dict[str, object] = {}
    tones: List[Tone] = []
    dist: Dict[str, object] = {}
    analysis: Dict[str, object] = {}
    output: Dict[str, object] = {}
    mirror: Optional[MirrorId] = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(f"malformed section header {line!r}", lineno)
            section = " ".join(line[1:-1].split())
            if section in seen_sections:
                raise ScenarioError(
                    f"duplicate section [{section}] (first at line {seen_sections[section]})", lineno
                )
            seen_sections[section] = lineno
            mirror = None
            if section.startswith("mirror "):
                label = section.split(" ", 1)[1]
                try:
                    mirror = MirrorId(label)
                except ValueError:
                    raise ScenarioError(f"unknown mirror id {label!r}", lineno) from None
                mirrors[mirror] = {}
            elif section not in ("geometry", "misalignment", "sampling", "disturbances", "analysis", "output"):
                raise ScenarioError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ScenarioError(f"empty key or value in {line!r}", lineno)
        if not (section == "disturbances" and key == "tone"):
            if (section, key) in seen_keys:
                raise ScenarioError(f"duplicate key {key!r} in [{section or 'top level'}]", lineno)
            seen_keys.add((section, key))

        if section == "":
            if key == "variant":
                try:
                    top["variant"] = ScenarioVariant.parse(value)
                except ValueError:
                    raise ScenarioError(f"unknown variant {value!r}", lineno) from None
            elif key == "seed":
                dist["seed"] = _int(value, lineno)
            else:
                raise ScenarioError(f"unknown top-level key {key!r}", lineno)
        elif section == "geometry":
            if key == "outer_phase":
                geometry[key] = None if value == "auto" else _quantity(value, "angle", lineno)
            elif key in _GEOMETRY_KEYS:
                dim, ok, msg = _GEOMETRY_KEYS[key]
                v = _quantity(value, dim, lineno)
                _check(ok(v), f"{key} {msg} (got {value})", lineno)
                geometry[key] = int(v) if key == "deflection_factor" else v
            else:
                raise ScenarioError(f"unknown geometry key {key!r}", lineno)
        elif section == "misalignment":
            if key in ("leak_offset", "common_offset"):
                geometry[key] = _quantity(value, "length", lineno)
            elif key == "target_visibility":
                v = _quantity(value, "unitless", lineno)
                _check(0 < v <= 1, f"target_visibility must lie in (0, 1] (got {value})", lineno)
                top["target_visibility"] = v
            else:
                raise ScenarioError(f"unknown misalignment key {key!r}", lineno)
        elif mirror is not None:
            if key == "enabled":
                mirrors[mirror]["enabled"] = _bool(value, lineno)
            elif key in _MIRROR_KEYS:
                dim, ok, msg = _MIRROR_KEYS[key]
                v = _quantity(value, dim, lineno)
                _check(ok(v), f"mirror {mirror} {key} {msg} (got {value})", lineno)
                if key == "frequency":
                    if v in freq_lines:
                        raise ScenarioError(
                            f"mirror {mirror} frequency {v:g} Hz duplicates line {freq_lines[v]}", lineno
                        )
                    freq_lines[v] = lineno
                mirrors[mirror][_MIRROR_FIELD[key]] = v
            else:
                raise ScenarioError(f"unknown mirror key {key!r}", lineno)
        elif section == "sampling":
            if key in ("sample_rate", "duration"):
                v = _quantity(value, "frequency" if key == "sample_rate" else "time", lineno)
                _check(v > 0, f"{key} must be > 0 (got {value})", lineno)
                sampling[key] = v
            elif key == "window":
                _check(value in WINDOWS, f"window must be one of {', '.join(WINDOWS)}", lineno)
                sampling[key] = value
            else:
                raise ScenarioError(f"unknown sampling key {key!r}", lineno)
        elif section == "disturbances":
            if key == "tone":
                parts = [p for p in value.split(",")]
                _check(len(parts) in (2, 3), "tone needs 'frequency, amplitude[, phase]'", lineno)
                f = _quantity(parts[0], "frequency", lineno)
                a = _quantity(parts[1], "unitless", lineno)
                ph = _quantity(parts[2], "angle", lineno) if len(parts) == 3 else 0.0
                _check(f > 0 and a >= 0, "tone frequency must be > 0 and amplitude >= 0", lineno)
                tones.append(Tone(f, a, ph))
            elif key == "noise_sigma":
                v = _quantity(value, "unitless", lineno)
                _check(v >= 0, "noise_sigma must be >= 0", lineno)
                dist[key] = v
            elif key == "seed":
                dist[key] = _int(value, lineno)
            else:
                raise ScenarioError(f"unknown disturbances key {key!r}", lineno)
        elif section == "analysis":
            if key == "band":
                analysis[key] = _band(value, lineno)
            elif key == "normalize":
                analysis[key] = _bool(value, lineno)
            elif key == "exclude":
                analysis[key] = tuple(_quantity(p, "frequency", lineno) for p in value.split(",") if p.strip())
            elif key == "exclusion_halfwidth":
                v = _quantity(value, "frequency", lineno)
                _check(v >= 0, "exclusion_halfwidth must be >= 0", lineno)
                analysis[key] = v
            elif key == "threshold_db":
                analysis[key] = _quantity(value, "unitless", lineno)
            elif key == "tolerance_bins":
                v = _int(value, lineno)
                _check(v >= 0, "tolerance_bins must be >= 0", lineno)
                analysis[key] = v
            else:
                raise ScenarioError(f"unknown analysis key {key!r}", lineno)
        elif section == "output":
            if key == "svg":
                output[key] = _bool(value, lineno)
            else:
                raise ScenarioError(f"unknown output key {key!r}", lineno)

    params = SetupParams()
    merged = dict(params.mirrors)
    for label, changes in mirrors.items():
        merged[label] = replace(merged[label], **changes)
    params = replace(params, mirrors=merged, **geometry)
    cfg = ScenarioConfig(
        variant=top.get("variant", ScenarioVariant.NestedTuned2b),
        params=params,
        sampling=replace(SamplingSpec(), **sampling),
        disturbances=replace(DisturbanceSpec(), tones=tuple(tones), **dist),
        target_visibility=top.get("target_visibility"),
        svg=output.get("svg", False),
        **analysis,
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: ScenarioConfig):
    """Cross-field checks that need the whole configuration."""
    try:
        graph = cfg.graph()
    except ValidationError as exc:
        raise ScenarioError("invalid setup: " + "; ".join(exc.violations)) from None
    freqs = [m.frequency for m in graph.mirrors().values()] + [t.frequency for t in cfg.disturbances.tones]
    problems = cfg.sampling.problems(max(freqs, default=0.0))
    problems += cfg.disturbances.problems(cfg.sampling.sample_rate / 2)
    if cfg.band.high > cfg.sampling.sample_rate / 2:
        problems.append(f"analysis band {cfg.band} extends above Nyquist")
    if problems:
        raise ScenarioError("; ".join(problems))


def _fmt(value: float, dimension: str = "unitless") -> str:
    unit = BASE_UNIT[dimension]
    text = repr(float(value))
    return f"{text} {unit}" if unit else text


def format_scenario(cfg: ScenarioConfig) -> str:
    """Serialise a configuration; ``parse_scenario`` reads it back exactly."""
    p = cfg.params
    out = [
        "# nested Mach-Zehnder scenario",
        f"variant = {cfg.variant.value}",
        "",
        "[geometry]",
        f"beam_waist = {_fmt(p.beam_waist, 'length')}",
        f"deflection_factor = {int(p.deflection_factor)}",
    ]
    out += [f"{name} = {_fmt(getattr(p, name), 'length')}" for name in LENGTH_FIELDS]
    out.append(f"inner_phase = {_fmt(p.inner_phase, 'angle')}")
    out.append("outer_phase = " + ("auto" if p.outer_phase is None else _fmt(p.outer_phase, "angle")))
    out += ["", "[misalignment]",
            f"leak_offset = {_fmt(p.leak_offset, 'length')}",
            f"common_offset = {_fmt(p.common_offset, 'length')}"]
    if cfg.target_visibility is not None:
        out.append(f"target_visibility = {_fmt(cfg.target_visibility)}")
    for label in sorted(p.mirrors, key=str):
        m = p.mirrors[label]
        out += [
            "",
            f"[mirror {label}]",
            f"frequency = {_fmt(m.frequency, 'frequency')}",
            f"amplitude = {_fmt(m.piezo_amplitude, 'length')}",
            f"pivot_offset = {_fmt(m.pivot_offset, 'length')}",
            f"static_tilt = {_fmt(m.static_tilt, 'angle')}",
            f"phase = {_fmt(m.oscillation_phase, 'angle')}",
            f"enabled = {'true' if m.enabled else 'false'}",
        ]
    s = cfg.sampling
    out += ["", "[sampling]",
            f"sample_rate = {_fmt(s.sample_rate, 'frequency')}",
            f"duration = {_fmt(s.duration, 'time')}",
            f"window = {s.window}"]
    d = cfg.disturbances
    out += ["", "[disturbances]"]
    out += [
        f"tone = {_fmt(t.frequency, 'frequency')}, {_fmt(t.relative_amplitude)}, {_fmt(t.phase, 'angle')}"
        for t in d.tones
    ]
    out += [f"noise_sigma = {_fmt(d.noise_sigma)}", f"seed = {d.seed}"]
    out += ["", "[analysis]",
            f"band = {cfg.band.low!r}:{cfg.band.high!r}",
            f"normalize = {'true' if cfg.normalize else 'false'}"]
    if cfg.exclude:
        out.append("exclude = " + ", ".join(_fmt(f, "frequency") for f in cfg.exclude))
    out += [f"exclusion_halfwidth = {_fmt(cfg.exclusion_halfwidth, 'frequency')}",
            f"threshold_db = {_fmt(cfg.threshold_db)}",
            f"tolerance_bins = {cfg.tolerance_bins}",
            "", "[output]",
            f"svg = {'true' if cfg.svg else 'false'}"]
    return "\n".join(out) + "\n"


SHIPPED = tuple(v.value for v in ScenarioVariant)


def shipped_scenario_path(name: str) -> Path:
    """Path of a scenario file bundled with the package (``two-path``, ``nested-2b``, ``blocked-2c``)."""
    if name not in SHIPPED:
        raise ScenarioError(f"no shipped scenario {name!r}; choose from {', '.join(SHIPPED)}")
    return Path(__file__).resolve().parent / "scenarios" / f"{name}.scn"


def load_scenario(path) -> ScenarioConfig:
    """Read a scenario file; a bare shipped name such as ``blocked-2c`` also works."""
    p = Path(path)
    if not p.exists() and str(path) in SHIPPED:
        p = shipped_scenario_path(str(path))
    with open(p, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
