"""Quad-cell detector model, fringe visibility and misalignment calibration.

Every path reaching the detector contributes a real Gaussian profile
``a_p * exp(-(y - d_p)**2 / w**2)`` centred on its displacement ``d_p``.  The
detector reports the power difference between the upper (y > 0) and lower
(y < 0) halves and the total power, integrated with composite Simpson on a
grid that always has a node on the split line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .beams import PathContribution, trace_paths
from .errors import DegenerateError, DomainError, UnreachableTargetError
from .model import InterferometerGraph, Mirror, Node, enumerate_paths


@dataclass(frozen=True)
class QuadratureSpec:
    """Integration window ``+-half_range * w`` split into ``point_count`` intervals."""

    half_range: float = 8.0
    point_count: int = 4096

    def check(self):
        if not self.half_range >= 4:
            raise DomainError(f"half_range must be >= 4, got {self.half_range}")
        if self.point_count < 64 or self.point_count % 2:
            raise DomainError(f"point_count must be even and >= 64, got {self.point_count}")


@dataclass(frozen=True)
class DetectorSample:
    difference: float
    total: float


def simpson_weights(n_intervals: int) -> np.ndarray:
    """Unit-spacing composite Simpson weights for ``n_intervals + 1`` nodes.

    Odd interval counts close with the 3/8 rule on the last three intervals.
    """
    n = int(n_intervals)
    if n < 2:
        raise DomainError("need at least two intervals")
    w = np.zeros(n + 1)
    even = n if n % 2 == 0 else n - 3
    if even:
        w[0:even + 1:2] += 2.0 / 3.0
        w[1:even:2] += 4.0 / 3.0
        w[0] -= 1.0 / 3.0
        w[even] -= 1.0 / 3.0
    if n % 2:
        w[even:even + 4] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return w


def field_at_detector(
    contributions: Sequence[PathContribution],
    y,
    w: float,
    wavelength: Optional[float] = None,
):
    """Superposed complex field at transverse position(s) ``y``.

    When ``wavelength`` is given each contribution also carries the linear
    phase ramp of its residual tilt; by default only displacement enters.
    """
    if not w > 0:
        raise DomainError("beam waist must be > 0")
    y = np.asarray(y, dtype=float)
    field = np.zeros(y.shape, dtype=complex)
    for c in contributions:
        rel = y - c.displacement
        term = c.amplitude * np.exp(-(rel * rel) / (w * w))
        if wavelength is not None:
            term = term * np.exp(1j * (2 * math.pi / wavelength) * c.residual_tilt * rel)
        field = field + term
    return field if field.ndim else complex(field)


def _half_integrals(amps, disp, tilts, w, quadrature, wavelength):
    """Upper and lower half-plane powers for a batch of instants.

    ``disp`` and ``tilts`` have shape ``(P, N)``; returns two arrays of length N.
    """
    n_half = quadrature.point_count // 2
    unit = np.linspace(0.0, 1.0, n_half + 1)
    weights = simpson_weights(n_half)
    reach = quadrature.half_range * w + (np.max(np.abs(disp), axis=0) if disp.size else 0.0)
    h = reach / n_half
    y_up = reach[:, None] * unit[None, :]
    upper = np.zeros(disp.shape[1])
    lower = np.zeros(disp.shape[1])
    for sign, out in ((1.0, upper), (-1.0, lower)):
        y = sign * y_up
        field = np.zeros(y.shape, dtype=complex)
        for p in range(len(amps)):
            rel = y - disp[p][:, None]
            term = amps[p] * np.exp(-(rel * rel) / (w * w))
            if wavelength is not None:
                term = term * np.exp(1j * (2 * math.pi / wavelength) * tilts[p][:, None] * rel)
            field += term
        intensity = field.real ** 2 + field.imag ** 2
        out[:] = (intensity @ weights) * h
    return upper, lower


def qcd_difference_signal(
    contributions: Sequence[PathContribution],
    w: float,
    quadrature: QuadratureSpec = QuadratureSpec(),
    wavelength: Optional[float] = None,
) -> DetectorSample:
    """Upper-minus-lower power and total power on the quad cell."""
    quadrature.check()
    if not w > 0:
        raise DomainError("beam waist must be > 0")
    if not contributions:
        return DetectorSample(0.0, 0.0)
    amps = np.array([c.amplitude for c in contributions], dtype=complex)
    disp = np.array([[c.displacement] for c in contributions], dtype=float)
    tilts = np.array([[c.residual_tilt] for c in contributions], dtype=float)
    upper, lower = _half_integrals(amps, disp, tilts, w, quadrature, wavelength)
    return DetectorSample(float(upper[0] - lower[0]), float(upper[0] + lower[0]))


def qcd_signal_batch(amps, disp, tilts, w, quadrature=QuadratureSpec(), wavelength=None, chunk=256):
    """Batched difference and total signals for ``(P, N)`` displacement arrays."""
    quadrature.check()
    n = disp.shape[1]
    diff = np.zeros(n)
    total = np.zeros(n)
    if len(amps) == 0:
        return diff, total
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        up, lo = _half_integrals(amps, disp[:, sl], tilts[:, sl], w, quadrature, wavelength)
        diff[sl] = up - lo
        total[sl] = up + lo
    return diff, total


def closed_form_single_gaussian(delta: float, w: float) -> DetectorSample:
    """Exact quad-cell response to one unit-amplitude Gaussian displaced by ``delta``.

    Uses the standard-library ``math.erf`` (about 1e-16 relative accuracy).
    """
    if not w > 0:
        raise DomainError("beam waist must be > 0")
    total = w * math.sqrt(math.pi / 2.0)
    return DetectorSample(total * math.erf(math.sqrt(2.0) * delta / w), total)


def _at_rest(graph: InterferometerGraph) -> InterferometerGraph:
    nodes = tuple(
        Node(n.name, Mirror(replace(n.element.spec, enabled=False)))
        if isinstance(n.element, Mirror) else n
        for n in graph.nodes
    )
    return replace(graph, nodes=nodes)


def _golden_max(f, lo, hi, tol=1e-10, max_iter=200):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return max(fc, fd)


def fringe_scan(
    graph: InterferometerGraph,
    scan_points: int = 256,
    segment: Optional[Tuple[str, str]] = None,
    quadrature: QuadratureSpec = QuadratureSpec(),
):
    """Total detector power versus extra phase on ``segment`` (mirrors at rest).

    Returns ``(phases, powers, power_fn)`` where ``power_fn`` evaluates the
    power at an arbitrary phase.
    """
    key = tuple(segment or graph.scan_segment or ())
    if not key:
        raise DomainError("graph has no designated scan segment")
    graph.segment(key)
    still = _at_rest(graph)
    contribs = trace_paths(still, 0.0)
    through = [
        key in {s.key for s in p.segments}
        for p in enumerate_paths(still)
    ]
    scanned = [c for c, on in zip(contribs, through) if on]
    fixed = [c for c, on in zip(contribs, through) if not on]

    w = graph.beam_waist
    quadrature.check()
    reach = quadrature.half_range * w + max((abs(c.displacement) for c in contribs), default=0.0)
    n = quadrature.point_count
    y = np.linspace(-reach, reach, n + 1)
    weights = simpson_weights(n) * (2 * reach / n)
    e_s = field_at_detector(scanned, y, w) if scanned else np.zeros_like(y, dtype=complex)
    e_o = field_at_detector(fixed, y, w) if fixed else np.zeros_like(y, dtype=complex)
    p_s = float(np.abs(e_s) ** 2 @ weights)
    p_o = float(np.abs(e_o) ** 2 @ weights)
    cross = complex((np.conj(e_o) * e_s) @ weights)

    def power(phi):
        return p_s + p_o + 2.0 * (np.exp(1j * np.asarray(phi)) * cross).real

    phases = np.arange(scan_points) * (2 * math.pi / scan_points)
    return phases, power(phases), power


def visibility(
    graph: InterferometerGraph,
    scan_points: int = 256,
    segment: Optional[Tuple[str, str]] = None,
    quadrature: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Fringe contrast ``(Imax - Imin) / (Imax + Imin)`` from a phase scan.

    The scan sweeps ``[0, 2*pi)`` on the designated outer arm; the best scan
    points are then refined by golden-section search.
    """
    if scan_points < 16:
        raise DomainError("scan_points must be >= 16")
    phases, powers, power = fringe_scan(graph, scan_points, segment, quadrature)
    step = phases[1] - phases[0]
    i_max, i_min = int(np.argmax(powers)), int(np.argmin(powers))
    p_max = max(powers[i_max], _golden_max(power, phases[i_max] - step, phases[i_max] + step))
    p_min = -max(-powers[i_min], _golden_max(lambda x: -power(x), phases[i_min] - step, phases[i_min] + step))
    if p_max + p_min <= 0:
        raise DegenerateError("no power reaches the detector at any phase")
    return float(min(1.0, max(0.0, (p_max - p_min) / (p_max + p_min))))


def calibrate_misalignment(
    graph: InterferometerGraph,
    target_visibility: float,
    segment: Optional[Tuple[str, str]] = None,
    scan_points: int = 256,
    quadrature: QuadratureSpec = QuadratureSpec(),
    tol: float = 1e-7,
) -> float:
    """Static transverse offset on the leak arm that yields ``target_visibility``.

    Bisection over ``[0, 6 w]``.  The offset replaces the arm's existing
    static offset.
    """
    key = tuple(segment or graph.leak_segment or ())
    if not key:
        raise DomainError("graph has no designated leak segment")
    if not 0 < target_visibility <= 1:
        raise UnreachableTargetError(f"target visibility {target_visibility} outside (0, 1]")

    def vis(d):
        return visibility(graph.with_segment(key, transverse_offset=d), scan_points, None, quadrature)

    lo, hi = 0.0, 6.0 * graph.beam_waist
    v_lo = vis(lo)
    if abs(v_lo - target_visibility) <= tol:
        return 0.0
    if target_visibility > v_lo:
        raise UnreachableTargetError(
            f"target {target_visibility} exceeds achievable visibility {v_lo:.9f}"
        )
    v_hi = vis(hi)
    if v_hi > target_visibility:
        raise UnreachableTargetError(
            f"target {target_visibility} below visibility {v_hi:.6f} at the bracket edge"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v = vis(mid)
        if abs(v - target_visibility) <= tol or hi - lo < 1e-15 * graph.beam_waist:
            return mid
        if v > target_visibility:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
