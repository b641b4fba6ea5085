"""Two-state-vector bookkeeping over the interferometer graph.

The forward state is the source amplitude pushed through the graph.  The
backward state is the detector amplitude pushed back along reversed segments
with adjoint (conjugated) element transforms, so it is a ket living on the
same segments as the forward state and ``<phi|psi>`` at any cut equals the
detector amplitude.  A mirror "overlaps" when both states are non-negligible
there; this is the criterion the two-state reading uses to say where the
photon has been.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Mapping, Optional, Sequence, Tuple


from .errors import IllConditionedWeakValue
from .model import (
    BeamSplitter,
    Block,
    Detector,
    InterferometerGraph,
    Mirror,
    MirrorId,
    Node,
    SegmentSpec,
    Source,
    validate_graph,
)
from .spectrum import Band, PowerSpectrum, masked_median, peak_heights


@dataclass(frozen=True)
class TSVFStates:
    """Node amplitudes of both states plus per-segment and open-port values.

    Splitters have no single amplitude, so they appear only in ``*_ports``.
    Segment values are taken at the segment's downstream end.
    """

    forward: Dict[str, complex]
    backward: Dict[str, complex]
    forward_segments: Dict[Tuple[str, str], complex] = field(default_factory=dict)
    backward_segments: Dict[Tuple[str, str], complex] = field(default_factory=dict)
    forward_ports: Dict[Tuple[str, int], complex] = field(default_factory=dict)
    backward_ports: Dict[Tuple[str, int], complex] = field(default_factory=dict)


def _phase(angle: float) -> complex:
    return complex(math.cos(angle), math.sin(angle))


def _propagate(graph: InterferometerGraph, source_amplitude: complex = 1.0):
    """Forward pass; returns (node values, segment values, open output ports)."""
    nodes = graph.node_map
    out = graph.outgoing()
    inc = graph.incoming()
    seg_val: Dict[Tuple[str, str], complex] = {}
    node_val: Dict[str, complex] = {}
    open_ports: Dict[Tuple[str, int], complex] = {}
    for name in graph.topological_order():
        el = nodes[name].element
        if isinstance(el, BeamSplitter):
            ins = {s.to_port: seg_val[s.key] for s in inc.get(name, [])}
            outs = {
                j: sum(el.coupling(i, j) * a for i, a in ins.items())
                for j in (0, 1)
            }
            used = {s.from_port for s in out.get(name, [])}
            for j in (0, 1):
                if j not in used:
                    open_ports[(name, j)] = complex(outs[j])
            for s in out.get(name, []):
                seg_val[s.key] = outs[s.from_port] * _phase(s.phase_offset)
            continue
        if isinstance(el, Source):
            value = complex(source_amplitude)
        else:
            value = complex(sum(seg_val[s.key] for s in inc.get(name, [])))
        node_val[name] = value
        passed = 0.0 if isinstance(el, Block) else value
        for s in out.get(name, []):
            seg_val[s.key] = passed * _phase(s.phase_offset)
    return node_val, seg_val, open_ports


def reversed_conjugate(graph: InterferometerGraph) -> InterferometerGraph:
    """Edge-reversed graph with conjugated elements; detector and source swap roles."""
    nodes = []
    for n in graph.nodes:
        el = n.element
        if isinstance(el, BeamSplitter):
            el = BeamSplitter(
                complex(el.reflectance_amplitude).conjugate(),
                complex(el.transmittance_amplitude).conjugate(),
            )
        elif isinstance(el, Source):
            el = Detector()
        elif isinstance(el, Detector):
            el = Source()
        nodes.append(Node(n.name, el))
    segs = tuple(
        SegmentSpec(
            s.to_node, s.from_node, s.length,
            phase_offset=-s.phase_offset,
            transverse_offset=s.transverse_offset,
            from_port=s.to_port, to_port=s.from_port,
        )
        for s in graph.segments
    )
    return replace(graph, nodes=tuple(nodes), segments=segs, scan_segment=None, leak_segment=None)


def forward_state(graph: InterferometerGraph) -> Dict[str, complex]:
    """Amplitude at every non-splitter node for a unit source."""
    validate_graph(graph).raise_if_invalid()
    return _propagate(graph)[0]


def backward_state(graph: InterferometerGraph) -> Dict[str, complex]:
    """Amplitude at every non-splitter node retraced from a unit detector state."""
    validate_graph(graph).raise_if_invalid()
    return _propagate(reversed_conjugate(graph))[0]


def tsvf_states(graph: InterferometerGraph) -> TSVFStates:
    validate_graph(graph).raise_if_invalid()
    fwd, fseg, fports = _propagate(graph)
    bwd, bseg_rev, bports = _propagate(reversed_conjugate(graph))
    # reversed values sit at the original upstream end; undo the segment's
    # conjugated phase to quote them at the downstream end like the forward ones
    bseg = {
        s.key: bseg_rev[(s.to_node, s.from_node)] * _phase(s.phase_offset)
        for s in graph.segments
    }
    return TSVFStates(fwd, bwd, fseg, bseg, fports, bports)


@dataclass(frozen=True)
class OverlapReport:
    overlap_set: FrozenSet[MirrorId]
    forward_magnitudes: Dict[MirrorId, float]
    backward_magnitudes: Dict[MirrorId, float]
    detector_amplitude: complex
    threshold: float = 1e-9


def _mirror_nodes(graph: InterferometerGraph) -> Dict[MirrorId, str]:
    return {
        n.element.spec.id: n.name
        for n in graph.nodes
        if isinstance(n.element, Mirror)
    }


def overlap_set(graph: InterferometerGraph, threshold: float = 1e-9) -> OverlapReport:
    """Mirrors where both the forward and the backward state are non-vanishing."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    fwd = forward_state(graph)
    bwd = backward_state(graph)
    names = _mirror_nodes(graph)
    f_mag = {m: abs(fwd[n]) for m, n in names.items()}
    b_mag = {m: abs(bwd[n]) for m, n in names.items()}
    members = frozenset(m for m in names if f_mag[m] * b_mag[m] > threshold)
    return OverlapReport(members, f_mag, b_mag, fwd[graph.detector_name()], threshold)


def weak_value(graph: InterferometerGraph, mirror, min_overlap: float = 1e-12) -> complex:
    """Weak value ``<phi|P_m|psi> / <phi|psi>`` of the projector onto mirror ``m``'s path."""
    mirror = MirrorId(mirror)
    fwd = forward_state(graph)
    bwd = backward_state(graph)
    amp = fwd[graph.detector_name()]
    if abs(amp) < min_overlap:
        raise IllConditionedWeakValue(
            f"detector amplitude {abs(amp):.3g} vanishes; weak value at {mirror} undefined"
        )
    name = _mirror_nodes(graph)[mirror]
    return bwd[name].conjugate() * fwd[name] / amp


@dataclass(frozen=True)
class MirrorVerdict:
    predicted: bool
    detected: bool
    peak_power: float
    level_db: float

    @property
    def agrees(self) -> bool:
        return self.predicted == self.detected


@dataclass(frozen=True)
class AgreementReport:
    verdicts: Dict[MirrorId, MirrorVerdict]
    median_power: float
    threshold_db: float

    @property
    def predicted(self) -> FrozenSet[MirrorId]:
        return frozenset(m for m, v in self.verdicts.items() if v.predicted)

    @property
    def detected(self) -> FrozenSet[MirrorId]:
        return frozenset(m for m, v in self.verdicts.items() if v.detected)

    @property
    def agreements(self) -> Tuple[MirrorId, ...]:
        return tuple(sorted((m for m, v in self.verdicts.items() if v.agrees), key=str))

    @property
    def disagreements(self) -> Tuple[MirrorId, ...]:
        return tuple(sorted((m for m, v in self.verdicts.items() if not v.agrees), key=str))

    @property
    def full_agreement(self) -> bool:
        return not self.disagreements


def compare_predictions(
    report: OverlapReport,
    spec: PowerSpectrum,
    mirror_frequencies: Mapping,
    band: Band,
    detection_threshold_db: float = 20.0,
    exclude: Sequence[float] = (),
    exclusion_halfwidth: float = 0.0,
    tolerance_bins: int = 1,
) -> AgreementReport:
    """Check each mirror's overlap prediction against its spectral peak.

    A mirror counts as detected when its peak power is positive and at least
    ``detection_threshold_db`` above the median of the masked band.
    """
    median = masked_median(spec, band, exclude, exclusion_halfwidth)
    ratio = 10.0 ** (detection_threshold_db / 10.0)
    verdicts = {}
    for label, freq in mirror_frequencies.items():
        m = MirrorId(label)
        peak = peak_heights(spec, [freq], tolerance_bins)[freq]
        detected = peak > 0 and peak >= ratio * median
        if peak > 0 and median > 0:
            level = 10.0 * math.log10(peak / median)
        else:
            level = math.inf if peak > 0 else -math.inf
        verdicts[m] = MirrorVerdict(m in report.overlap_set, detected, peak, level)
    return AgreementReport(verdicts, median, detection_threshold_db)


def format_report(
    graph: InterferometerGraph,
    overlap: OverlapReport,
    agreement: Optional[AgreementReport] = None,
) -> str:
    """Plain-text summary used for ``tsvf_report.txt`` and the ``tsvf`` command."""
    lines = ["# two-state-vector analysis"]
    lines.append(f"detector_amplitude = {overlap.detector_amplitude.real:.12e} {overlap.detector_amplitude.imag:+.12e}j")
    lines.append(f"overlap_threshold = {overlap.threshold:g}")
    lines.append("mirror  |forward|        |backward|       overlap  weak_value")
    for m in sorted(overlap.forward_magnitudes, key=str):
        try:
            wv = weak_value(graph, m)
            wv_text = f"{wv.real:+.6f}{wv.imag:+.6f}j"
        except IllConditionedWeakValue:
            wv_text = "ill-conditioned"
        lines.append(
            f"{m}       {overlap.forward_magnitudes[m]:.6e}  {overlap.backward_magnitudes[m]:.6e}  "
            f"{'yes' if m in overlap.overlap_set else 'no ':<7}  {wv_text}"
        )
    lines.append("overlap_set = {" + ", ".join(sorted(map(str, overlap.overlap_set))) + "}")
    if abs(overlap.detector_amplitude) < 1e-12:
        lines.append("note: detector amplitude vanishes, weak values are undefined")
    if agreement is not None:
        lines.append("")
        lines.append("# prediction versus simulated spectrum")
        lines.append(f"masked_band_median = {agreement.median_power:.6e}")
        lines.append(f"detection_threshold_db = {agreement.threshold_db:g}")
        lines.append("mirror  predicted  detected  level_db  verdict")
        for m in sorted(agreement.verdicts, key=str):
            v = agreement.verdicts[m]
            lines.append(
                f"{m}       {'yes' if v.predicted else 'no ':<9}  {'yes' if v.detected else 'no ':<8}  "
                f"{v.level_db:8.2f}  {'agree' if v.agrees else 'DISAGREE'}"
            )
        lines.append("predicted = {" + ", ".join(sorted(map(str, agreement.predicted))) + "}")
        lines.append("detected = {" + ", ".join(sorted(map(str, agreement.detected))) + "}")
        lines.append("disagreements = {" + ", ".join(map(str, agreement.disagreements)) + "}")
    return "\n".join(lines) + "\n"
