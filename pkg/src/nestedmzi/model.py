"""Interferometer graph data model and builders for the nested-MZI scenarios.

The graph is a DAG of optical elements joined by segments.  Beam splitters
are 2x2 couplers with numbered ports: light entering input port ``i`` and
leaving output port ``j`` picks up the transmitted amplitude when ``i == j``
and the reflected amplitude otherwise.  Output ports without an outgoing
segment are open ports where light leaves the setup.

Node layout of the nested setup (lengths are the defaults)::

    S --5cm-- BS1 --10cm-- E --10cm-- BS2 --5cm-- A --10cm-- BS3 --5cm-- F --5cm-- BS4 --5cm-- D
               |                        \\--5cm-- B --10cm--/                    /
               \\--10cm-- C ------------------- [Block] ------------15cm--------/

The single graph built here feeds both the wave-optics tracer and the
two-state-vector propagation.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import ValidationError


class MirrorId(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    E = "E"
    F = "F"

    def __str__(self):
        return self.value


SQRT_HALF = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class MirrorSpec:
    """A piezo-driven steering mirror.

    ``frequency`` in Hz, ``piezo_amplitude`` and ``pivot_offset`` in meters,
    angles in radians.
    """

    id: MirrorId
    frequency: float
    piezo_amplitude: float = 10e-9
    pivot_offset: float = 1e-2
    static_tilt: float = 0.0
    oscillation_phase: float = 0.0
    enabled: bool = True

    def problems(self) -> List[str]:
        out = []
        if not (self.frequency > 0 and math.isfinite(self.frequency)):
            out.append(f"mirror {self.id}: frequency must be > 0 (got {self.frequency})")
        if not self.pivot_offset > 0:
            out.append(f"mirror {self.id}: pivot_offset must be > 0 (got {self.pivot_offset})")
        if not self.piezo_amplitude >= 0:
            out.append(f"mirror {self.id}: piezo_amplitude must be >= 0 (got {self.piezo_amplitude})")
        return out


@dataclass(frozen=True)
class Source:
    pass


@dataclass(frozen=True)
class BeamSplitter:
    reflectance_amplitude: complex = 1j * SQRT_HALF
    transmittance_amplitude: complex = SQRT_HALF

    def coupling(self, in_port: int, out_port: int) -> complex:
        if in_port == out_port:
            return self.transmittance_amplitude
        return self.reflectance_amplitude


@dataclass(frozen=True)
class Mirror:
    spec: MirrorSpec


@dataclass(frozen=True)
class Block:
    pass


@dataclass(frozen=True)
class Detector:
    pass


Element = Union[Source, BeamSplitter, Mirror, Block, Detector]


@dataclass(frozen=True)
class Node:
    name: str
    element: Element


@dataclass(frozen=True)
class SegmentSpec:
    """A free-space leg between two nodes.

    ``from_port`` is the output port used on a beam splitter, ``to_port`` the
    input port it feeds; both are ignored for single-port elements.
    """

    from_node: str
    to_node: str
    length: float
    phase_offset: float = 0.0
    transverse_offset: float = 0.0
    from_port: int = 0
    to_port: int = 0

    @property
    def key(self) -> Tuple[str, str]:
        return (self.from_node, self.to_node)


@dataclass(frozen=True)
class InterferometerGraph:
    nodes: Tuple[Node, ...]
    segments: Tuple[SegmentSpec, ...]
    beam_waist: float = 1e-3
    deflection_factor: float = 1.0
    # (from, to) of the outer arm whose phase a visibility scan sweeps
    scan_segment: Optional[Tuple[str, str]] = None
    # (from, to) of the arm that receives the calibrated static offset
    leak_segment: Optional[Tuple[str, str]] = None

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    @property
    def node_map(self) -> Dict[str, Node]:
        return {n.name: n for n in self.nodes}

    def segment(self, key: Tuple[str, str]) -> SegmentSpec:
        for s in self.segments:
            if s.key == tuple(key):
                return s
        raise KeyError(key)

    def mirrors(self) -> Dict[MirrorId, MirrorSpec]:
        return {
            n.element.spec.id: n.element.spec
            for n in self.nodes
            if isinstance(n.element, Mirror)
        }

    def source_name(self) -> str:
        return next(n.name for n in self.nodes if isinstance(n.element, Source))

    def detector_name(self) -> str:
        return next(n.name for n in self.nodes if isinstance(n.element, Detector))

    def outgoing(self) -> Dict[str, List[SegmentSpec]]:
        out: Dict[str, List[SegmentSpec]] = defaultdict(list)
        for s in self.segments:
            out[s.from_node].append(s)
        return out

    def incoming(self) -> Dict[str, List[SegmentSpec]]:
        inc: Dict[str, List[SegmentSpec]] = defaultdict(list)
        for s in self.segments:
            inc[s.to_node].append(s)
        return inc

    def with_segment(self, key: Tuple[str, str], **changes) -> "InterferometerGraph":
        """Copy of the graph with one segment's fields replaced."""
        key = tuple(key)
        if key not in {s.key for s in self.segments}:
            raise KeyError(key)
        segs = tuple(replace(s, **changes) if s.key == key else s for s in self.segments)
        return replace(self, segments=segs)

    def with_mirror(self, label, **changes) -> "InterferometerGraph":
        label = MirrorId(label)
        nodes = []
        for n in self.nodes:
            if isinstance(n.element, Mirror) and n.element.spec.id == label:
                n = Node(n.name, Mirror(replace(n.element.spec, **changes)))
            nodes.append(n)
        return replace(self, nodes=tuple(nodes))

    def topological_order(self) -> List[str]:
        """Kahn ordering, ties broken by name; raises ValidationError on cycles."""
        indeg = {n.name: 0 for n in self.nodes}
        out = self.outgoing()
        for s in self.segments:
            if s.to_node in indeg:
                indeg[s.to_node] += 1
        ready = sorted(k for k, v in indeg.items() if v == 0)
        order = []
        while ready:
            name = ready.pop(0)
            order.append(name)
            for s in out.get(name, []):
                if s.to_node not in indeg:
                    continue
                indeg[s.to_node] -= 1
                if indeg[s.to_node] == 0:
                    ready.append(s.to_node)
                    ready.sort()
        if len(order) != len(indeg):
            raise ValidationError("graph contains a cycle")
        return order


class ScenarioVariant(enum.Enum):
    TwoPathAligned = "two-path"
    NestedTuned2b = "nested-2b"
    LowerBlocked2c = "blocked-2c"

    @classmethod
    def parse(cls, text: str) -> "ScenarioVariant":
        for v in cls:
            if text == v.value or text == v.name:
                return v
        raise ValueError(f"unknown variant {text!r}")


DEFAULT_FREQUENCIES = {
    MirrorId.E: 275.0,
    MirrorId.A: 288.0,
    MirrorId.B: 298.0,
    MirrorId.C: 318.0,
    MirrorId.F: 332.0,
}


def default_mirrors() -> Dict[MirrorId, MirrorSpec]:
    return {m: MirrorSpec(id=m, frequency=f) for m, f in DEFAULT_FREQUENCIES.items()}


LENGTH_FIELDS = (
    "source_leg", "upper_leg", "lower_leg", "e_leg", "inner_split",
    "inner_arm", "inner_out", "f_leg", "c_leg", "block_position", "detector_leg",
)


@dataclass(frozen=True)
class SetupParams:
    """Overridable parameters of the canonical setups (SI units).

    ``outer_phase=None`` selects the phase that makes the big loop
    constructive at the detector port for the chosen variant.  ``leak_offset``
    is the static transverse offset on the designated leak arm (lower arm of
    the two-path MZI, inner arm A of the nested one); ``common_offset`` sits
    on the last upper leg before the final splitter.
    """

    mirrors: Dict[MirrorId, MirrorSpec] = field(default_factory=default_mirrors)
    beam_waist: float = 1e-3
    deflection_factor: float = 1.0
    source_leg: float = 0.05
    upper_leg: float = 0.10
    lower_leg: float = 0.10
    e_leg: float = 0.10
    inner_split: float = 0.05
    inner_arm: float = 0.10
    inner_out: float = 0.05
    f_leg: float = 0.05
    c_leg: float = 0.15
    block_position: float = 0.05
    detector_leg: float = 0.05
    inner_phase: float = math.pi
    outer_phase: Optional[float] = None
    leak_offset: float = 0.0
    common_offset: float = 0.0

    def with_mirror(self, label, **changes) -> "SetupParams":
        label = MirrorId(label)
        mirrors = dict(self.mirrors)
        mirrors[label] = replace(mirrors[label], **changes)
        return replace(self, mirrors=mirrors)

    def problems(self) -> List[str]:
        out = []
        for name in LENGTH_FIELDS:
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                out.append(f"length {name} must be >= 0 (got {value})")
        if not self.beam_waist > 0:
            out.append(f"beam_waist must be > 0 (got {self.beam_waist})")
        if self.deflection_factor not in (1, 2):
            out.append(f"deflection_factor must be 1 or 2 (got {self.deflection_factor})")
        if self.block_position > self.c_leg:
            out.append("block_position must not exceed c_leg")
        for label, spec in self.mirrors.items():
            if spec.id != label:
                out.append(f"mirror entry {label} carries id {spec.id}")
            out.extend(spec.problems())
        return out


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def raise_if_invalid(self):
        if self.violations:
            raise ValidationError(self.violations)


def validate_graph(graph: InterferometerGraph, unitarity_tol: float = 1e-9) -> ValidationReport:
    """Collect every invariant violation of ``graph``; empty report means valid."""
    v: List[str] = []
    names = [n.name for n in graph.nodes]
    if len(set(names)) != len(names):
        v.append("duplicate node names")
    nodes = graph.node_map

    n_src = sum(isinstance(n.element, Source) for n in graph.nodes)
    n_det = sum(isinstance(n.element, Detector) for n in graph.nodes)
    if n_src != 1:
        v.append(f"expected exactly one Source, found {n_src}")
    if n_det != 1:
        v.append(f"expected exactly one Detector, found {n_det}")
    if not graph.beam_waist > 0:
        v.append("beam_waist must be > 0")
    if graph.deflection_factor not in (1, 2):
        v.append("deflection_factor must be 1 or 2")

    mirror_ids = []
    freqs = []
    for n in graph.nodes:
        el = n.element
        if isinstance(el, BeamSplitter):
            r, t = el.reflectance_amplitude, el.transmittance_amplitude
            norm = abs(r) ** 2 + abs(t) ** 2
            if abs(norm - 1.0) > unitarity_tol:
                v.append(f"beam splitter {n.name} non-unitary: |r|^2+|t|^2 = {norm:.6g}")
            elif abs((t * r.conjugate()).real) > unitarity_tol:
                v.append(f"beam splitter {n.name} non-unitary: Re(t r*) = {(t * r.conjugate()).real:.3g}")
        elif isinstance(el, Mirror):
            mirror_ids.append(el.spec.id)
            freqs.append(el.spec.frequency)
            v.extend(el.spec.problems())
    if len(set(mirror_ids)) != len(mirror_ids):
        v.append("duplicate mirror ids")
    if len(set(freqs)) != len(freqs):
        v.append("mirror frequencies are not pairwise distinct")

    keys = set()
    in_ports = defaultdict(list)
    out_ports = defaultdict(list)
    for s in graph.segments:
        if s.key in keys:
            v.append(f"duplicate segment {s.from_node}->{s.to_node}")
        keys.add(s.key)
        for end in (s.from_node, s.to_node):
            if end not in nodes:
                v.append(f"segment {s.from_node}->{s.to_node} references unknown node {end}")
        if not (s.length >= 0 and math.isfinite(s.length)):
            v.append(f"segment {s.from_node}->{s.to_node} has negative length")
        if not (math.isfinite(s.phase_offset) and math.isfinite(s.transverse_offset)):
            v.append(f"segment {s.from_node}->{s.to_node} has non-finite offsets")
        out_ports[s.from_node].append(s.from_port)
        in_ports[s.to_node].append(s.to_port)

    for name, n in nodes.items():
        el = n.element
        ins, outs = in_ports.get(name, []), out_ports.get(name, [])
        if isinstance(el, BeamSplitter):
            for label, ports in (("input", ins), ("output", outs)):
                if any(p not in (0, 1) for p in ports) or len(set(ports)) != len(ports):
                    v.append(f"beam splitter {name}: invalid or repeated {label} ports {ports}")
        elif isinstance(el, Source):
            if ins:
                v.append(f"source {name} has incoming segments")
            if len(outs) != 1:
                v.append(f"source {name} must have exactly one outgoing segment")
        elif isinstance(el, Detector):
            if outs:
                v.append(f"detector {name} has outgoing segments")
        elif isinstance(el, (Mirror, Block)):
            if len(ins) > 1 or len(outs) > 1:
                v.append(f"{name} must have at most one incoming and one outgoing segment")

    try:
        graph.topological_order()
    except ValidationError:
        v.append("graph contains a cycle")
        return ValidationReport(v)

    if n_src == 1 and n_det == 1 and not v:
        reach = _reachable(graph, graph.source_name())
        has_block = any(isinstance(n.element, Block) for n in graph.nodes)
        if graph.detector_name() not in reach and not has_block:
            v.append("detector unreachable from source")
        orphans = sorted(n for n in names if n not in reach)
        if orphans:
            v.append(f"nodes unreachable from source: {', '.join(orphans)}")
    for key in (graph.scan_segment, graph.leak_segment):
        if key is not None and tuple(key) not in keys:
            v.append(f"designated segment {key} not in graph")
    return ValidationReport(v)


def _reachable(graph: InterferometerGraph, start: str) -> set:
    out = graph.outgoing()
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for s in out.get(cur, []):
            if s.to_node not in seen:
                seen.add(s.to_node)
                stack.append(s.to_node)
    return seen


@dataclass(frozen=True)
class GraphPath:
    """One source-to-terminal route through the graph, as a segment sequence."""

    segments: Tuple[SegmentSpec, ...]

    @property
    def node_sequence(self) -> Tuple[str, ...]:
        return (self.segments[0].from_node,) + tuple(s.to_node for s in self.segments)

    @property
    def length(self) -> float:
        return sum(s.length for s in self.segments)

    def amplitude(self, graph: InterferometerGraph) -> complex:
        nodes = graph.node_map
        amp = complex(1.0)
        for prev, nxt in zip(self.segments[:-1], self.segments[1:]):
            el = nodes[prev.to_node].element
            if isinstance(el, BeamSplitter):
                amp *= el.coupling(prev.to_port, nxt.from_port)
        phase = sum(s.phase_offset for s in self.segments)
        return amp * complex(math.cos(phase), math.sin(phase))


def enumerate_paths(graph: InterferometerGraph, include_blocked: bool = False) -> List[GraphPath]:
    """All source-to-detector paths, lexicographically ordered by node sequence.

    Paths crossing a Block are dropped unless ``include_blocked``.
    """
    nodes = graph.node_map
    out = graph.outgoing()
    det = graph.detector_name()
    found: List[GraphPath] = []

    def walk(name, trail, blocked):
        if name == det:
            if include_blocked or not blocked:
                found.append(GraphPath(tuple(trail)))
            return
        if isinstance(nodes[name].element, Block):
            blocked = True
        for s in out.get(name, []):
            walk(s.to_node, trail + [s], blocked)

    walk(graph.source_name(), [], False)
    found.sort(key=lambda p: p.node_sequence)
    return found


def mirror_distances_to_detector(graph: InterferometerGraph) -> Dict[MirrorId, float]:
    """Longest optical path from each mirror to the detector, ignoring blocks."""
    nodes = graph.node_map
    best: Dict[MirrorId, float] = {}
    for path in enumerate_paths(graph, include_blocked=True):
        for i, s in enumerate(path.segments):
            el = nodes[s.from_node].element
            if isinstance(el, Mirror):
                rest = sum(x.length for x in path.segments[i:])
                best[el.spec.id] = max(best.get(el.spec.id, 0.0), rest)
    return best


def _outer_phase_for(variant: ScenarioVariant) -> float:
    # The nested upper route carries one extra t*r = i/2 factor relative to
    # the two-path MZI, compensated by +pi/2 on the lower arm.
    if variant is ScenarioVariant.TwoPathAligned:
        return 0.0
    return math.pi / 2


def build_danan_setup(
    variant: Union[ScenarioVariant, str],
    params: Optional[SetupParams] = None,
) -> InterferometerGraph:
    """Build one of the canonical interferometer configurations.

    Raises ValidationError when the overrides break any invariant, including
    the requirement that mirror E is the farthest mirror from the detector.
    """
    if isinstance(variant, str):
        variant = ScenarioVariant.parse(variant)
    p = params if params is not None else SetupParams()
    problems = p.problems()
    if problems:
        raise ValidationError(problems)

    outer = p.outer_phase if p.outer_phase is not None else _outer_phase_for(variant)
    bs = BeamSplitter()
    nested = variant is not ScenarioVariant.TwoPathAligned
    used = [MirrorId.E, MirrorId.C] + ([MirrorId.A, MirrorId.B, MirrorId.F] if nested else [])
    missing = [m for m in used if m not in p.mirrors]
    if missing:
        raise ValidationError(f"missing mirror specs: {', '.join(map(str, missing))}")

    nodes = [Node("S", Source()), Node("BS1", bs)]
    nodes += [Node(str(m), Mirror(p.mirrors[m])) for m in used]
    segs = [
        SegmentSpec("S", "BS1", p.source_leg, to_port=0),
        SegmentSpec("BS1", "E", p.upper_leg, from_port=0),
        SegmentSpec("BS1", "C", p.lower_leg, phase_offset=outer, from_port=1),
    ]
    if nested:
        nodes += [Node("BS2", bs), Node("BS3", bs)]
        segs += [
            SegmentSpec("E", "BS2", p.e_leg, to_port=0),
            SegmentSpec("BS2", "A", p.inner_split, from_port=0),
            SegmentSpec("BS2", "B", p.inner_split, from_port=1),
            SegmentSpec("A", "BS3", p.inner_arm, transverse_offset=p.leak_offset, to_port=0),
            SegmentSpec("B", "BS3", p.inner_arm, phase_offset=p.inner_phase, to_port=1),
            SegmentSpec("BS3", "F", p.inner_out, from_port=1),
            SegmentSpec("F", "BS4", p.f_leg, transverse_offset=p.common_offset, to_port=0),
        ]
    else:
        upper = p.e_leg + p.inner_split + p.inner_arm + p.inner_out + p.f_leg
        segs.append(SegmentSpec("E", "BS4", upper, transverse_offset=p.common_offset, to_port=0))
    leak = ("A", "BS3") if nested else ("C", "BS4")

    if variant is ScenarioVariant.LowerBlocked2c:
        nodes.append(Node("BLOCK", Block()))
        segs += [
            SegmentSpec("C", "BLOCK", p.block_position),
            SegmentSpec("BLOCK", "BS4", p.c_leg - p.block_position, to_port=1),
        ]
    else:
        offset = p.leak_offset if not nested else 0.0
        segs.append(SegmentSpec("C", "BS4", p.c_leg, transverse_offset=offset, to_port=1))

    nodes += [Node("BS4", bs), Node("D", Detector())]
    segs.append(SegmentSpec("BS4", "D", p.detector_leg, from_port=1))

    graph = InterferometerGraph(
        nodes=tuple(nodes),
        segments=tuple(segs),
        beam_waist=p.beam_waist,
        deflection_factor=p.deflection_factor,
        scan_segment=("BS1", "C"),
        leak_segment=leak,
    )
    validate_graph(graph).raise_if_invalid()

    dist = mirror_distances_to_detector(graph)
    others = [m for m in dist if m is not MirrorId.E]
    if any(dist[MirrorId.E] <= dist[m] for m in others):
        raise ValidationError(
            "mirror E must be strictly farthest from the detector: "
            + ", ".join(f"{m}={dist[m]:.4g} m" for m in sorted(dist, key=str))
        )
    return graph


def big_loop_reference(params: Optional[SetupParams] = None) -> InterferometerGraph:
    """Unblocked nested setup with the inner loop retuned constructive.

    This is the configuration whose fringe contrast defines the big-loop
    visibility of the nested scenarios.
    """
    p = params if params is not None else SetupParams()
    return build_danan_setup(ScenarioVariant.NestedTuned2b, replace(p, inner_phase=0.0))


def terminal_ports(graph: InterferometerGraph) -> List[Tuple[str, int]]:
    """Open beam-splitter outputs plus the detector, as (node, port) pairs."""
    used = defaultdict(set)
    for s in graph.segments:
        used[s.from_node].add(s.from_port)
    ports = []
    for n in graph.nodes:
        if isinstance(n.element, BeamSplitter):
            ports += [(n.name, p) for p in (0, 1) if p not in used[n.name]]
        elif isinstance(n.element, Detector):
            ports.append((n.name, 0))
    return ports


def mirror_frequencies(graph: InterferometerGraph) -> Dict[MirrorId, float]:
    return {m: spec.frequency for m, spec in graph.mirrors().items()}


def path_mirrors(graph: InterferometerGraph, path: GraphPath) -> List[MirrorId]:
    nodes = graph.node_map
    return [
        nodes[name].element.spec.id
        for name in path.node_sequence
        if isinstance(nodes[name].element, Mirror)
    ]


__all__: Sequence[str] = [
    "MirrorId", "MirrorSpec", "Source", "BeamSplitter", "Mirror", "Block", "Detector",
    "Node", "SegmentSpec", "InterferometerGraph", "ScenarioVariant", "SetupParams",
    "ValidationReport", "validate_graph", "build_danan_setup", "big_loop_reference",
    "enumerate_paths", "GraphPath", "mirror_distances_to_detector", "terminal_ports",
    "mirror_frequencies", "path_mirrors", "DEFAULT_FREQUENCIES",
]
