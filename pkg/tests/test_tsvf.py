import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nestedmzi.errors import IllConditionedWeakValue
from nestedmzi.model import MirrorId, SetupParams, build_danan_setup
from nestedmzi.spectrum import Band, PowerSpectrum
from nestedmzi.tsvf import (
    backward_state,
    compare_predictions,
    format_report,
    forward_state,
    overlap_set,
    reversed_conjugate,
    tsvf_states,
    weak_value,
)

M = MirrorId
# cuts separating source from detector in the nested graph
NESTED_CUTS = [
    [("BS1", "E"), ("BS1", "C")],
    [("A", "BS3"), ("B", "BS3"), ("BS1", "C")],
    [("F", "BS4"), ("C", "BS4")],
]


def test_nested_forward_backward_magnitudes():
    g = build_danan_setup("nested-2b")
    fwd, bwd = forward_state(g), backward_state(g)
    half = 1 / math.sqrt(2)
    assert {k: abs(fwd[k]) for k in "ABCEF"} == pytest.approx({"A": 0.5, "B": 0.5, "C": half, "E": half, "F": 0.0}, abs=1e-15)
    assert {k: abs(bwd[k]) for k in "ABCEF"} == pytest.approx({"A": 0.5, "B": 0.5, "C": half, "E": 0.0, "F": half}, abs=1e-15)
    assert fwd["D"] == pytest.approx(-0.5)


def test_overlap_sets_of_each_variant():
    assert overlap_set(build_danan_setup("nested-2b")).overlap_set == {M.A, M.B, M.C}
    assert overlap_set(build_danan_setup("blocked-2c")).overlap_set == {M.A, M.B}
    assert overlap_set(build_danan_setup("two-path")).overlap_set == {M.C, M.E}


def test_nested_weak_values():
    g = build_danan_setup("nested-2b")
    wv = {m: weak_value(g, m) for m in M}
    assert wv[M.C] == pytest.approx(1.0)
    assert wv[M.A] == pytest.approx(0.5)
    assert wv[M.B] == pytest.approx(-0.5)
    assert wv[M.E] == pytest.approx(0.0, abs=1e-15)
    assert wv[M.F] == pytest.approx(0.0, abs=1e-15)


def test_blocked_weak_value_is_ill_conditioned():
    with pytest.raises(IllConditionedWeakValue):
        weak_value(build_danan_setup("blocked-2c"), "A")


def test_reversal_swaps_source_and_detector():
    g = build_danan_setup("nested-2b")
    r = reversed_conjugate(g)
    assert r.source_name() == "D" and r.detector_name() == "S"
    assert {s.key for s in r.segments} == {(s.to_node, s.from_node) for s in g.segments}


def _cut_overlap(states, cut):
    return sum(states.backward_segments[k].conjugate() * states.forward_segments[k] for k in cut)


@settings(max_examples=40, deadline=None)
@given(inner=st.floats(0, 2 * math.pi), outer=st.floats(0, 2 * math.pi))
def test_backward_forward_overlap_is_detector_amplitude_on_every_cut(inner, outer):
    g = build_danan_setup("nested-2b", SetupParams(inner_phase=inner, outer_phase=outer))
    states = tsvf_states(g)
    amp = states.forward["D"]
    for cut in NESTED_CUTS:
        assert _cut_overlap(states, cut) == pytest.approx(amp, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(inner=st.floats(0, 2 * math.pi), outer=st.floats(0, 2 * math.pi))
def test_weak_values_on_a_cut_sum_to_one(inner, outer):
    g = build_danan_setup("nested-2b", SetupParams(inner_phase=inner, outer_phase=outer))
    assume(abs(forward_state(g)["D"]) > 1e-3)
    wv = {m: weak_value(g, m) for m in M}
    assert wv[M.A] + wv[M.B] + wv[M.C] == pytest.approx(1.0, abs=1e-9)
    assert wv[M.E] + wv[M.C] == pytest.approx(1.0, abs=1e-9)
    assert wv[M.E] == pytest.approx(wv[M.A] + wv[M.B], abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(threshold=st.floats(1e-12, 1e-3), variant=st.sampled_from(["nested-2b", "blocked-2c", "two-path"]))
def test_overlap_set_stable_across_thresholds(threshold, variant):
    g = build_danan_setup(variant)
    assert overlap_set(g, threshold).overlap_set == overlap_set(g).overlap_set


def test_overlap_threshold_range():
    with pytest.raises(ValueError):
        overlap_set(build_danan_setup("nested-2b"), 0.0)


def _synthetic(peaks):
    powers = np.full(1025, 1.0)
    for f, p in peaks.items():
        powers[int(f / 0.5)] = p
    return PowerSpectrum(0.5, powers)


def test_compare_predictions_flags_disagreements():
    g = build_danan_setup("blocked-2c")
    report = overlap_set(g)
    freqs = {M.E: 275.0, M.A: 288.0, M.B: 298.0, M.C: 318.0, M.F: 332.0}
    spec = _synthetic({275.0: 1e4, 288.0: 1e3, 298.0: 1e3, 318.0: 50.0})
    agreement = compare_predictions(report, spec, freqs, Band(270, 340), 20.0)
    assert agreement.detected == {M.E, M.A, M.B}
    assert agreement.disagreements == (M.E,)
    assert not agreement.full_agreement
    assert agreement.verdicts[M.E].level_db == pytest.approx(40.0)
    assert agreement.verdicts[M.C].level_db == pytest.approx(10 * math.log10(50.0))


def test_format_report_mentions_vanishing_amplitude():
    g = build_danan_setup("blocked-2c")
    text = format_report(g, overlap_set(g))
    assert "overlap_set = {A, B}" in text
    assert "ill-conditioned" in text and "vanishes" in text


@pytest.mark.parametrize("variant", ["nested-2b", "two-path"])
def test_forward_unitarity_over_terminal_ports(variant):
    states = tsvf_states(build_danan_setup(variant, SetupParams(inner_phase=1.1, outer_phase=0.4)))
    total = sum(abs(a) ** 2 for a in states.forward_ports.values()) + abs(states.forward["D"]) ** 2
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("variant", ["nested-2b", "blocked-2c", "two-path"])
def test_backward_is_forward_of_reversed_graph(variant):
    from nestedmzi.tsvf import _propagate

    g = build_danan_setup(variant)
    assert backward_state(g) == _propagate(reversed_conjugate(g))[0]
    # reversing twice restores the original structure
    twice = reversed_conjugate(reversed_conjugate(g))
    assert {s.key for s in twice.segments} == {s.key for s in g.segments}


@settings(max_examples=25, deadline=None)
@given(phase=st.floats(0, 2 * math.pi), variant=st.sampled_from(["nested-2b", "blocked-2c", "two-path"]))
def test_source_phase_leaves_overlap_unchanged(phase, variant):
    from nestedmzi.tsvf import _propagate

    g = build_danan_setup(variant)
    plain = _propagate(g)[0]
    turned = _propagate(g, complex(math.cos(phase), math.sin(phase)))[0]
    bwd = backward_state(g)
    for m in map(str, g.mirrors()):
        assert abs(turned[m]) * abs(bwd[m]) == pytest.approx(abs(plain[m]) * abs(bwd[m]), abs=1e-15)
