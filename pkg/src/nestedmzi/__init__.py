"""Wave-optics model of a nested Mach-Zehnder interferometer with oscillating
mirrors, read out by a quad-cell detector, next to a two-state-vector
overlap predictor for the same graph."""

__version__ = "0.1.0"

from .beams import PathContribution, displacement_at_distance, mirror_angle_at, tilt_from_piezo, trace_paths
from .detector import (
    DetectorSample,
    QuadratureSpec,
    calibrate_misalignment,
    closed_form_single_gaussian,
    field_at_detector,
    qcd_difference_signal,
    visibility,
)
from .model import (
    InterferometerGraph,
    MirrorId,
    MirrorSpec,
    ScenarioVariant,
    SetupParams,
    big_loop_reference,
    build_danan_setup,
    validate_graph,
)
from .spectrum import (
    Band,
    DisturbanceSpec,
    PowerSpectrum,
    SamplingSpec,
    TimeSeries,
    Tone,
    apply_window,
    band_normalize,
    dominant_peak,
    peak_heights,
    power_spectrum,
    simulate_time_series,
)
from .tsvf import backward_state, compare_predictions, forward_state, overlap_set, weak_value
from .scenario import ScenarioConfig, load_scenario, parse_scenario, shipped_scenario_path

__all__ = [
    "Band", "DetectorSample", "DisturbanceSpec", "InterferometerGraph", "MirrorId",
    "MirrorSpec", "PathContribution", "PowerSpectrum", "QuadratureSpec", "SamplingSpec",
    "ScenarioConfig", "ScenarioVariant", "SetupParams", "TimeSeries", "Tone",
    "apply_window", "backward_state", "band_normalize", "big_loop_reference",
    "build_danan_setup", "calibrate_misalignment", "closed_form_single_gaussian",
    "compare_predictions", "displacement_at_distance", "dominant_peak",
    "field_at_detector", "forward_state", "load_scenario", "mirror_angle_at",
    "overlap_set", "parse_scenario", "peak_heights", "power_spectrum",
    "qcd_difference_signal", "shipped_scenario_path", "simulate_time_series",
    "tilt_from_piezo", "trace_paths", "validate_graph", "visibility", "weak_value",
]
