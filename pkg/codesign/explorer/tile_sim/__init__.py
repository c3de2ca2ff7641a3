"""Tile-pipeline simulator and calibration of the analytical models against it."""

from .simulator import (
    PipelineStage,
    SegmentSpan,
    SimSettings,
    SimTrace,
    TileTiming,
    check_trace,
    dnn_segments,
    simulate_bundle,
    simulate_dnn,
    simulate_stages,
    trace_to_json,
)
from .calibration import (
    BundleFit,
    CalibrationResult,
    CalibrationSample,
    CalibrationSettings,
    SampleConfig,
    calibrate,
    calibrate_dnn,
    fit_overlap_factors,
    generate_sample_configs,
)

__all__ = [
    "PipelineStage",
    "SegmentSpan",
    "SimSettings",
    "SimTrace",
    "TileTiming",
    "check_trace",
    "dnn_segments",
    "simulate_bundle",
    "simulate_dnn",
    "simulate_stages",
    "trace_to_json",
    "BundleFit",
    "CalibrationResult",
    "CalibrationSample",
    "CalibrationSettings",
    "SampleConfig",
    "calibrate",
    "calibrate_dnn",
    "fit_overlap_factors",
    "generate_sample_configs",
]
