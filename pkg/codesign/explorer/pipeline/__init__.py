"""Run configuration, the end-to-end co-design run and report verification."""

from .config_loader import RunConfig, TargetSpec, load_run_config, parse_target
from .runner import (
    EXIT_CONFIG_ERROR,
    EXIT_MISSING_TARGET,
    EXIT_OK,
    REPORT_FILE,
    RunContext,
    RunReport,
    build_evaluator,
    export_candidate,
    prepare,
    run_calibration,
    run_evaluation,
    run_pipeline,
    run_searches,
    search_jobs,
    target_device,
)
from .verify import verify_report

__all__ = [
    "RunConfig",
    "TargetSpec",
    "load_run_config",
    "parse_target",
    "EXIT_CONFIG_ERROR",
    "EXIT_MISSING_TARGET",
    "EXIT_OK",
    "REPORT_FILE",
    "RunContext",
    "RunReport",
    "build_evaluator",
    "export_candidate",
    "prepare",
    "run_calibration",
    "run_evaluation",
    "run_pipeline",
    "run_searches",
    "search_jobs",
    "target_device",
    "verify_report",
]
