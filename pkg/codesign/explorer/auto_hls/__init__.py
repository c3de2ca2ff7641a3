"""Code generation: buffer/call planning, C emission and estimation reports."""

from .planner import BufferSpec, CallSpec, CodegenPlan, InstanceDecl, PlanOptions, Segment, WeightLoad, plan
from .emitter import MANIFEST_FILE, TOP_FILE, TOP_FUNCTION, emit, write_source_tree
from .report import EstimateReport, estimate_report, report_to_json

__all__ = [
    "BufferSpec",
    "CallSpec",
    "CodegenPlan",
    "InstanceDecl",
    "PlanOptions",
    "Segment",
    "WeightLoad",
    "plan",
    "MANIFEST_FILE",
    "TOP_FILE",
    "TOP_FUNCTION",
    "emit",
    "write_source_tree",
    "EstimateReport",
    "estimate_report",
    "report_to_json",
]
