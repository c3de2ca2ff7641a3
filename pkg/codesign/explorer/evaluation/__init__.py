"""Coarse/fine bundle evaluation, Pareto selection and accuracy evaluators."""

from .records import EvalRecord, records_from_json, records_to_csv, records_to_json
from .evaluators import (
    AccuracyEvaluator,
    ExternalCommandEvaluator,
    ProxyCoefficients,
    SyntheticProxyEvaluator,
    TaskDescriptor,
    load_proxy_coefficients,
)
from .bundle_evaluation import EvalSettings, build_eval_dnn, coarse_evaluate, fine_evaluate
from .selection import (
    default_band_width,
    dominates,
    pareto_front,
    pareto_select,
    rank_bundles,
    select_top_bundles,
)

__all__ = [
    "EvalRecord",
    "records_from_json",
    "records_to_csv",
    "records_to_json",
    "AccuracyEvaluator",
    "ExternalCommandEvaluator",
    "ProxyCoefficients",
    "SyntheticProxyEvaluator",
    "TaskDescriptor",
    "load_proxy_coefficients",
    "EvalSettings",
    "build_eval_dnn",
    "coarse_evaluate",
    "fine_evaluate",
    "default_band_width",
    "dominates",
    "pareto_front",
    "pareto_select",
    "rank_bundles",
    "select_top_bundles",
]
