"""
Coarse- and fine-grained bundle evaluation.

Coarse: one small DNN per (bundle, pf), either a fixed head and tail around
one bundle or a plain replication. Accuracy does not depend on pf, so it
is scored once per bundle and shared by that bundle's records.

Fine: replicated DNNs over a grid of replication counts and activation
clips for the bundles that survived the coarse selection.
"""

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from tqdm import tqdm

from codesign.explorer.bundle_arch.bundle import Bundle
from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.estimates import dnn_latency, dnn_resource
from codesign.explorer.dnn_model.model import (
    CONSTRUCTIONS,
    FIXED_HEAD_TAIL,
    NO_EXPANSION,
    PURE_REPLICATION,
    DnnCalibration,
    DnnModel,
)
from codesign.explorer.evaluation.evaluators import AccuracyEvaluator, TaskDescriptor
from codesign.explorer.evaluation.records import EvalRecord
from codesign.explorer.exceptions import ConfigError, DomainError, EvaluatorError, ModelError
from codesign.explorer.ip_catalog.characterization import IpCharacterization
from codesign.explorer.ip_catalog.core_types import ACTIVATION_CLIPS, FeatureMap, QuantScheme, TileShape
from codesign.explorer.logger_utils.logger_utils import setup_logger

logger = setup_logger("bundle_evaluation", module="evaluation")

DEFAULT_REP_COUNTS = (1, 2, 3)


@dataclass(frozen=True)
class EvalSettings:
    input_dims: FeatureMap = FeatureMap(64, 64, 32)
    tile: TileShape = TileShape(8, 8, 8)
    quant: QuantScheme = QuantScheme()
    task: TaskDescriptor = field(default_factory=TaskDescriptor)
    method: str = FIXED_HEAD_TAIL
    dnn_calib: DnnCalibration = field(default_factory=DnnCalibration)
    workers: int = 4
    progress: bool = False


def build_eval_dnn(bundle: Bundle, method: str, reps: int, input_dims: FeatureMap, tile: TileShape,
                   dnn_calib: DnnCalibration = DnnCalibration()) -> DnnModel:
    """
    Evaluation DNN for a configured bundle.

    fixed_head_tail wraps a single replication in the fixed stem and
    classifier tail (reps is ignored); pure_replication stacks reps
    replications at constant dims.
    """
    if method not in CONSTRUCTIONS:
        raise ConfigError(f"Unknown evaluation method {method!r}")
    if reps < 1:
        raise ModelError(f"Replication count must be >= 1, got {reps}")
    n_rep = 1 if method == FIXED_HEAD_TAIL else reps
    boundaries = n_rep - 1
    return DnnModel(
        bundle=bundle,
        n_rep=n_rep,
        x_ds=(0,) * boundaries,
        f_ds=(2,) * boundaries,
        pi_ch=(NO_EXPANSION,) * boundaries,
        input_dims=input_dims,
        tile=tile,
        calib=dnn_calib,
        construction=method,
    )


def _score(evaluator: AccuracyEvaluator, model: DnnModel, task: TaskDescriptor) -> Tuple[Optional[float], Optional[str]]:
    try:
        return evaluator.evaluate(model, task), None
    except EvaluatorError as e:
        logger.warning(f"Evaluator failed on {model.bundle.label}: {e}")
        return None, str(e)


def score_models(models: Sequence[DnnModel], evaluator: AccuracyEvaluator, settings: EvalSettings,
                 desc: str = "evaluate") -> List[Tuple[Optional[float], Optional[str]]]:
    """Score models concurrently; results come back in input order."""
    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        futures = [pool.submit(_score, evaluator, m, settings.task) for m in models]
        return [f.result() for f in tqdm(futures, desc=desc, file=sys.stderr, disable=not settings.progress)]


def _record(model: DnnModel, device: DeviceSpec, char: IpCharacterization, accuracy: Optional[float],
            error: Optional[str]) -> EvalRecord:
    return EvalRecord(
        bundle_id=model.bundle.id,
        method=model.construction,
        pf=model.pf,
        quant=model.quant,
        latency_ms=dnn_latency(model, device, char).ms,
        resource=dnn_resource(model, char),
        accuracy=accuracy,
        n_rep=model.n_rep,
        error=error,
    )


def coarse_evaluate(bundles: Sequence[Bundle], pf_set: Sequence[int], evaluator: AccuracyEvaluator,
                    device: DeviceSpec, char: IpCharacterization,
                    settings: EvalSettings = EvalSettings()) -> List[EvalRecord]:
    """
    One record per (bundle, pf).

    Raises:
        ConfigError: If a pf is not an allowed candidate
    """
    bad = [pf for pf in pf_set if pf not in char.pf_candidates]
    if bad:
        raise ConfigError(f"Parallel factors {bad} are not in the allowed set {char.pf_candidates}")
    pfs = sorted(set(pf_set))

    grid = [
        [build_eval_dnn(b.configure(pf, settings.quant), settings.method, 1, settings.input_dims,
                        settings.tile, settings.dnn_calib) for pf in pfs]
        for b in bundles
    ]
    scores = score_models([row[0] for row in grid], evaluator, settings, desc="coarse evaluation")

    records = []
    for row, (accuracy, error) in zip(grid, scores):
        for model in row:
            records.append(_record(model, device, char, accuracy, error))
    logger.info(f"Coarse evaluation: {len(records)} records over {len(bundles)} bundles and pf {pfs}")
    return records


def fine_evaluate(bundles: Sequence[Bundle], rep_counts: Sequence[int], activations: Sequence[str],
                  evaluator: AccuracyEvaluator, device: DeviceSpec, char: IpCharacterization,
                  settings: EvalSettings = EvalSettings()) -> List[EvalRecord]:
    """
    Records over bundle x replication count x activation clip.

    Bundles must be configured; their pf is kept and their quantization's
    clip is replaced by each activation in turn.

    Raises:
        DomainError: If no bundles are given
    """
    if not bundles:
        raise DomainError("Fine evaluation needs at least one bundle")
    unknown = [a for a in activations if a not in ACTIVATION_CLIPS]
    if unknown:
        raise ConfigError(f"Unknown activation clips: {unknown}")

    models = []
    for b in bundles:
        for n in rep_counts:
            for clip in activations:
                variant = b.configure(b.pf, b.quant.with_clip(clip))
                models.append(build_eval_dnn(variant, PURE_REPLICATION, n, settings.input_dims,
                                             settings.tile, settings.dnn_calib))
    scores = score_models(models, evaluator, settings, desc="fine evaluation")
    records = [_record(m, device, char, acc, err) for m, (acc, err) in zip(models, scores)]
    logger.info(f"Fine evaluation: {len(records)} records over {len(bundles)} bundles")
    return records
