"""
End-to-end co-design run.

    step 1  calibrate the bundle and DNN models against the tile simulator
    step 2  coarse evaluation, Pareto selection, fine evaluation
    step 3  per target and selected bundle: initialize, search, then
            estimate and generate code for every accepted DNN; with
            search.rounds > 1 the accepted DNNs are simulated, the models
            refitted and the searches restarted from their best DNNs

Every step is also exposed on its own for the CLI subcommands.
"""

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from codesign.explorer.auto_hls.emitter import write_source_tree
from codesign.explorer.auto_hls.planner import PlanOptions, plan
from codesign.explorer.auto_hls.report import estimate_report, report_to_json
from codesign.explorer.bundle_arch.bundle import Bundle
from codesign.explorer.bundle_arch.enumeration import bundles_to_json, enumerate_bundles
from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.estimates import CostModels
from codesign.explorer.dnn_model.initialization import InitSettings, initialize_dnn
from codesign.explorer.dnn_model.model import DnnCalibration, DnnModel, dnn_to_dict
from codesign.explorer.evaluation.bundle_evaluation import EvalSettings, coarse_evaluate, fine_evaluate
from codesign.explorer.evaluation.evaluators import (
    AccuracyEvaluator,
    ExternalCommandEvaluator,
    SyntheticProxyEvaluator,
    load_proxy_coefficients,
)
from codesign.explorer.evaluation.records import EvalRecord, records_to_csv, records_to_json
from codesign.explorer.evaluation.selection import rank_bundles, select_top_bundles
from codesign.explorer.exceptions import CodesignError, ModelError, PlanningError
from codesign.explorer.ip_catalog.characterization import IpCharacterization, load_characterization
from codesign.explorer.ip_catalog.templates import builtin_templates
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.pipeline.config_loader import RunConfig, TargetSpec
from codesign.explorer.scd_search.search import SearchConfig, SearchResult, scd_search
from codesign.explorer.tile_sim.calibration import CalibrationResult, CalibrationSettings, calibrate, recalibrate
from codesign.explorer.tile_sim.simulator import SimSettings
from codesign.explorer.utils.file_tools import SCHEMA_VERSION, ensure_directory_exists, read_json, write_json, write_text

logger = setup_logger("runner", module="pipeline")

REPORT_FILE = "report.json"
EXIT_OK = 0
EXIT_MISSING_TARGET = 1
EXIT_CONFIG_ERROR = 2


@dataclass
class RunContext:
    cfg: RunConfig
    char: IpCharacterization
    bundles: List[Bundle]
    out: Path
    progress: bool = False


@dataclass(frozen=True)
class SelectionResult:
    coarse: Tuple[EvalRecord, ...]
    fine: Tuple[EvalRecord, ...]
    selected: Tuple[int, ...]
    ranked: Tuple[Bundle, ...]


@dataclass(frozen=True)
class SearchJob:
    target: TargetSpec
    bundle: Bundle
    seed: int
    start: Optional[DnnModel] = None
    round: int = 0


@dataclass
class JobOutcome:
    job: SearchJob
    result: Optional[SearchResult] = None
    error: Optional[str] = None


@dataclass
class RunReport:
    data: Dict[str, Any]
    exit_code: int
    path: Optional[Path] = None
    candidates: int = 0


def prepare(cfg: RunConfig, progress: bool = False) -> RunContext:
    char = load_characterization(cfg.char_table)
    bundles = enumerate_bundles(builtin_templates())
    out = ensure_directory_exists(cfg.output_dir, "output directory")
    return RunContext(cfg=cfg, char=char, bundles=bundles, out=out, progress=progress)


def target_device(device: DeviceSpec, target: TargetSpec) -> DeviceSpec:
    return replace(device, clock_mhz=target.clock_mhz)


def sim_settings(cfg: RunConfig) -> SimSettings:
    return SimSettings(buffer_depth=cfg.calibration.buffer_depth, dm_sync_cycles=cfg.calibration.dm_sync_cycles)


def calibration_settings(cfg: RunConfig) -> CalibrationSettings:
    c = cfg.calibration
    return CalibrationSettings(
        samples_per_bundle=c.samples_per_bundle,
        holdout_per_bundle=c.holdout_per_bundle,
        channels=c.channels,
        tile=cfg.tile,
        quant=cfg.quant,
        dnn_samples=c.dnn_samples,
        seed=cfg.seed,
        sim=sim_settings(cfg),
    )


def build_evaluator(cfg: RunConfig) -> AccuracyEvaluator:
    ev = cfg.evaluator
    if ev.kind == "external":
        return ExternalCommandEvaluator(ev.command, timeout=ev.timeout, retries=ev.retries)
    return SyntheticProxyEvaluator(seed=cfg.seed, coefficients=load_proxy_coefficients(ev.proxy_config))


def run_calibration(ctx: RunContext) -> CalibrationResult:
    logger.info(f"Step 1: calibrating {len(ctx.bundles)} bundles against the tile simulator")
    result = calibrate(ctx.bundles, ctx.cfg.device, ctx.char, calibration_settings(ctx.cfg), progress=ctx.progress)
    write_json(result.to_dict(), ctx.out / "calibration.json")
    logger.info(f"Calibration done: max held-out error {result.max_holdout_error:.2%}")
    return result


def load_or_calibrate(ctx: RunContext, path: Optional[Union[str, Path]] = None) -> CalibrationResult:
    """Reuse a calibration.json from an earlier run, or calibrate now."""
    if path is None:
        return run_calibration(ctx)
    logger.info(f"Using calibration from {path}")
    return CalibrationResult.from_dict(read_json(path))


def _best_pf(bundle_id: int, coarse: Sequence[EvalRecord], device: DeviceSpec) -> Optional[int]:
    """Fastest coarse configuration of the bundle that fits the device."""
    fitting = [r for r in coarse if r.bundle_id == bundle_id and r.resource.fits_within(device.budget)]
    if not fitting:
        return None
    return min(fitting, key=lambda r: (r.latency_ms, -r.pf)).pf


def run_evaluation(ctx: RunContext, bundles: Sequence[Bundle], dnn_calib: DnnCalibration,
                   evaluator: Optional[AccuracyEvaluator] = None) -> SelectionResult:
    cfg = ctx.cfg
    ev = cfg.evaluation
    evaluator = evaluator or build_evaluator(cfg)
    settings = EvalSettings(
        input_dims=cfg.input_dims,
        tile=cfg.tile,
        quant=cfg.quant,
        method=ev.method,
        dnn_calib=dnn_calib,
        workers=cfg.workers,
        progress=ctx.progress,
    )
    band = ev.band_fraction * cfg.device.budget.dsp
    logger.info(f"Step 2: coarse evaluation of {len(bundles)} bundles over pf {list(ev.pf_set)}")
    coarse = coarse_evaluate(bundles, ev.pf_set, evaluator, cfg.device, ctx.char, settings)
    eval_dir = ctx.out / "evaluation"
    write_json(records_to_json(coarse), eval_dir / "coarse.json")
    write_text(records_to_csv(coarse), eval_dir / "coarse.csv")

    selected = select_top_bundles(coarse, band, top_n=ev.top_n, budget=cfg.device.budget)
    by_id = {b.id: b for b in bundles}
    configured = []
    for bundle_id in selected:
        pf = _best_pf(bundle_id, coarse, cfg.device)
        if pf is not None:
            configured.append(by_id[bundle_id].configure(pf, cfg.quant))

    fine: List[EvalRecord] = []
    ranked: List[Bundle] = []
    if configured:
        fine = fine_evaluate(configured, ev.rep_counts, ev.activations, evaluator, cfg.device, ctx.char, settings)
        order = rank_bundles(fine, band)
        ranked = [b for bid in order for b in configured if b.id == bid]
        ranked += [b for b in configured if b.id not in order]
    else:
        logger.warning("No bundle survived the coarse selection; there are no candidates to search")
    write_json(records_to_json(fine), eval_dir / "fine.json")
    write_text(records_to_csv(fine), eval_dir / "fine.csv")
    logger.info(f"Selected bundles {selected}; search order {[b.id for b in ranked]}")
    return SelectionResult(tuple(coarse), tuple(fine), tuple(selected), tuple(ranked))


StartKey = Tuple[str, int]


def search_jobs(targets: Sequence[TargetSpec], bundles: Sequence[Bundle], seed: Union[int, Sequence[int]],
                starts: Optional[Dict[StartKey, DnnModel]] = None, round_index: int = 0) -> List[SearchJob]:
    """One job per (target, bundle) with a seed derived from (seed, job index)."""
    starts = starts or {}
    pairs = [(t, b) for t in targets for b in bundles]
    children = np.random.SeedSequence(seed).spawn(len(pairs)) if pairs else []
    return [
        SearchJob(t, b, int(child.generate_state(1)[0]), starts.get((t.name, b.id)), round_index)
        for (t, b), child in zip(pairs, children)
    ]


def run_search_job(job: SearchJob, ctx: RunContext, dnn_calib: DnnCalibration) -> JobOutcome:
    cfg = ctx.cfg
    device = target_device(cfg.device, job.target)
    settings = InitSettings(cfg.input_dims, cfg.tile, n_rep=cfg.init_n_rep, f_ds=cfg.init_f_ds)
    try:
        if job.start is not None:
            initial = replace(job.start, bundle=job.start.bundle.with_calibration(job.bundle.calib), calib=dnn_calib)
        else:
            initial = initialize_dnn(job.bundle, device, cfg.quant, settings, ctx.char, dnn_calib)
        search_cfg = SearchConfig(
            lat_targ=job.target.latency_ms,
            epsilon=job.target.epsilon_ms,
            res_max=device.budget,
            k=cfg.search.k,
            seed=job.seed,
            max_iters=cfg.search.max_iters,
            moves=cfg.search.moves,
        )
        return JobOutcome(job, result=scd_search(initial, search_cfg, CostModels(device, ctx.char)))
    except CodesignError as e:
        logger.error(f"Search for {job.bundle.label} at target {job.target.name} failed: {e}")
        return JobOutcome(job, error=str(e))


def run_searches(ctx: RunContext, bundles: Sequence[Bundle], dnn_calib: DnnCalibration,
                 starts: Optional[Dict[StartKey, DnnModel]] = None, round_index: int = 0) -> List[JobOutcome]:
    seed = ctx.cfg.seed if round_index == 0 else [ctx.cfg.seed, round_index]
    jobs = search_jobs(ctx.cfg.targets, bundles, seed, starts, round_index)
    logger.info(f"Step 3: {len(jobs)} searches over {len(ctx.cfg.targets)} targets (round {round_index})")
    with ThreadPoolExecutor(max_workers=max(1, ctx.cfg.workers)) as pool:
        futures = [pool.submit(run_search_job, job, ctx, dnn_calib) for job in jobs]
        return [f.result() for f in tqdm(futures, desc="search", file=sys.stderr, disable=not ctx.progress)]


def recalibrated_model(m: DnnModel, calibration: CalibrationResult) -> DnnModel:
    bundle = m.bundle.with_calibration(calibration.calibration_for(m.bundle.id))
    return replace(m, bundle=bundle, calib=calibration.dnn)


def best_starts(ctx: RunContext, outcomes: Sequence[JobOutcome],
                calibration: CalibrationResult) -> Dict[StartKey, DnnModel]:
    """Per (target, bundle), the accepted model closest to the target under the refitted estimates."""
    starts: Dict[StartKey, DnnModel] = {}
    for outcome in outcomes:
        if outcome.result is None or not outcome.result.models:
            continue
        target = outcome.job.target
        costs = CostModels(target_device(ctx.cfg.device, target), ctx.char)
        refitted = [recalibrated_model(m, calibration) for m in outcome.result.models]
        starts[(target.name, outcome.job.bundle.id)] = min(
            refitted, key=lambda m: abs(costs.est_lat_ms(m) - target.latency_ms)
        )
    return starts


def run_search_rounds(ctx: RunContext, bundles: Sequence[Bundle],
                      calibration: CalibrationResult) -> Tuple[List[JobOutcome], CalibrationResult, List[Dict[str, Any]]]:
    """
    Search every (target, bundle) pair for cfg.search.rounds rounds.

    Between rounds the accepted DNNs are simulated, the calibration is
    refitted on them and each search restarts from its best model of the
    previous round. A pair keeps the latest round that accepted a model.

    Returns:
        Tuple: Outcomes per pair, the final calibration and one summary per round run
    """
    latest: Dict[StartKey, JobOutcome] = {}
    history: List[Dict[str, Any]] = []
    starts: Optional[Dict[StartKey, DnnModel]] = None
    for round_index in range(ctx.cfg.search.rounds):
        calibration_file = "calibration.json"
        if round_index > 0:
            if not history[-1]["accepted"]:
                logger.warning(f"Round {round_index - 1} accepted no DNN; stopping after {round_index} rounds")
                break
            accepted = [m for o in latest.values() if o.result is not None for m in o.result.models]
            calibration = recalibrate(accepted, calibration, ctx.cfg.device, ctx.char, calibration_settings(ctx.cfg))
            calibration_file = f"calibration_round_{round_index}.json"
            write_json(calibration.to_dict(), ctx.out / calibration_file)
            starts = best_starts(ctx, list(latest.values()), calibration)

        outcomes = run_searches(ctx, calibration.apply(bundles), calibration.dnn, starts, round_index)
        for outcome in outcomes:
            key = (outcome.job.target.name, outcome.job.bundle.id)
            if key not in latest or (outcome.result is not None and outcome.result.models):
                latest[key] = outcome
        history.append({
            "round": round_index,
            "calibration": calibration_file,
            "dnn": calibration.dnn.to_dict(),
            "accepted": sum(len(o.result.models) for o in outcomes if o.result is not None),
        })
    return list(latest.values()), calibration, history


def export_candidate(ctx: RunContext, target: TargetSpec, model: DnnModel, index: int) -> Dict[str, Any]:
    """Write model.json, estimate.json and the source tree of one accepted DNN."""
    cfg = ctx.cfg
    device = target_device(cfg.device, target)
    rel = Path("targets") / target.name / model.bundle.label / f"dnn_{index}"
    folder = ctx.out / rel
    write_json(dnn_to_dict(model), folder / "model.json")

    sim = sim_settings(cfg) if cfg.codegen.simulate else None
    estimate = report_to_json(estimate_report(model, device, ctx.char, sim))
    write_json(estimate, folder / "estimate.json")

    entry: Dict[str, Any] = {
        "bundle": model.bundle.label,
        "bundle_id": model.bundle.id,
        "index": index,
        "n_rep": model.n_rep,
        "pf": model.pf,
        "latency_ms": estimate["latency"]["ms"],
        "resource": estimate["resource"],
        "utilization_pct": estimate["utilization_pct"],
        "model": (rel / "model.json").as_posix(),
        "estimate": (rel / "estimate.json").as_posix(),
        "src": None,
        "codegen_error": None,
    }
    if cfg.codegen.enabled:
        options = PlanOptions(cfg.codegen.reallocate_buffers, cfg.codegen.fuse_elementwise)
        try:
            write_source_tree(plan(model, device, ctx.char, options), folder / "src", estimates=estimate)
            entry["src"] = (rel / "src").as_posix()
        except PlanningError as e:
            logger.error(f"Code generation for {model.bundle.label} dnn_{index} failed at buffer {e.buffer_name}: {e}")
            entry["codegen_error"] = str(e)
    return entry


def summarize_targets(ctx: RunContext, outcomes: Sequence[JobOutcome]) -> Tuple[List[Dict[str, Any]], int]:
    sections = []
    total = 0
    for target in ctx.cfg.targets:
        candidates, failures, partial = [], [], []
        for outcome in outcomes:
            if outcome.job.target != target:
                continue
            if outcome.error is not None:
                failures.append({"bundle": outcome.job.bundle.label, "error": outcome.error})
                continue
            trace_path = Path("targets") / target.name / outcome.job.bundle.label / "search_trace.json"
            write_json({
                "schema_version": SCHEMA_VERSION,
                "seed": outcome.job.seed,
                "round": outcome.job.round,
                "complete": outcome.result.complete,
                "iterations": outcome.result.iterations,
                "steps": [s.to_dict() for s in outcome.result.trace],
            }, ctx.out / trace_path)
            if not outcome.result.complete:
                partial.append(outcome.job.bundle.label)
            for k, model in enumerate(outcome.result.models):
                try:
                    candidates.append(export_candidate(ctx, target, model, k))
                except ModelError as e:
                    failures.append({"bundle": model.bundle.label, "error": str(e)})
        total += len(candidates)
        status = "ok" if candidates else "no_candidates"
        if not candidates:
            logger.warning(f"Target {target.name} ({target.latency_ms:.1f} ms) has no accepted DNN")
        sections.append({
            **target.to_dict(),
            "status": status,
            "candidates": candidates,
            "partial_searches": partial,
            "failures": failures,
        })
    return sections, total


def run_pipeline(cfg: RunConfig, progress: bool = False, evaluator: Optional[AccuracyEvaluator] = None) -> RunReport:
    """
    Run all three co-design steps and write every artifact under cfg.output_dir.

    Args:
        cfg: Validated run configuration
        progress: Show progress bars on stderr
        evaluator: Accuracy evaluator; built from cfg.evaluator when omitted

    Returns:
        RunReport: The report document and the exit code (0 when every
        target has at least one accepted DNN, 1 otherwise)
    """
    ctx = prepare(cfg, progress)
    write_json(bundles_to_json(ctx.bundles), ctx.out / "bundles.json")

    calibration = run_calibration(ctx)
    calibrated = calibration.apply(ctx.bundles)
    selection = run_evaluation(ctx, calibrated, calibration.dnn, evaluator)
    outcomes: List[JobOutcome] = []
    rounds: List[Dict[str, Any]] = []
    if selection.ranked:
        outcomes, calibration, rounds = run_search_rounds(ctx, selection.ranked, calibration)
    sections, total = summarize_targets(ctx, outcomes)

    exit_code = EXIT_OK if all(s["candidates"] for s in sections) else EXIT_MISSING_TARGET
    data = {
        "schema_version": SCHEMA_VERSION,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "seed": cfg.seed,
        "char_table": cfg.char_table,
        "device": cfg.device.to_dict(),
        "calibration": {
            "file": rounds[-1]["calibration"] if rounds else "calibration.json",
            "max_holdout_error": calibration.max_holdout_error,
            "dnn": calibration.dnn.to_dict(),
            "rounds": rounds,
        },
        "selection": {
            "coarse_selected": list(selection.selected),
            "search_order": [b.label for b in selection.ranked],
            "no_candidates": not selection.ranked,
        },
        "targets": sections,
        "exit_status": exit_code,
    }
    path = write_json(data, ctx.out / REPORT_FILE)
    logger.info(f"Pipeline finished: {total} DNNs over {len(sections)} targets, report at {path}")
    return RunReport(data=data, exit_code=exit_code, path=path, candidates=total)
