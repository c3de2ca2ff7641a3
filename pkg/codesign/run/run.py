#!/usr/bin/env python3
"""
Command line for the co-design explorer.

    codesign pipeline --config run.json --out results
    codesign enumerate-bundles | calibrate | evaluate | search | codegen | simulate
    codesign verify --report results/report.json

Exit status: 0 on success, 1 when a target has no accepted DNN (or verify
finds a violation), 2 on configuration errors.
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from codesign.explorer.auto_hls.emitter import write_source_tree
from codesign.explorer.auto_hls.planner import PlanOptions, plan
from codesign.explorer.auto_hls.report import estimate_report, report_to_json
from codesign.explorer.bundle_arch.enumeration import bundles_to_json
from codesign.explorer.dnn_model.model import dnn_from_dict
from codesign.explorer.exceptions import CodesignError, ConfigError
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.pipeline.config_loader import RunConfig, load_run_config
from codesign.explorer.pipeline.runner import (
    EXIT_CONFIG_ERROR,
    EXIT_MISSING_TARGET,
    EXIT_OK,
    load_or_calibrate,
    prepare,
    run_evaluation,
    run_pipeline,
    run_search_rounds,
    sim_settings,
    summarize_targets,
    target_device,
)
from codesign.explorer.pipeline.verify import verify_report
from codesign.explorer.tile_sim.simulator import simulate_dnn, trace_to_json
from codesign.explorer.utils.file_tools import SCHEMA_VERSION, read_json, write_json

logger = setup_logger("run", module="run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codesign", description="Hardware-aware DNN/accelerator co-design")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run config JSON (defaults apply to missing keys)")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument("--char-table", help="IP characterization table JSON")
    common.add_argument("--progress", action="store_true", help="Show progress bars on stderr")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("enumerate-bundles", parents=[common], help="Write the candidate bundle list")
    sub.add_parser("calibrate", parents=[common], help="Fit bundle and DNN models against the tile simulator")

    p = sub.add_parser("evaluate", parents=[common], help="Coarse and fine bundle evaluation with selection")
    p.add_argument("--calibration", help="calibration.json from an earlier run")

    p = sub.add_parser("search", parents=[common], help="Initialize and search DNNs for given bundles")
    p.add_argument("--bundle", type=int, nargs="+", required=True, help="Bundle ids to search with")
    p.add_argument("--calibration", help="calibration.json from an earlier run")
    target = p.add_mutually_exclusive_group()
    target.add_argument("--fps", type=float, help="Single target in frames per second")
    target.add_argument("--latency-ms", type=float, help="Single target latency in ms")

    p = sub.add_parser("codegen", parents=[common], help="Generate the accelerator source for a model")
    p.add_argument("--model", required=True, help="model.json of a DNN")
    p.add_argument("--reallocate-buffers", action="store_true", help="Share one on-chip pool between edges")
    p.add_argument("--fuse-elementwise", action="store_true", help="Fold normalization/activation into calls")

    p = sub.add_parser("simulate", parents=[common], help="Run the tile simulator on a model")
    p.add_argument("--model", required=True, help="model.json of a DNN")

    sub.add_parser("pipeline", parents=[common], help="Run all co-design steps end to end")

    p = sub.add_parser("verify", help="Re-check every DNN listed in a run report")
    p.add_argument("--report", required=True, help="report.json of a pipeline run")
    return parser


def cli_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Config fragments for the flags that were given."""
    overrides: Dict[str, Any] = {}
    if args.out:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.char_table:
        overrides["char_table"] = args.char_table
    if getattr(args, "fps", None) is not None:
        overrides["targets"] = [{"fps": args.fps}]
    elif getattr(args, "latency_ms", None) is not None:
        overrides["targets"] = [{"latency_ms": args.latency_ms}]
    if getattr(args, "reallocate_buffers", False) or getattr(args, "fuse_elementwise", False):
        overrides["codegen"] = {
            "reallocate_buffers": args.reallocate_buffers,
            "fuse_elementwise": args.fuse_elementwise,
        }
    return overrides


def cmd_enumerate_bundles(cfg: RunConfig, args) -> int:
    ctx = prepare(cfg, args.progress)
    path = write_json(bundles_to_json(ctx.bundles), ctx.out / "bundles.json")
    for b in ctx.bundles:
        print(f"{b.id:3d}  {b.label}")
    logger.info(f"Wrote {len(ctx.bundles)} bundles to {path}")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, args) -> int:
    ctx = prepare(cfg, args.progress)
    result = load_or_calibrate(ctx)
    print(f"calibrated {len(result.fits)} bundles, max held-out error {result.max_holdout_error:.2%}, "
          f"phi={result.dnn.phi:.4f} lat_dm={result.dnn.lat_dm:.0f}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    ctx = prepare(cfg, args.progress)
    calibration = load_or_calibrate(ctx, args.calibration)
    selection = run_evaluation(ctx, calibration.apply(ctx.bundles), calibration.dnn)
    if not selection.ranked:
        print("no candidates")
        return EXIT_MISSING_TARGET
    print("selected: " + ", ".join(f"{b.id}:{b.label}@pf{b.pf}" for b in selection.ranked))
    return EXIT_OK


def cmd_search(cfg: RunConfig, args) -> int:
    ctx = prepare(cfg, args.progress)
    calibration = load_or_calibrate(ctx, args.calibration)
    by_id = {b.id: b for b in calibration.apply(ctx.bundles)}
    unknown = [i for i in args.bundle if i not in by_id]
    if unknown:
        raise ConfigError(f"Unknown bundle ids {unknown}; valid ids are {min(by_id)}..{max(by_id)}")
    outcomes, _, _ = run_search_rounds(ctx, [by_id[i] for i in args.bundle], calibration)
    sections, _ = summarize_targets(ctx, outcomes)
    write_json({"schema_version": SCHEMA_VERSION, "seed": cfg.seed, "targets": sections},
               ctx.out / "search_report.json")
    for s in sections:
        print(f"{s['name']}: {len(s['candidates'])} DNNs ({s['status']})")
    return EXIT_OK if all(s["candidates"] for s in sections) else EXIT_MISSING_TARGET


def _load_model(path: str):
    try:
        return dnn_from_dict(read_json(path))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{path} is not a model description: {e!r}")


def cmd_codegen(cfg: RunConfig, args) -> int:
    ctx = prepare(cfg, args.progress)
    model = _load_model(args.model)
    device = target_device(cfg.device, cfg.targets[0])
    options = PlanOptions(cfg.codegen.reallocate_buffers, cfg.codegen.fuse_elementwise)
    estimate = report_to_json(estimate_report(model, device, ctx.char, sim_settings(cfg)))
    write_json(estimate, ctx.out / "estimate.json")
    files = write_source_tree(plan(model, device, ctx.char, options), ctx.out / "src", estimates=estimate)
    print(f"wrote {len(files)} files to {ctx.out / 'src'}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    ctx = prepare(cfg, args.progress)
    model = _load_model(args.model)
    device = target_device(cfg.device, cfg.targets[0])
    trace = simulate_dnn(model, device, ctx.char, sim_settings(cfg))
    write_json(trace_to_json(trace), ctx.out / "trace.json")
    print(f"{model.bundle.label} n_rep={model.n_rep} pf={model.pf}: {trace.total_cycles} cycles, "
          f"{device.cycles_to_ms(trace.total_cycles):.3f} ms @ {device.clock_mhz:g} MHz")
    return EXIT_OK


def cmd_pipeline(cfg: RunConfig, args) -> int:
    report = run_pipeline(cfg, progress=args.progress)
    for section in report.data["targets"]:
        print(f"{section['name']}: {len(section['candidates'])} DNNs ({section['status']})")
    print(f"report: {report.path}")
    return report.exit_code


def cmd_verify(args) -> int:
    problems = verify_report(args.report)
    for p in problems:
        print(p)
    if problems:
        return EXIT_MISSING_TARGET
    print("all candidates verified")
    return EXIT_OK


COMMANDS = {
    "enumerate-bundles": cmd_enumerate_bundles,
    "calibrate": cmd_calibrate,
    "evaluate": cmd_evaluate,
    "search": cmd_search,
    "codegen": cmd_codegen,
    "simulate": cmd_simulate,
    "pipeline": cmd_pipeline,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.info(f"Starting codesign {args.command}")
    try:
        if args.command == "verify":
            return cmd_verify(args)
        cfg = load_run_config(Path(args.config) if args.config else None, overrides=cli_overrides(args))
        return COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except CodesignError as e:
        logger.exception(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING_TARGET


if __name__ == "__main__":
    sys.exit(main())
