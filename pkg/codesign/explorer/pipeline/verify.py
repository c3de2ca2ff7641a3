"""
Re-check a finished run: every candidate in report.json must, after
reloading its model.json, estimate within its target window and fit the
device budget.
"""

from pathlib import Path
from typing import Any, Dict, List, Union

from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.estimates import dnn_latency, dnn_resource
from codesign.explorer.dnn_model.model import dnn_from_dict
from codesign.explorer.exceptions import CodesignError, ConfigError
from codesign.explorer.ip_catalog.characterization import load_characterization
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.utils.file_tools import read_json

logger = setup_logger("verify", module="pipeline")

# Relative slack on the recomputed latency, for float round-trips through JSON
LATENCY_TOLERANCE = 1e-9


def _check_candidate(root: Path, target: Dict[str, Any], entry: Dict[str, Any], device: DeviceSpec,
                     char) -> List[str]:
    where = f"{target['name']}/{entry['bundle']}/dnn_{entry['index']}"
    try:
        model = dnn_from_dict(read_json(root / entry["model"]))
    except (CodesignError, KeyError, TypeError, ValueError) as e:
        return [f"{where}: cannot reload model ({e})"]

    problems = []
    latency = dnn_latency(model, device, char).ms
    gap = abs(latency - target["latency_ms"])
    if gap >= target["epsilon_ms"] * (1 + LATENCY_TOLERANCE):
        problems.append(f"{where}: latency {latency:.4f} ms is {gap:.4f} ms from target "
                        f"{target['latency_ms']:.4f} ms (epsilon {target['epsilon_ms']:.4f})")
    resource = dnn_resource(model, char)
    if not resource.fits_within(device.budget):
        problems.append(f"{where}: resources exceed the budget on {resource.binding_resource(device.budget)}")
    return problems


def verify_report(path: Union[str, Path]) -> List[str]:
    """
    Recompute latency and resources for every candidate of a run.

    Args:
        path: report.json of a pipeline run

    Returns:
        List[str]: One message per violation; empty when the run is consistent

    Raises:
        ConfigError: If the report cannot be read
    """
    path = Path(path)
    report = read_json(path)
    if not isinstance(report, dict) or "targets" not in report:
        raise ConfigError(f"{path} is not a run report")
    root = path.parent
    base = DeviceSpec.from_dict(report["device"])
    char = load_characterization(report.get("char_table"))

    problems: List[str] = []
    checked = 0
    for target in report["targets"]:
        device = DeviceSpec.from_dict({**base.to_dict(), "clock_mhz": target["clock_mhz"]})
        if not target["candidates"]:
            problems.append(f"{target['name']}: no accepted DNN")
        for entry in target["candidates"]:
            checked += 1
            problems.extend(_check_candidate(root, target, entry, device, char))

    for p in problems:
        logger.warning(p)
    logger.info(f"Verified {checked} candidates from {path}: {len(problems)} problems")
    return problems
