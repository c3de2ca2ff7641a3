"""
Run configuration loading.

The user document is merged over run_config_sample.json (which holds every
default); keys the defaults do not know are rejected. Environment
variables from config/.env override the file, CLI flags override both.
"""

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv

from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.model import CONSTRUCTIONS
from codesign.explorer.exceptions import ConfigError
from codesign.explorer.ip_catalog.core_types import ACTIVATION_CLIPS, FeatureMap, QuantScheme, TileShape
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.scd_search.moves import Coordinate
from codesign.explorer.utils.file_tools import read_json
from codesign.explorer.utils.path_utils import resolve_path

logger = setup_logger("config_loader", module="pipeline")

MODULE_DIR = Path(__file__).resolve().parent
DEFAULTS_PATH = resolve_path("../config/run_config_sample.json", MODULE_DIR)
ENV_PATH = resolve_path("../config/.env", MODULE_DIR)

ENV_CHAR_TABLE = "CODESIGN_CHAR_TABLE"
ENV_OUTPUT_DIR = "CODESIGN_OUTPUT_DIR"
ENV_EVALUATOR_CMD = "CODESIGN_EVALUATOR_CMD"

EVALUATOR_KINDS = ("proxy", "external")
TARGET_KEYS = {"name", "fps", "latency_ms", "clock_mhz", "epsilon", "epsilon_fraction"}


@dataclass(frozen=True)
class TargetSpec:
    name: str
    latency_ms: float
    clock_mhz: float
    epsilon_ms: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "latency_ms": self.latency_ms,
            "clock_mhz": self.clock_mhz,
            "epsilon_ms": self.epsilon_ms,
        }


@dataclass(frozen=True)
class CalibrationConfig:
    samples_per_bundle: int = 8
    holdout_per_bundle: int = 8
    channels: int = 32
    dnn_samples: int = 4
    buffer_depth: int = 1
    dm_sync_cycles: int = 4096


@dataclass(frozen=True)
class EvaluationConfig:
    method: str = "fixed_head_tail"
    pf_set: Tuple[int, ...] = (1, 2, 4, 8, 16, 32)
    rep_counts: Tuple[int, ...] = (1, 2, 3)
    activations: Tuple[str, ...] = ACTIVATION_CLIPS
    top_n: int = 5
    band_fraction: float = 0.2


@dataclass(frozen=True)
class EvaluatorConfig:
    kind: str = "proxy"
    command: Optional[str] = None
    timeout: float = 600.0
    retries: int = 3
    proxy_config: Optional[str] = None


@dataclass(frozen=True)
class SearchSettings:
    k: int = 3
    max_iters: int = 1000
    moves: Tuple[Coordinate, ...] = (Coordinate.N, Coordinate.PI, Coordinate.X)
    rounds: int = 1


@dataclass(frozen=True)
class CodegenConfig:
    enabled: bool = True
    reallocate_buffers: bool = False
    fuse_elementwise: bool = False
    simulate: bool = True


@dataclass(frozen=True)
class RunConfig:
    device: DeviceSpec
    targets: Tuple[TargetSpec, ...]
    tile: TileShape
    input_dims: FeatureMap
    quant: QuantScheme
    init_n_rep: int = 3
    init_f_ds: int = 2
    search: SearchSettings = field(default_factory=SearchSettings)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    evaluator: EvaluatorConfig = field(default_factory=EvaluatorConfig)
    codegen: CodegenConfig = field(default_factory=CodegenConfig)
    char_table: Optional[str] = None
    output_dir: str = "codesign_output"
    seed: int = 0
    workers: int = 4


def _check_keys(data: Dict[str, Any], defaults: Dict[str, Any], where: str):
    for key, value in data.items():
        if key.startswith("_"):
            continue
        if key not in defaults:
            raise ConfigError(f"Unknown config key '{where}{key}'")
        if isinstance(defaults[key], dict) and key != "device":
            if not isinstance(value, dict):
                raise ConfigError(f"Config key '{where}{key}' must be an object")
            _check_keys(value, defaults[key], f"{where}{key}.")


def merge_config(defaults: Dict[str, Any], user: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive merge of user over defaults; lists and scalars are replaced whole."""
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_target(entry: Dict[str, Any], device: DeviceSpec) -> TargetSpec:
    """
    One latency target. fps converts to 1000 / fps ms.

    Raises:
        ConfigError: On unknown keys, both or neither of fps/latency_ms, or non-positive values
    """
    unknown = set(entry) - TARGET_KEYS
    if unknown:
        raise ConfigError(f"Unknown target keys: {sorted(unknown)}")
    has_fps, has_lat = entry.get("fps") is not None, entry.get("latency_ms") is not None
    if has_fps == has_lat:
        raise ConfigError(f"A target needs exactly one of fps and latency_ms: {entry}")
    if has_fps:
        fps = float(entry["fps"])
        if fps <= 0:
            raise ConfigError(f"fps must be > 0, got {fps}")
        latency = 1000.0 / fps
        default_name = f"fps_{entry['fps']}"
    else:
        latency = float(entry["latency_ms"])
        if latency <= 0:
            raise ConfigError(f"latency_ms must be > 0, got {latency}")
        default_name = f"lat_{entry['latency_ms']}ms"

    if entry.get("epsilon") is not None and entry.get("epsilon_fraction") is not None:
        raise ConfigError(f"Give epsilon or epsilon_fraction, not both: {entry}")
    if entry.get("epsilon") is not None:
        epsilon = float(entry["epsilon"])
    else:
        epsilon = float(entry.get("epsilon_fraction", 0.05)) * latency
    if epsilon <= 0:
        raise ConfigError(f"Target epsilon must be > 0, got {epsilon}")

    clock = float(entry.get("clock_mhz", device.clock_mhz))
    if clock <= 0:
        raise ConfigError(f"Target clock_mhz must be > 0, got {clock}")
    return TargetSpec(name=str(entry.get("name", default_name)), latency_ms=latency, clock_mhz=clock,
                      epsilon_ms=epsilon)


def _tuple(values, cast) -> tuple:
    if not isinstance(values, list):
        raise ConfigError(f"Expected a list, got {values!r}")
    return tuple(cast(v) for v in values)


def build_run_config(data: Dict[str, Any]) -> RunConfig:
    """Typed RunConfig from a fully merged document."""
    try:
        device = DeviceSpec.from_dict(data["device"])
        targets = tuple(parse_target(t, device) for t in data["targets"])
        if not targets:
            raise ConfigError("At least one target is required")
        names = [t.name for t in targets]
        if len(set(names)) != len(names):
            raise ConfigError(f"Target names must be unique, got {names}")

        ev = data["evaluation"]
        if ev["method"] not in CONSTRUCTIONS:
            raise ConfigError(f"Unknown evaluation method {ev['method']!r}")
        evaluator = EvaluatorConfig(**data["evaluator"])
        if evaluator.kind not in EVALUATOR_KINDS:
            raise ConfigError(f"Unknown evaluator kind {evaluator.kind!r}; expected one of {EVALUATOR_KINDS}")
        if evaluator.kind == "external" and not evaluator.command:
            raise ConfigError("The external evaluator needs a command")

        search = data["search"]
        cfg = RunConfig(
            device=device,
            targets=targets,
            tile=TileShape.from_dict(data["tile"]),
            input_dims=FeatureMap.from_dict(data["input_dims"]),
            quant=QuantScheme.from_dict(data["quant"]),
            init_n_rep=int(data["init"]["n_rep"]),
            init_f_ds=int(data["init"]["f_ds"]),
            search=SearchSettings(
                k=int(search["k"]),
                max_iters=int(search["max_iters"]),
                moves=_tuple(search["moves"], Coordinate),
                rounds=int(search["rounds"]),
            ),
            calibration=CalibrationConfig(**{k: int(v) for k, v in data["calibration"].items()}),
            evaluation=EvaluationConfig(
                method=ev["method"],
                pf_set=_tuple(ev["pf_set"], int),
                rep_counts=_tuple(ev["rep_counts"], int),
                activations=_tuple(ev["activations"], str),
                top_n=int(ev["top_n"]),
                band_fraction=float(ev["band_fraction"]),
            ),
            evaluator=evaluator,
            codegen=CodegenConfig(**{k: bool(v) for k, v in data["codegen"].items()}),
            char_table=data["char_table"],
            output_dir=str(data["output_dir"]),
            seed=int(data["seed"]),
            workers=int(data["workers"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid run configuration: {e}")

    if cfg.input_dims.is_empty():
        raise ConfigError(f"input_dims must be non-zero, got {cfg.input_dims}")
    if min(cfg.search.k, cfg.search.max_iters, cfg.search.rounds) < 1:
        raise ConfigError("search.k, search.max_iters and search.rounds must be >= 1")
    if cfg.evaluation.top_n < 1 or cfg.evaluation.band_fraction <= 0:
        raise ConfigError("evaluation.top_n must be >= 1 and evaluation.band_fraction > 0")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be >= 0, got {cfg.seed}")
    return cfg


def env_overrides() -> Dict[str, Any]:
    """Overrides from the environment (config/.env is loaded first when present)."""
    if ENV_PATH.exists():
        load_dotenv(dotenv_path=ENV_PATH)
    overrides: Dict[str, Any] = {}
    if os.environ.get(ENV_CHAR_TABLE):
        overrides["char_table"] = os.environ[ENV_CHAR_TABLE]
    if os.environ.get(ENV_OUTPUT_DIR):
        overrides["output_dir"] = os.environ[ENV_OUTPUT_DIR]
    if os.environ.get(ENV_EVALUATOR_CMD):
        overrides["evaluator"] = {"kind": "external", "command": os.environ[ENV_EVALUATOR_CMD]}
    return overrides


def load_run_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None,
                    use_env: bool = True) -> RunConfig:
    """
    Load, merge and validate a run configuration.

    Args:
        path: User config file; None runs on the defaults alone
        overrides: Document fragments applied last (CLI flags)
        use_env: Apply CODESIGN_* environment overrides

    Returns:
        RunConfig: Validated configuration

    Raises:
        ConfigError: For unknown keys, invalid values or unreadable files
    """
    defaults = read_json(DEFAULTS_PATH)
    data = defaults
    layers: List[Tuple[str, Dict[str, Any]]] = []
    if path is not None:
        config_path = resolve_path(path)
        user = read_json(config_path)
        if not isinstance(user, dict):
            raise ConfigError(f"Run config {config_path} must be a JSON object")
        layers.append((str(config_path), user))
        logger.info(f"Loaded run config from {config_path}")
    if use_env:
        layers.append(("environment", env_overrides()))
    if overrides:
        layers.append(("command line", overrides))

    for source, layer in layers:
        _check_keys(layer, defaults, "")
        data = merge_config(data, layer)
        logger.debug(f"Applied config layer from {source}: {sorted(k for k in layer if not k.startswith('_'))}")
    return build_run_config(data)
