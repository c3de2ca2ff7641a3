"""
Accuracy evaluators: the seam where a real trainer plugs in.

SyntheticProxyEvaluator scores a model from its size without training.
ExternalCommandEvaluator hands the model JSON to a user command and reads
a score back.
"""

import json
import logging
import math
import shlex
import subprocess
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt, wait_exponential

from codesign.explorer.dnn_model.estimates import model_statistics
from codesign.explorer.dnn_model.model import DnnModel, dnn_to_dict
from codesign.explorer.exceptions import ConfigError, EvaluatorError
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.utils.file_tools import read_yaml

logger = setup_logger("evaluators", module="evaluation")

DEFAULT_PROXY_CONFIG = Path(__file__).resolve().parent / "config" / "proxy_evaluator.yaml"


@dataclass(frozen=True)
class TaskDescriptor:
    name: str = "single-object-detection"
    metric: str = "iou"


class AccuracyEvaluator(ABC):
    """Maps a DNN to an accuracy score in [0, 1]."""

    @abstractmethod
    def evaluate(self, model: DnnModel, task: TaskDescriptor) -> float:
        """
        Score one model.

        Raises:
            EvaluatorError: If no score can be produced
        """


@dataclass(frozen=True)
class ProxyCoefficients:
    intercept: float
    params_weight: float
    macs_weight: float
    noise_sigma: float
    kind_bonus: Dict[str, float] = field(default_factory=dict)
    clip_bonus: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict) -> "ProxyCoefficients":
        try:
            return cls(
                intercept=float(data["intercept"]),
                params_weight=float(data["params_weight"]),
                macs_weight=float(data["macs_weight"]),
                noise_sigma=float(data.get("noise_sigma", 0.0)),
                kind_bonus={k: float(v) for k, v in data.get("kind_bonus", {}).items()},
                clip_bonus={k: float(v) for k, v in data.get("clip_bonus", {}).items()},
            )
        except KeyError as e:
            raise ConfigError(f"Proxy evaluator coefficients are missing {e}")


def load_proxy_coefficients(path: Optional[Union[str, Path]] = None) -> ProxyCoefficients:
    data = read_yaml(path or DEFAULT_PROXY_CONFIG)
    if "proxy" not in data:
        raise ConfigError(f"No 'proxy' section in {path or DEFAULT_PROXY_CONFIG}")
    return ProxyCoefficients.from_dict(data["proxy"])


class SyntheticProxyEvaluator(AccuracyEvaluator):
    """Bigger models score higher; seeded noise per bundle."""

    def __init__(self, seed: int = 0, coefficients: Optional[ProxyCoefficients] = None):
        self.seed = seed
        self.coefficients = coefficients or load_proxy_coefficients()

    def _noise(self, bundle_id: int) -> float:
        if self.coefficients.noise_sigma == 0:
            return 0.0
        rng = np.random.default_rng([self.seed, bundle_id])
        return float(rng.normal(0.0, self.coefficients.noise_sigma))

    def evaluate(self, model: DnnModel, task: TaskDescriptor) -> float:
        c = self.coefficients
        stats = model_statistics(model)
        z = (
            c.intercept
            + c.params_weight * math.log(max(stats.params, 1))
            + c.macs_weight * math.log(max(stats.macs, 1))
            + sum(c.kind_bonus.get(t.id, 0.0) for t in model.bundle.templates)
            + c.clip_bonus.get(model.quant.activation_clip, 0.0)
            + self._noise(model.bundle.id)
        )
        return 1.0 / (1.0 + math.exp(-z))


class ExternalCommandEvaluator(AccuracyEvaluator):
    """
    Runs a command with {"task": ..., "model": <DnnModel JSON>} on stdin and
    takes the last non-empty stdout line as the score.
    """

    def __init__(self, command: Union[str, Sequence[str]], timeout: float = 600.0, retries: int = 3,
                 backoff_seconds: float = 0.5):
        if not command:
            raise ConfigError("External evaluator command is empty")
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.retries = max(1, retries)
        self.backoff_seconds = backoff_seconds

    def _run_once(self, payload: str) -> float:
        try:
            completed = subprocess.run(
                self.command,
                input=payload,
                capture_output=True,
                text=True,
                timeout=self.timeout,
                check=False,
            )
        except (OSError, subprocess.TimeoutExpired) as e:
            raise EvaluatorError(f"Evaluator command {self.command[0]} failed to run: {e}")
        if completed.returncode != 0:
            raise EvaluatorError(
                f"Evaluator command exited with {completed.returncode}: {completed.stderr.strip()[:200]}"
            )
        lines = [line.strip() for line in completed.stdout.splitlines() if line.strip()]
        if not lines:
            raise EvaluatorError("Evaluator command printed no score")
        try:
            score = float(lines[-1])
        except ValueError:
            raise EvaluatorError(f"Unparsable evaluator score: {lines[-1]!r}")
        if not 0.0 <= score <= 1.0:
            raise EvaluatorError(f"Evaluator score {score} outside [0, 1]")
        return score

    def evaluate(self, model: DnnModel, task: TaskDescriptor) -> float:
        payload = json.dumps(
            {"task": {"name": task.name, "metric": task.metric}, "model": dnn_to_dict(model)},
            sort_keys=True,
        )
        retrying = Retrying(
            stop=stop_after_attempt(self.retries),
            wait=wait_exponential(multiplier=self.backoff_seconds, max=30),
            retry=retry_if_exception_type(EvaluatorError),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        )
        for attempt in retrying:
            with attempt:
                return self._run_once(payload)
