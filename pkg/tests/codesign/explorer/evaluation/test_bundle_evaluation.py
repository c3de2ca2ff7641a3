import json
import subprocess

import pytest

from codesign.explorer.dnn_model.model import FIXED_HEAD_TAIL, PURE_REPLICATION
from codesign.explorer.evaluation.bundle_evaluation import (
    EvalSettings,
    build_eval_dnn,
    coarse_evaluate,
    fine_evaluate,
)
from codesign.explorer.evaluation.evaluators import (
    AccuracyEvaluator,
    ExternalCommandEvaluator,
    ProxyCoefficients,
    SyntheticProxyEvaluator,
    TaskDescriptor,
)
from codesign.explorer.evaluation.selection import select_top_bundles
from codesign.explorer.exceptions import ConfigError, EvaluatorError, ModelError
from codesign.explorer.ip_catalog.core_types import FeatureMap, TileShape
from tests.helpers import make_model

SETTINGS = EvalSettings(input_dims=FeatureMap(32, 32, 16), workers=2)


class FailingEvaluator(AccuracyEvaluator):
    def evaluate(self, model, task):
        raise EvaluatorError("no GPU")


def completed(stdout="", returncode=0, stderr=""):
    return subprocess.CompletedProcess(args=["train"], returncode=returncode, stdout=stdout, stderr=stderr)


def test_coarse_grid(bundles, device, char):
    records = coarse_evaluate(bundles, [1, 4, 16], SyntheticProxyEvaluator(seed=3), device, char, SETTINGS)
    assert len(records) == 54
    by_bundle = {}
    for r in records:
        by_bundle.setdefault(r.bundle_id, set()).add(r.accuracy)
    assert all(len(scores) == 1 for scores in by_bundle.values())
    assert all(r.method == FIXED_HEAD_TAIL and r.valid for r in records)


def test_coarse_latency_falls_with_pf(conv_bundle, device, char):
    records = coarse_evaluate([conv_bundle], [1, 2, 8], SyntheticProxyEvaluator(), device, char, SETTINGS)
    latencies = [r.latency_ms for r in sorted(records, key=lambda r: r.pf)]
    assert latencies == sorted(latencies, reverse=True)


def test_coarse_rejects_unknown_pf(bundles, device, char):
    with pytest.raises(ConfigError):
        coarse_evaluate(bundles, [3], SyntheticProxyEvaluator(), device, char, SETTINGS)


def test_failed_evaluations_are_kept_but_unselected(bundles, device, char):
    records = coarse_evaluate(bundles[:3], [1], FailingEvaluator(), device, char, SETTINGS)
    assert len(records) == 3
    assert all(not r.valid and r.error == "no GPU" for r in records)
    assert select_top_bundles(records, band_width=44) == []


def test_fine_grid(bundles, device, char, quant):
    configured = [b.configure(4, quant) for b in bundles[:5]]
    records = fine_evaluate(configured, [1, 2, 3], ["relu", "relu4", "relu8"], SyntheticProxyEvaluator(),
                            device, char, SETTINGS)
    assert len(records) == 45
    assert {r.n_rep for r in records} == {1, 2, 3}
    assert {r.quant.activation_clip for r in records} == {"relu", "relu4", "relu8"}
    assert all(r.method == PURE_REPLICATION and r.pf == 4 for r in records)


def test_fine_rejects_unknown_clip(conv_bundle, device, char):
    with pytest.raises(ConfigError):
        fine_evaluate([conv_bundle], [1], ["gelu"], SyntheticProxyEvaluator(), device, char, SETTINGS)


def test_build_eval_dnn(conv_bundle):
    wrapped = build_eval_dnn(conv_bundle, FIXED_HEAD_TAIL, 3, FeatureMap(32, 32, 16), TileShape(8, 8, 8))
    assert wrapped.n_rep == 1 and wrapped.has_head_tail
    stacked = build_eval_dnn(conv_bundle, PURE_REPLICATION, 3, FeatureMap(32, 32, 16), TileShape(8, 8, 8))
    assert stacked.n_rep == 3 and stacked.x_ds == (0, 0)
    with pytest.raises(ModelError):
        build_eval_dnn(conv_bundle, PURE_REPLICATION, 0, FeatureMap(32, 32, 16), TileShape(8, 8, 8))


def test_proxy_is_deterministic(conv_bundle):
    m = make_model(conv_bundle, n_rep=2)
    task = TaskDescriptor()
    score = SyntheticProxyEvaluator(seed=11).evaluate(m, task)
    assert 0.0 < score < 1.0
    assert SyntheticProxyEvaluator(seed=11).evaluate(m, task) == score
    assert SyntheticProxyEvaluator(seed=12).evaluate(m, task) != score


def test_proxy_prefers_bigger_models(conv_bundle):
    coefficients = ProxyCoefficients(intercept=-3.0, params_weight=0.2, macs_weight=0.1, noise_sigma=0.0)
    evaluator = SyntheticProxyEvaluator(coefficients=coefficients)
    small = evaluator.evaluate(make_model(conv_bundle, n_rep=1), TaskDescriptor())
    large = evaluator.evaluate(make_model(conv_bundle, n_rep=4), TaskDescriptor())
    assert large > small


def test_external_evaluator_retries(mocker, conv_bundle):
    run = mocker.patch(
        "codesign.explorer.evaluation.evaluators.subprocess.run",
        side_effect=[completed(returncode=1, stderr="CUDA busy"), completed(stdout="epoch 1\n0.73\n")],
    )
    evaluator = ExternalCommandEvaluator("train --fast", retries=3, backoff_seconds=0)
    assert evaluator.evaluate(make_model(conv_bundle), TaskDescriptor()) == 0.73
    assert run.call_count == 2
    args, kwargs = run.call_args
    assert args[0] == ["train", "--fast"]
    payload = json.loads(kwargs["input"])
    assert payload["task"] == {"name": "single-object-detection", "metric": "iou"}
    assert payload["model"]["bundle"]["id"] == conv_bundle.id


def test_external_evaluator_gives_up(mocker, conv_bundle):
    run = mocker.patch(
        "codesign.explorer.evaluation.evaluators.subprocess.run",
        return_value=completed(stdout="1.7\n"),
    )
    evaluator = ExternalCommandEvaluator(["train"], retries=2, backoff_seconds=0)
    with pytest.raises(EvaluatorError):
        evaluator.evaluate(make_model(conv_bundle), TaskDescriptor())
    assert run.call_count == 2


def test_external_evaluator_timeout(mocker, conv_bundle):
    mocker.patch(
        "codesign.explorer.evaluation.evaluators.subprocess.run",
        side_effect=subprocess.TimeoutExpired(cmd="train", timeout=1),
    )
    with pytest.raises(EvaluatorError):
        ExternalCommandEvaluator("train", timeout=1, retries=1).evaluate(make_model(conv_bundle), TaskDescriptor())


def test_external_evaluator_needs_command():
    with pytest.raises(ConfigError):
        ExternalCommandEvaluator("")
