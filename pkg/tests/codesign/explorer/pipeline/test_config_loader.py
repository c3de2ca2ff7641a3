import json

import pytest

from codesign.explorer.exceptions import ConfigError
from codesign.explorer.pipeline.config_loader import (
    ENV_CHAR_TABLE,
    ENV_EVALUATOR_CMD,
    ENV_OUTPUT_DIR,
    load_run_config,
    merge_config,
    parse_target,
)
from codesign.explorer.scd_search.moves import Coordinate


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in (ENV_CHAR_TABLE, ENV_OUTPUT_DIR, ENV_EVALUATOR_CMD):
        monkeypatch.delenv(name, raising=False)


def write_config(tmp_path, data):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_defaults():
    cfg = load_run_config()
    assert [t.name for t in cfg.targets] == ["fps_10", "fps_15", "fps_20"]
    assert [t.latency_ms for t in cfg.targets] == pytest.approx([100.0, 66.6667, 50.0], rel=1e-4)
    assert cfg.targets[0].epsilon_ms == pytest.approx(5.0)
    assert cfg.device.name == "pynq-z1"
    assert cfg.device.budget.dsp == 220
    assert cfg.search.k == 3
    assert cfg.search.rounds == 1
    assert cfg.search.moves == (Coordinate.N, Coordinate.PI, Coordinate.X)
    assert cfg.evaluation.pf_set == (1, 2, 4, 8, 16, 32)
    assert cfg.evaluator.kind == "proxy"
    assert cfg.seed == 0


def test_user_file_overrides_only_what_it_lists(tmp_path):
    path = write_config(tmp_path, {
        "_comment": "ignored",
        "seed": 7,
        "search": {"k": 1},
        "targets": [{"latency_ms": 20, "epsilon": 1.5, "name": "fast"}],
    })
    cfg = load_run_config(path)
    assert cfg.seed == 7
    assert cfg.search.k == 1
    assert cfg.search.max_iters == 1000
    assert len(cfg.targets) == 1
    assert cfg.targets[0].name == "fast"
    assert cfg.targets[0].epsilon_ms == 1.5


@pytest.mark.parametrize("doc", [
    {"sead": 1},
    {"search": {"kk": 2}},
    {"evaluation": {"pf_set": [1], "method": "fixed_head_tail", "bands": 3}},
])
def test_unknown_keys_rejected(tmp_path, doc):
    with pytest.raises(ConfigError):
        load_run_config(write_config(tmp_path, doc))


def test_section_must_be_object(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(write_config(tmp_path, {"search": 3}))


@pytest.mark.parametrize("doc", [
    {"seed": -1},
    {"evaluation": {"method": "nas"}},
    {"evaluator": {"kind": "oracle"}},
    {"evaluator": {"kind": "external"}},
    {"targets": []},
    {"targets": [{"fps": 10}, {"latency_ms": 100, "name": "fps_10"}]},
    {"search": {"moves": ["N", "Q"]}},
    {"search": {"rounds": 0}},
    {"input_dims": {"height": 0, "width": 8, "channels": 8}},
])
def test_invalid_values_rejected(tmp_path, doc):
    with pytest.raises(ConfigError):
        load_run_config(write_config(tmp_path, doc))


def test_missing_file():
    with pytest.raises(ConfigError):
        load_run_config("/nonexistent/run.json")


def test_parse_target(device):
    t = parse_target({"fps": 25}, device)
    assert t.name == "fps_25"
    assert t.latency_ms == pytest.approx(40.0)
    assert t.epsilon_ms == pytest.approx(2.0)
    assert t.clock_mhz == device.clock_mhz

    t = parse_target({"latency_ms": 12.5, "epsilon_fraction": 0.1, "clock_mhz": 150}, device)
    assert t.name == "lat_12.5ms"
    assert t.epsilon_ms == pytest.approx(1.25)
    assert t.clock_mhz == 150.0


@pytest.mark.parametrize("entry", [
    {"fps": 10, "latency_ms": 100},
    {},
    {"fps": 0},
    {"latency_ms": -3},
    {"fps": 10, "epsilon": 1, "epsilon_fraction": 0.1},
    {"fps": 10, "epsilon": 0},
    {"fps": 10, "clock_mhz": 0},
    {"fps": 10, "deadline": 3},
])
def test_parse_target_rejects(device, entry):
    with pytest.raises(ConfigError):
        parse_target(entry, device)


def test_env_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "out"))
    monkeypatch.setenv(ENV_EVALUATOR_CMD, "python train.py")
    cfg = load_run_config()
    assert cfg.output_dir == str(tmp_path / "out")
    assert cfg.evaluator.kind == "external"
    assert cfg.evaluator.command == "python train.py"

    assert load_run_config(use_env=False).output_dir == "codesign_output"


def test_command_line_beats_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "env"))
    cfg = load_run_config(overrides={"output_dir": str(tmp_path / "cli"), "seed": 3})
    assert cfg.output_dir == str(tmp_path / "cli")
    assert cfg.seed == 3


def test_merge_replaces_lists_and_keeps_defaults():
    merged = merge_config({"a": {"b": 1, "c": [1, 2]}, "d": 0}, {"a": {"c": [3]}})
    assert merged == {"a": {"b": 1, "c": [3]}, "d": 0}
