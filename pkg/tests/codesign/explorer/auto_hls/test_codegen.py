import json
import os
import re
from pathlib import Path

import pytest

from codesign.explorer.auto_hls.emitter import MANIFEST_FILE, TOP_FILE, emit, emit_top, write_source_tree
from codesign.explorer.auto_hls.planner import OFF_CHIP, ON_CHIP, PlanOptions, plan
from codesign.explorer.auto_hls.report import estimate_report, report_to_json
from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.estimates import dnn_latency, dnn_resource
from codesign.explorer.dnn_model.model import FIXED_HEAD_TAIL
from codesign.explorer.exceptions import PlanningError
from codesign.explorer.ip_catalog.core_types import FeatureMap, ResourceVector
from codesign.explorer.tile_sim.simulator import simulate_dnn
from tests.helpers import make_bundle, make_model

GOLDEN_DIR = Path(__file__).resolve().parent / "golden"
UPDATE_GOLDEN = os.environ.get("CODESIGN_UPDATE_GOLDEN") == "1"


def covered_layers(p):
    return sorted(i for call in p.schedule for i in call.layers)


def without_comments(text):
    return re.sub(r"/\*.*?\*/", "", text, flags=re.S)


def tiny_bram(device):
    return DeviceSpec("tiny", ResourceVector(dsp=220, lut=53200, ff=106400, bram_kbit=1.0), device.clock_mhz, device.bw)


@pytest.mark.parametrize("construction", ["pure_replication", FIXED_HEAD_TAIL])
def test_every_layer_scheduled_once(conv_bundle, device, char, construction):
    m = make_model(conv_bundle, n_rep=3, x_ds=(1, 0), pi_ch=(1.5, 1.0), construction=construction)
    p = plan(m, device, char)
    assert covered_layers(p) == list(range(m.layer_count))
    assert len(p.schedule) == m.layer_count


def test_fusion_folds_elementwise_layers(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=3)
    p = plan(m, device, char, PlanOptions(fuse_elementwise=True))
    assert covered_layers(p) == list(range(m.layer_count))
    assert len(p.schedule) == 3
    assert all(call.post_ops == 3 and len(call.layers) == 3 for call in p.schedule)
    assert all(call.post_offset is not None for call in p.schedule)


def test_fusion_needs_a_computational_head(device, char):
    bundle = make_bundle("conv1x1", "max_pool", "activation", pf=2)
    p = plan(make_model(bundle, n_rep=2), device, char, PlanOptions(fuse_elementwise=True))
    assert [len(call.layers) for call in p.schedule] == [1] * 6


def test_segments_and_buffers(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=2, construction=FIXED_HEAD_TAIL)
    p = plan(m, device, char)
    assert [s.label for s in p.segments] == [
        "head_conv3x3", "replication_0", "replication_1", "tail_avg_pool", "tail_conv1x1"
    ]
    assert [s.tiled for s in p.segments] == [False, True, True, False, False]
    assert p.segments[0].source == "frame"
    assert p.segments[-1].dest == "result"
    assert {b.name for b in p.buffers if b.location == ON_CHIP} == {"tile_in", "link_1", "link_2", "tile_out"}
    assert all(b.location == OFF_CHIP for b in p.buffers if b.name.startswith("fmap_"))
    assert p.weight_image_bytes == sum(w.size_bytes for w in p.weight_loads)


def test_reallocation_shares_two_pools(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=2)
    plain = plan(m, device, char)
    shared = plan(m, device, char, PlanOptions(reallocate_buffers=True))
    assert [b.name for b in shared.buffers if b.location == ON_CHIP] == ["pool_a", "pool_b"]
    assert shared.on_chip_bytes <= plain.on_chip_bytes


@pytest.mark.parametrize("options, expected", [
    (PlanOptions(), "tile_in"),
    (PlanOptions(reallocate_buffers=True), "pool_a"),
])
def test_bram_overflow_names_the_buffer(conv_bundle, device, char, options, expected):
    m = make_model(conv_bundle, n_rep=2)
    with pytest.raises(PlanningError) as excinfo:
        plan(m, tiny_bram(device), char, options)
    assert excinfo.value.buffer_name == expected


def test_emit_file_set(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=2, construction=FIXED_HEAD_TAIL)
    files = emit(plan(m, device, char))
    assert set(files) == {
        TOP_FILE, MANIFEST_FILE, "ip_conv3x3.c", "ip_normalization.c", "ip_activation.c",
        "ip_avg_pool.c", "ip_conv1x1.c",
    }
    manifest = json.loads(files[MANIFEST_FILE])
    assert manifest["top"] == "accel_top"
    assert manifest["model"]["layer_count"] == m.layer_count
    assert "#include" not in "".join(files.values())


def test_emit_is_deterministic(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=3, x_ds=(1, 1))
    assert emit(plan(m, device, char)) == emit(plan(m, device, char))


def test_top_calls_every_instance(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=2)
    top = emit(plan(m, device, char))[TOP_FILE]
    for name in ("ip_conv3x3", "ip_normalization", "ip_activation"):
        assert top.count(f"{name}(") >= 3
    assert "#pragma HLS INTERFACE s_axilite port=return" in top


@pytest.mark.parametrize("options", [PlanOptions(), PlanOptions(reallocate_buffers=True, fuse_elementwise=True)])
def test_sources_parse_as_c(conv_bundle, device, char, options):
    c_parser = pytest.importorskip("pycparser").c_parser
    m = make_model(conv_bundle, n_rep=2, construction=FIXED_HEAD_TAIL)
    for name, text in emit(plan(m, device, char, options)).items():
        if name.endswith(".c"):
            c_parser.CParser().parse(without_comments(text), filename=name)


def test_write_source_tree(tmp_path, conv_bundle, device, char):
    p = plan(make_model(conv_bundle), device, char)
    written = write_source_tree(p, tmp_path / "src", estimates={"note": "x"})
    assert sorted(path.name for path in written) == sorted(emit(p))
    manifest = json.loads((tmp_path / "src" / MANIFEST_FILE).read_text())
    assert manifest["estimates"] == {"note": "x"}


GOLDEN_CASES = {
    "conv1x1_activation": (
        lambda: make_model(make_bundle("conv1x1", "activation", pf=2), input_dims=FeatureMap(8, 8, 8)),
        PlanOptions(),
    ),
    "dwconv3x3_normalization": (
        lambda: make_model(make_bundle("dwconv3x3", "normalization", pf=4), n_rep=2, x_ds=(1,), pi_ch=(2.0,),
                           input_dims=FeatureMap(16, 16, 8)),
        PlanOptions(),
    ),
    "conv3x3_activation_head_tail": (
        lambda: make_model(make_bundle("conv3x3", "activation", pf=2), input_dims=FeatureMap(8, 8, 8),
                           construction=FIXED_HEAD_TAIL),
        PlanOptions(fuse_elementwise=True),
    ),
}


@pytest.mark.parametrize("case", sorted(GOLDEN_CASES))
def test_golden_sources(case, device, char):
    build, options = GOLDEN_CASES[case]
    files = emit(plan(build(), device, char, options))
    sources = {name: text for name, text in files.items() if name.endswith(".c")}
    case_dir = GOLDEN_DIR / case
    if UPDATE_GOLDEN:
        case_dir.mkdir(parents=True, exist_ok=True)
        for name, text in sources.items():
            (case_dir / name).write_text(text, encoding="utf-8")
    golden = sorted(path.name for path in case_dir.glob("*.c"))
    assert golden == sorted(sources), f"golden set for {case} differs; regenerate with CODESIGN_UPDATE_GOLDEN=1"
    for name, text in sources.items():
        assert (case_dir / name).read_text(encoding="utf-8") == text, f"{case}/{name}"
    assert json.loads(files[MANIFEST_FILE])["sources"] == sorted(files)


def test_halo_note_only_for_windowed_tiles(device, char):
    windowed = emit_top(plan(make_model(make_bundle("dwconv3x3", "normalization", pf=4)), device, char))
    assert "/* tiles are loaded without a halo; 3x3 windows are zero-padded at tile borders */" in windowed
    pointwise = emit_top(plan(make_model(make_bundle("conv1x1", "activation", pf=2)), device, char))
    assert "halo" not in pointwise


def test_estimate_report(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=2)
    report = estimate_report(m, device, char)
    assert report.latency == dnn_latency(m, device, char)
    assert report.resource == dnn_resource(m, char)
    assert report.sim_cycles == simulate_dnn(m, device, char).total_cycles
    assert report.fits
    data = report_to_json(report)
    assert data["latency"]["ms"] == report.latency.ms
    assert data["simulation"]["relative_error"] == report.sim_error


def test_estimate_report_without_simulation(conv_bundle, device, char):
    report = estimate_report(make_model(conv_bundle), device, char, sim_settings=None)
    assert report.sim_cycles is None
    assert report_to_json(report)["simulation"] == {"cycles": None, "ms": None, "relative_error": None}
