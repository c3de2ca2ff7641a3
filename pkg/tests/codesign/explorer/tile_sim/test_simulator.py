import pytest

from codesign.explorer.bundle_arch.estimates import per_instance_dims
from codesign.explorer.exceptions import DomainError
from codesign.explorer.ip_catalog.core_types import FeatureMap, LayerDims
from codesign.explorer.tile_sim.simulator import (
    LOAD_STAGE,
    STORE_STAGE,
    PipelineStage,
    SimSettings,
    SimTrace,
    TileTiming,
    check_trace,
    dnn_segments,
    segment_for_layers,
    simulate_bundle,
    simulate_dnn,
    simulate_stages,
    trace_to_json,
)
from tests.helpers import make_model

INPUT = FeatureMap(32, 32, 16)


def stages(*cycles):
    return [PipelineStage(f"s{i}", c, i) for i, c in enumerate(cycles)]


@pytest.mark.parametrize("tiles", [1, 3, 7])
def test_single_stage_is_serial(tiles):
    assert simulate_stages(stages(250), tiles).total_cycles == 250 * tiles


def test_balanced_pipeline():
    assert simulate_stages(stages(100, 100), 4).total_cycles == 500


def test_bottleneck_stage_dominates():
    trace = simulate_stages(stages(100, 300), 4)
    assert trace.total_cycles == 1300
    assert trace.stalls > 0


def test_deeper_buffers_never_slow_down():
    shallow = simulate_stages(stages(300, 100, 200), 6, SimSettings(buffer_depth=1, transfers=False))
    deep = simulate_stages(stages(300, 100, 200), 6, SimSettings(buffer_depth=4, transfers=False))
    assert deep.total_cycles <= shallow.total_cycles


def test_stage_and_settings_validation():
    with pytest.raises(DomainError):
        PipelineStage("bad", 0, 0)
    with pytest.raises(DomainError):
        simulate_stages([], 3)
    with pytest.raises(DomainError):
        simulate_stages(stages(10), 2, bw=0.0)


def test_bundle_trace_is_causal(conv_bundle, char, tile):
    trace = simulate_bundle(conv_bundle, LayerDims.same(INPUT), tile, 8.0, char)
    assert check_trace(trace) == []
    assert trace.transfer_cycles > 0
    assert {t.stage for t in trace.timings} >= {"load", "store", "ip_conv3x3"}


def test_transfers_add_cycles(conv_bundle, char, tile):
    dims = LayerDims.same(INPUT)
    with_io = simulate_bundle(conv_bundle, dims, tile, 1.0, char, SimSettings())
    without = simulate_bundle(conv_bundle, dims, tile, 1.0, char, SimSettings(transfers=False))
    assert with_io.total_cycles > without.total_cycles


def test_check_trace_flags_overlap():
    timings = (
        TileTiming(0, "a", 0, 0, 0, 100),
        TileTiming(0, "a", 0, 1, 50, 150),
        TileTiming(0, "b", 1, 0, 90, 120),
    )
    trace = SimTrace(total_cycles=150, transfer_cycles=0, stalls=0, timings=timings, segments=())
    assert len(check_trace(trace)) == 2


def test_replications_run_back_to_back(conv_bundle, device, char, tile):
    settings = SimSettings(dm_sync_cycles=0)
    single = simulate_bundle(conv_bundle, LayerDims.same(INPUT), tile, device.bw, char, settings)
    m = make_model(conv_bundle, n_rep=2, x_ds=(0,), pi_ch=(1.0,))
    trace = simulate_dnn(m, device, char, settings)
    assert trace.total_cycles == 2 * single.total_cycles
    assert trace.segment_cycles() == [single.total_cycles] * 2


def test_replication_boundaries_pay_sync(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=3)
    trace = simulate_dnn(m, device, char, SimSettings(dm_sync_cycles=1000))
    assert trace.boundary_gaps() == [1000, 1000]


def test_head_tail_segments(conv_bundle, char):
    m = make_model(conv_bundle, n_rep=2, construction="fixed_head_tail")
    labels = [w.label for w in dnn_segments(m, char)]
    assert labels == ["head_conv3x3", "replication_0", "replication_1", "tail_avg_pool", "tail_conv1x1"]


def test_trace_json(conv_bundle, device, char):
    trace = simulate_dnn(make_model(conv_bundle), device, char)
    data = trace_to_json(trace)
    assert data["total_cycles"] == trace.total_cycles
    assert len(data["tiles"]) == len(trace.timings)
    assert data["segments"][0]["label"] == "replication_0"


def busy_cycles(trace, stage):
    return sum(t.finish - t.start for t in trace.timings if t.stage == stage)


@pytest.mark.parametrize("cycles", [(100,), (300, 100, 200), (50, 400, 50, 400), (7, 13, 11)])
@pytest.mark.parametrize("tiles", [1, 5, 12])
@pytest.mark.parametrize("depth", [1, 3])
def test_stage_work_bounds(cycles, tiles, depth):
    trace = simulate_stages(stages(*cycles), tiles, SimSettings(buffer_depth=depth, transfers=False))
    work = [c * tiles for c in cycles]
    assert max(work) <= trace.total_cycles <= sum(work)
    assert [busy_cycles(trace, f"s{i}") for i in range(len(cycles))] == work


@pytest.mark.parametrize("index", range(18))
def test_bundle_work_bounds_with_transfers(index, bundles, device, char, tile, quant):
    bundle = bundles[index].configure(4, quant)
    dims = LayerDims.same(FeatureMap(24, 16, 16))
    trace = simulate_bundle(bundle, dims, tile, device.bw, char)
    work = segment_for_layers(bundle.label, bundle.instances, per_instance_dims(bundle, dims), tile, char)
    stage_work = [s.per_tile_cycles * work.tile_count for s in work.stages]
    floor = max(stage_work + [busy_cycles(trace, LOAD_STAGE), busy_cycles(trace, STORE_STAGE)])
    assert floor <= trace.total_cycles <= sum(stage_work) + trace.transfer_cycles


def test_dnn_trace_is_segments_plus_gaps(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=3, x_ds=(1, 0), pi_ch=(1.5, 1.0), construction="fixed_head_tail")
    trace = simulate_dnn(m, device, char, SimSettings(dm_sync_cycles=500))
    assert trace.segments[0].start == 0
    assert trace.segments[-1].finish == trace.total_cycles
    assert sum(trace.segment_cycles()) + sum(trace.boundary_gaps()) == trace.total_cycles
    assert sorted(trace.boundary_gaps()) == [0, 0, 0, 500, 500]
