from dataclasses import replace

import pytest

from codesign.explorer.bundle_arch.estimates import bundle_latency, bundle_resource
from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.estimates import CostModels, dnn_latency, dnn_resource, model_statistics
from codesign.explorer.dnn_model.initialization import InitSettings, initialize_dnn
from codesign.explorer.dnn_model.model import (
    FIXED_HEAD_TAIL,
    DnnCalibration,
    dnn_from_dict,
    dnn_to_dict,
    expand_channels,
    layer_plan,
    replication_dims,
)
from codesign.explorer.exceptions import ConfigError, InfeasibleError, ModelError
from codesign.explorer.ip_catalog.core_types import FeatureMap, LayerDims, ResourceVector, TileShape
from tests.helpers import make_bundle, make_model

INPUT = FeatureMap(32, 32, 16)


def small_device(dsp):
    return DeviceSpec("tiny", ResourceVector(dsp=dsp, lut=1e6, ff=1e6, bram_kbit=1e6), clock_mhz=100.0, bw=8.0)


def test_single_replication_equals_bundle_latency(conv_bundle, device, char, tile):
    est = dnn_latency(make_model(conv_bundle, n_rep=1), device, char)
    expected = bundle_latency(conv_bundle, LayerDims.same(INPUT), tile, device.bw, char)
    assert est.cycles == pytest.approx(expected)
    assert est.ms == pytest.approx(expected / 100_000)


def test_identical_replications_scale_linearly(conv_bundle, device, char):
    one = dnn_latency(make_model(conv_bundle, n_rep=1), device, char).cycles
    three = make_model(conv_bundle, n_rep=3, x_ds=(0, 0), pi_ch=(1.0, 1.0))
    assert dnn_latency(three, device, char).cycles == pytest.approx(3 * one)


def test_data_movement_term(conv_bundle, device, char):
    calib = DnnCalibration(phi=0.5, lat_dm=100.0)
    base = dnn_latency(make_model(conv_bundle, n_rep=3), device, char)
    moved = dnn_latency(make_model(conv_bundle, n_rep=3, calib=calib), device, char)
    assert moved.data_movement_cycles == 100.0
    assert moved.cycles == pytest.approx(base.cycles + 100.0)


def test_down_sampling_shrinks_later_replications(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=3, x_ds=(1, 1), f_ds=(2, 2))
    per_rep = dnn_latency(m, device, char).per_replication
    assert per_rep[0] > per_rep[1] > per_rep[2]


def test_resources_do_not_depend_on_structure(conv_bundle, char, tile):
    shallow = dnn_resource(make_model(conv_bundle, n_rep=1), char)
    deep = dnn_resource(make_model(conv_bundle, n_rep=6, x_ds=(1, 0, 1, 0, 0), pi_ch=(2.0, 1.0, 1.5, 1.0, 1.0)), char)
    assert shallow == deep == bundle_resource(conv_bundle, char, tile)


def test_controller_overhead_scales_with_gamma(conv_bundle, char):
    calib = DnnCalibration(gamma_ctl=1.0, res_ctl=ResourceVector(lut=500))
    base = dnn_resource(make_model(conv_bundle), char)
    assert dnn_resource(make_model(conv_bundle, calib=calib), char).lut == pytest.approx(base.lut + 500)


def test_calibration_rejects_negative_constants():
    with pytest.raises(ConfigError):
        DnnCalibration(phi=-0.1)


@pytest.mark.parametrize("channels, factor, align, expected", [
    (16, 1.2, 8, 24),
    (16, 2.0, 8, 32),
    (10, 1.3, 1, 13),
    (16, 1.75, 4, 28),
])
def test_expand_channels(channels, factor, align, expected):
    assert expand_channels(channels, factor, align) == expected


def test_replication_dims(conv_bundle):
    m = make_model(conv_bundle, n_rep=3, x_ds=(1, 0), f_ds=(2, 2), pi_ch=(2.0, 1.0))
    assert replication_dims(m) == [FeatureMap(32, 32, 16), FeatureMap(16, 16, 32), FeatureMap(16, 16, 32)]


def test_feature_map_collapse(conv_bundle):
    m = make_model(conv_bundle, n_rep=4, x_ds=(1, 1, 1), input_dims=FeatureMap(4, 4, 8))
    with pytest.raises(ModelError):
        replication_dims(m)


def test_structure_validation(conv_bundle):
    with pytest.raises(ModelError):
        make_model(conv_bundle, n_rep=3, x_ds=(1,))
    with pytest.raises(ModelError):
        make_model(conv_bundle, n_rep=2, pi_ch=(1.1,))
    with pytest.raises(ModelError):
        make_model(make_bundle("conv3x3"), n_rep=1)


def test_layer_plan_fixed_head_tail(conv_bundle):
    m = make_model(conv_bundle, n_rep=2, construction=FIXED_HEAD_TAIL)
    plan = layer_plan(m)
    assert len(plan) == m.layer_count == 2 * 3 + 3
    assert [layer.role for layer in plan][:2] == ["head", "bundle"]
    assert [layer.role for layer in plan][-2:] == ["tail", "tail"]
    assert plan[0].dims.out == FeatureMap(16, 16, 16)
    assert [inst.template.id for inst in m.extra_instances] == ["avg_pool", "conv1x1"]
    assert sorted(i for ids in m.layer_assignment.values() for i in ids) == list(range(m.layer_count))


def test_head_tail_adds_latency_and_resources(conv_bundle, device, char):
    plain = make_model(conv_bundle, n_rep=2)
    wrapped = make_model(conv_bundle, n_rep=2, construction=FIXED_HEAD_TAIL)
    assert dnn_latency(wrapped, device, char).head_tail_cycles > 0
    assert dnn_resource(plain, char).fits_within(dnn_resource(wrapped, char))


def test_model_statistics(conv_bundle):
    stats = model_statistics(make_model(conv_bundle, n_rep=1))
    assert stats.params == 9 * 16 * 16 + 2 * 16
    assert stats.macs == INPUT.elements * 9 * 16 + 2 * INPUT.elements


def test_model_dict_round_trip(conv_bundle):
    m = make_model(conv_bundle, n_rep=3, x_ds=(1, 0), pi_ch=(1.5, 1.0), calib=DnnCalibration(phi=0.7, lat_dm=12.0))
    data = dnn_to_dict(m)
    assert data["layer_count"] == 9
    assert dnn_from_dict(data) == m


def test_initialize_picks_largest_fitting_pf(char, quant):
    bundle = make_bundle("conv3x3", "normalization", "activation")
    settings = InitSettings(input_dims=INPUT, tile=TileShape(8, 8, 8))
    m = initialize_dnn(bundle, small_device(dsp=40), quant, settings, char)
    assert m.pf == 4
    assert m.n_rep == 3
    assert m.x_ds == (1, 1)
    assert m.pi_ch == (2.0, 2.0)


def test_initialize_reports_binding_resource(char, quant):
    bundle = make_bundle("conv3x3", "normalization", "activation")
    settings = InitSettings(input_dims=INPUT, tile=TileShape(8, 8, 8))
    with pytest.raises(InfeasibleError) as excinfo:
        initialize_dnn(bundle, small_device(dsp=0), quant, settings, char)
    assert excinfo.value.binding_resource == "dsp"


def test_zero_budget_device_is_valid():
    device = small_device(dsp=0)
    assert device.budget.dsp == 0
    usage = ResourceVector(dsp=0, lut=5e5)
    assert usage.utilization(device.budget)["dsp"] == 0.0
    assert ResourceVector(dsp=2).utilization(device.budget)["dsp"] == float("inf")


def test_cost_models(conv_bundle, device, char):
    m = make_model(conv_bundle, n_rep=2)
    models = CostModels(device, char)
    assert models.est_lat_ms(m) == dnn_latency(m, device, char).ms
    assert models.est_res(m) == dnn_resource(m, char)


@pytest.mark.parametrize("index", range(18))
def test_resources_identical_for_every_replication_count(index, bundles, char, quant):
    bundle = bundles[index].configure(4, quant)
    base = dnn_resource(make_model(bundle, n_rep=1), char)
    for n_rep in range(2, 9):
        boundaries = n_rep - 1
        m = make_model(
            bundle,
            n_rep=n_rep,
            x_ds=tuple(b % 2 for b in range(boundaries)),
            pi_ch=tuple(1.5 if b % 3 == 0 else 1.0 for b in range(boundaries)),
        )
        assert dnn_resource(m, char) == base, f"{bundle.name} n_rep={n_rep}"


@pytest.mark.parametrize("index", range(18))
def test_initialize_is_feasible_and_pf_maximal(index, bundles, device, char, quant):
    settings = InitSettings(input_dims=INPUT, tile=TileShape(8, 8, 8))
    m = initialize_dnn(bundles[index], device, quant, settings, char)
    assert dnn_resource(m, char).fits_within(device.budget)
    for pf in (p for p in char.pf_candidates if p > m.pf):
        larger = replace(m, bundle=m.bundle.configure(pf, quant))
        assert not dnn_resource(larger, char).fits_within(device.budget), f"{m.bundle.name} fits at pf={pf}"
