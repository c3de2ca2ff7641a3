import pytest

from codesign.explorer.bundle_arch.bundle import Bundle, BundleCalibration
from codesign.explorer.bundle_arch.enumeration import (
    EnumerationRule,
    bundles_from_json,
    bundles_to_json,
    enumerate_bundles,
)
from codesign.explorer.bundle_arch.estimates import (
    bundle_latency,
    bundle_resource,
    comp_latency,
    data_footprint,
    estimate_from_terms,
    latency_terms,
)
from codesign.explorer.exceptions import ConfigError, DomainError
from codesign.explorer.ip_catalog.characterization import tile_counts
from codesign.explorer.ip_catalog.core_types import FeatureMap, LayerDims, ResourceVector
from codesign.explorer.ip_catalog.templates import builtin_templates, get_template
from tests.helpers import make_bundle


def test_enumeration_produces_eighteen_bundles(bundles):
    assert len(bundles) == 18
    assert [b.id for b in bundles] == list(range(1, 19))
    assert all(1 <= b.computational_count <= 2 for b in bundles)
    assert all(b.templates[-2:] == (get_template("normalization"), get_template("activation")) for b in bundles)
    assert len({b.name for b in bundles}) == 18


def test_catalog_without_computational_templates():
    catalog = [t for t in builtin_templates() if not t.computational]
    assert enumerate_bundles(catalog) == []


def test_custom_rule():
    rule = EnumerationRule(singles=("conv3x3", "max_pool"), pair_first=(), pair_second=(), tail=("activation",))
    result = enumerate_bundles(builtin_templates(), rule)
    assert [b.name for b in result] == ["conv3x3+activation"]


def test_rule_requires_all_keys():
    with pytest.raises(ConfigError):
        EnumerationRule.from_dict({"singles": []})


def test_bundle_validation():
    with pytest.raises(ConfigError):
        make_bundle("conv1x1", "conv3x3", "dwconv3x3")
    with pytest.raises(ConfigError):
        make_bundle("conv3x3", "activation", "activation")
    with pytest.raises(ConfigError):
        Bundle(id=1, templates=())


def test_unconfigured_bundle_has_no_instances():
    with pytest.raises(ConfigError):
        make_bundle("conv3x3").instances


def test_bundle_json_round_trip(bundles, quant):
    configured = [bundles[0].configure(4, quant)] + bundles[1:]
    restored = bundles_from_json(bundles_to_json(configured))
    assert restored == configured
    assert restored[0].label == "bundle_01"


def test_resources_add_up(char, tile):
    bundle = make_bundle("conv3x3", "conv5x5", pf=1)
    assert bundle_resource(bundle, char, tile).dsp == 34


def test_resource_overhead_is_added(char, tile):
    bundle = make_bundle("conv3x3", "normalization", "activation", pf=2)
    gamma = ResourceVector(lut=500, ff=100)
    with_gamma = bundle.with_calibration(BundleCalibration(gamma_res=gamma))
    base = bundle_resource(bundle, char, tile)
    assert bundle_resource(with_gamma, char, tile) == base + gamma
    expected = sum(char.res(t, 2, bundle.quant, tile).lut for t in bundle.templates)
    assert base.lut == pytest.approx(expected)


def test_estimate_from_terms():
    calib = BundleCalibration(alpha=1.0, beta=1.0)
    assert estimate_from_terms(calib, 1000, 1024 / 128) == 1008
    assert estimate_from_terms(BundleCalibration(alpha=0.5, beta=0.0), 1000, 8) == 500


def test_zero_beta_ignores_bandwidth(char, tile, conv_bundle):
    bundle = conv_bundle.with_calibration(BundleCalibration(alpha=0.9, beta=0.0))
    dims = LayerDims.same(FeatureMap(32, 32, 16))
    assert bundle_latency(bundle, dims, tile, 1.0, char) == bundle_latency(bundle, dims, tile, 64.0, char)


def test_non_positive_bandwidth(char, tile, conv_bundle):
    with pytest.raises(DomainError):
        latency_terms(conv_bundle, LayerDims.same(FeatureMap(16, 16, 8)), tile, 0.0, char)


def test_comp_latency_matches_tile_loop(char, tile, conv_bundle):
    dims = LayerDims.same(FeatureMap(32, 24, 16))
    for inst in conv_bundle.instances:
        nw, nh, nc = tile_counts(dims.out, tile)
        per_tile = char.lat_cycles(inst.template, inst.pf, inst.quant, tile, in_channels=dims.inp.channels)
        counted = 0
        for _ in range(nw):
            for _ in range(nh):
                for _ in range(nc):
                    counted += per_tile
        assert comp_latency(inst, dims, tile, char) == counted


def test_latency_terms(char, tile, conv_bundle):
    dims = LayerDims.same(FeatureMap(32, 32, 16))
    comp, transfer = latency_terms(conv_bundle, dims, tile, 4.0, char)
    assert comp == sum(comp_latency(inst, dims, tile, char) for inst in conv_bundle.instances)
    assert transfer == data_footprint(conv_bundle, dims).total / 4.0


def test_data_footprint(conv_bundle):
    fm = FeatureMap(16, 16, 8)
    footprint = data_footprint(conv_bundle, LayerDims.same(fm))
    assert footprint.bytes_in == fm.elements
    assert footprint.bytes_out == fm.elements
    assert footprint.bytes_weights == 9 * 8 * 8 + 2 * 8


def test_per_layer_dims_must_match(conv_bundle):
    with pytest.raises(DomainError):
        data_footprint(conv_bundle, [LayerDims.same(FeatureMap(8, 8, 8))])


def test_calibration_clamping():
    calib = BundleCalibration.clamped(2.0, -0.5)
    assert calib.alpha == 1.5
    assert 0 < calib.beta <= 1e-6
    with pytest.raises(ConfigError):
        BundleCalibration(alpha=0.0)
