"""Builders shared by the test suites."""

from codesign.explorer.bundle_arch.bundle import Bundle
from codesign.explorer.dnn_model.model import NO_EXPANSION, DnnModel
from codesign.explorer.ip_catalog.core_types import FeatureMap, QuantScheme, TileShape
from codesign.explorer.ip_catalog.templates import get_template


def make_bundle(*template_ids, bundle_id=1, pf=None, quant=None):
    bundle = Bundle(id=bundle_id, templates=tuple(get_template(t) for t in template_ids))
    if pf is not None:
        bundle = bundle.configure(pf, quant or QuantScheme())
    return bundle


def make_model(bundle, n_rep=1, x_ds=None, f_ds=None, pi_ch=None, input_dims=FeatureMap(32, 32, 16),
               tile=TileShape(8, 8, 8), **kwargs):
    boundaries = n_rep - 1
    return DnnModel(
        bundle=bundle,
        n_rep=n_rep,
        x_ds=tuple(x_ds) if x_ds is not None else (0,) * boundaries,
        f_ds=tuple(f_ds) if f_ds is not None else (2,) * boundaries,
        pi_ch=tuple(pi_ch) if pi_ch is not None else (NO_EXPANSION,) * boundaries,
        input_dims=input_dims,
        tile=tile,
        **kwargs,
    )
