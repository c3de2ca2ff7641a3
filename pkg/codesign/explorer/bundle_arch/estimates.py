"""
Bundle-level resource and latency models.

    Res_bund  = sum_j Res_j + Gamma
    Comp_j    = reuse_j * lat_j
    Lat_bund  = alpha * sum_j Comp_j + beta * Theta(Data) / bw
"""

import math
from typing import Sequence, Tuple, Union

from codesign.explorer.bundle_arch.bundle import Bundle, BundleCalibration, DataFootprint
from codesign.explorer.exceptions import DomainError
from codesign.explorer.ip_catalog.characterization import IpCharacterization, reuse_count, weight_bytes
from codesign.explorer.ip_catalog.core_types import ZERO_RESOURCES, LayerDims, ResourceVector, TileShape
from codesign.explorer.ip_catalog.templates import IpInstance

DimsArg = Union[LayerDims, Sequence[LayerDims]]


def per_instance_dims(bundle: Bundle, layer_dims: DimsArg) -> Tuple[LayerDims, ...]:
    if isinstance(layer_dims, LayerDims):
        return (layer_dims,) * bundle.layers_per_bundle
    dims = tuple(layer_dims)
    if len(dims) != bundle.layers_per_bundle:
        raise DomainError(
            f"Bundle {bundle.id} has {bundle.layers_per_bundle} layers but {len(dims)} layer dims were given"
        )
    return dims


def instance_resources(bundle: Bundle, char: IpCharacterization, tile: TileShape) -> ResourceVector:
    total = ZERO_RESOURCES
    for inst in bundle.instances:
        total = total + char.res(inst.template, inst.pf, inst.quant, tile)
    return total


def bundle_resource(bundle: Bundle, char: IpCharacterization, tile: TileShape) -> ResourceVector:
    """Sum of the bundle's instance resources plus its calibrated overhead."""
    return instance_resources(bundle, char, tile) + bundle.calib.gamma_res


def reduction_factor(layer_dims: LayerDims) -> int:
    """Input positions folded into each output position (1 unless the layer shrinks the map)."""
    inp, out = layer_dims.inp, layer_dims.out
    return max(1, math.ceil((inp.width * inp.height) / (out.width * out.height)))


def invocation_cycles(inst: IpInstance, layer_dims: LayerDims, tile: TileShape, char: IpCharacterization) -> int:
    """Cycles of one tile invocation of inst on this layer."""
    reduction = 1 if inst.template.computational else reduction_factor(layer_dims)
    return char.lat_cycles(
        inst.template,
        inst.pf,
        inst.quant,
        tile.clip_to(layer_dims.out),
        in_channels=layer_dims.inp.channels,
        reduction=reduction,
    )


def comp_latency(inst: IpInstance, layer_dims: LayerDims, tile: TileShape, char: IpCharacterization) -> int:
    """Comp_j = reuse_j * lat_j."""
    return reuse_count(inst, layer_dims, tile) * invocation_cycles(inst, layer_dims, tile, char)


def data_footprint(bundle: Bundle, layer_dims: DimsArg) -> DataFootprint:
    """Bytes crossing the bundle boundary; intra-bundle tiles stay on chip."""
    dims = per_instance_dims(bundle, layer_dims)
    act = bundle.quant.activation_bytes
    weights = sum(
        weight_bytes(inst.template, d.inp.channels, d.out.channels, inst.quant)
        for inst, d in zip(bundle.instances, dims)
    )
    return DataFootprint(
        bytes_in=dims[0].inp.elements * act,
        bytes_out=dims[-1].out.elements * act,
        bytes_weights=weights,
    )


def latency_terms(bundle: Bundle, layer_dims: DimsArg, tile: TileShape, bw: float,
                  char: IpCharacterization) -> Tuple[float, float]:
    """The two regressors of the bundle latency model: (sum_j Comp_j, Theta / bw)."""
    if bw <= 0:
        raise DomainError(f"Off-chip bandwidth must be > 0 bytes/cycle, got {bw}")
    dims = per_instance_dims(bundle, layer_dims)
    comp = sum(comp_latency(inst, d, tile, char) for inst, d in zip(bundle.instances, dims))
    transfer = data_footprint(bundle, dims).total / bw
    return float(comp), transfer


def estimate_from_terms(calib: BundleCalibration, comp_sum: float, transfer_cycles: float) -> float:
    return calib.alpha * comp_sum + calib.beta * transfer_cycles


def bundle_latency(bundle: Bundle, layer_dims: DimsArg, tile: TileShape, bw: float,
                   char: IpCharacterization) -> float:
    """Estimated cycles for one execution of the bundle."""
    comp, transfer = latency_terms(bundle, layer_dims, tile, bw, char)
    return estimate_from_terms(bundle.calib, comp, transfer)
