"""
Whole-DNN latency and resource models.

    Lat_DNN = sum_i Lat_bund(i) + phi * (N - 1) * Lat_DM
    Res_DNN = Res_bund + gamma * Res_ctl

Each replication is evaluated at its own dims. Head/tail layers of
fixed-head-tail models are added unpipelined.
"""

from dataclasses import dataclass
from typing import List, Tuple

from codesign.explorer.bundle_arch.estimates import (
    bundle_latency,
    bundle_resource,
    comp_latency,
    reduction_factor,
)
from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.model import DnnModel, LayerSpec, layer_plan
from codesign.explorer.exceptions import DomainError
from codesign.explorer.ip_catalog.characterization import IpCharacterization, weight_bytes
from codesign.explorer.ip_catalog.core_types import ResourceVector
from codesign.explorer.ip_catalog.templates import IpInstance


@dataclass(frozen=True)
class LatencyEstimate:
    cycles: float
    ms: float
    per_replication: Tuple[float, ...]
    head_tail_cycles: float
    data_movement_cycles: float


def _instance_for(m: DnnModel, layer: LayerSpec) -> IpInstance:
    return IpInstance(layer.template, m.pf, m.quant)


def layer_transfer_bytes(m: DnnModel, layer: LayerSpec) -> int:
    act = m.quant.activation_bytes
    d = layer.dims
    return (d.inp.elements + d.out.elements) * act + weight_bytes(
        layer.template, d.inp.channels, d.out.channels, m.quant
    )


def replication_latencies(m: DnnModel, bw: float, char: IpCharacterization) -> List[float]:
    plan = layer_plan(m)
    result = []
    for r in range(m.n_rep):
        dims = [layer.dims for layer in plan if layer.replication == r]
        result.append(bundle_latency(m.bundle, dims, m.tile, bw, char))
    return result


def head_tail_latency(m: DnnModel, bw: float, char: IpCharacterization) -> float:
    total = 0.0
    for layer in layer_plan(m):
        if layer.replication is not None:
            continue
        total += comp_latency(_instance_for(m, layer), layer.dims, m.tile, char)
        total += layer_transfer_bytes(m, layer) / bw
    return total


def data_movement_latency(m: DnnModel) -> float:
    """
    Inter-bundle data movement: phi * lat_dm paid once per replication
    boundary, so n_rep - 1 times. A single replication has no term.
    """
    return m.calib.phi * (m.n_rep - 1) * m.calib.lat_dm


def dnn_latency(m: DnnModel, device: DeviceSpec, char: IpCharacterization) -> LatencyEstimate:
    """Estimated end-to-end latency of one frame."""
    if device.bw <= 0:
        raise DomainError(f"Device bandwidth must be > 0, got {device.bw}")
    per_rep = replication_latencies(m, device.bw, char)
    head_tail = head_tail_latency(m, device.bw, char) if m.has_head_tail else 0.0
    dm = data_movement_latency(m)
    cycles = sum(per_rep) + head_tail + dm
    return LatencyEstimate(
        cycles=cycles,
        ms=device.cycles_to_ms(cycles),
        per_replication=tuple(per_rep),
        head_tail_cycles=head_tail,
        data_movement_cycles=dm,
    )


def dnn_resource(m: DnnModel, char: IpCharacterization) -> ResourceVector:
    """Folded-architecture resources; independent of n_rep, x_ds and pi_ch."""
    total = bundle_resource(m.bundle, char, m.tile)
    for inst in m.extra_instances:
        total = total + char.res(inst.template, inst.pf, inst.quant, m.tile)
    return total + m.calib.res_ctl.scale(m.calib.gamma_ctl)


@dataclass(frozen=True)
class ModelStatistics:
    params: int
    macs: int


def model_statistics(m: DnnModel) -> ModelStatistics:
    """Parameter and multiply-accumulate counts of the model."""
    params = 0
    macs = 0
    for layer in layer_plan(m):
        t, d = layer.template, layer.dims
        params += weight_bytes(t, d.inp.channels, d.out.channels, m.quant) // m.quant.weight_bytes
        k2 = t.kernel * t.kernel
        if t.computational and not t.depthwise:
            macs += d.out.elements * k2 * d.inp.channels
        elif t.depthwise:
            macs += d.out.elements * k2
        else:
            macs += d.out.elements * reduction_factor(d)
    return ModelStatistics(params=params, macs=macs)


class CostModels:
    """Latency/resource estimators bound to a device and characterization."""

    def __init__(self, device: DeviceSpec, char: IpCharacterization):
        self.device = device
        self.char = char

    def est_lat_ms(self, m: DnnModel) -> float:
        return dnn_latency(m, self.device, self.char).ms

    def est_res(self, m: DnnModel) -> ResourceVector:
        return dnn_resource(m, self.char)
