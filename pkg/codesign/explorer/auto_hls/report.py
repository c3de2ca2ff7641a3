"""
Estimation report for a generated DNN: analytical latency and resources
against the device budget, cross-checked with the tile simulator.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.estimates import LatencyEstimate, dnn_latency, dnn_resource
from codesign.explorer.dnn_model.model import DnnModel
from codesign.explorer.ip_catalog.characterization import IpCharacterization
from codesign.explorer.ip_catalog.core_types import ResourceVector
from codesign.explorer.tile_sim.simulator import SimSettings, simulate_dnn
from codesign.explorer.utils.file_tools import SCHEMA_VERSION


@dataclass(frozen=True)
class EstimateReport:
    device: DeviceSpec
    latency: LatencyEstimate
    resource: ResourceVector
    sim_cycles: Optional[int] = None

    @property
    def utilization(self) -> Dict[str, float]:
        return self.resource.utilization(self.device.budget)

    @property
    def fits(self) -> bool:
        return self.resource.fits_within(self.device.budget)

    @property
    def sim_ms(self) -> Optional[float]:
        return None if self.sim_cycles is None else self.device.cycles_to_ms(self.sim_cycles)

    @property
    def sim_error(self) -> Optional[float]:
        """Relative gap between the analytical estimate and the simulator."""
        if not self.sim_cycles:
            return None
        return abs(self.latency.cycles - self.sim_cycles) / self.sim_cycles


def estimate_report(m: DnnModel, device: DeviceSpec, char: IpCharacterization,
                    sim_settings: Optional[SimSettings] = SimSettings()) -> EstimateReport:
    """
    Latency and resources of m on device.

    The latency is exactly dnn_latency(m, device, char). Pass
    sim_settings=None to skip the simulator cross-check.
    """
    sim_cycles = None
    if sim_settings is not None:
        sim_cycles = simulate_dnn(m, device, char, sim_settings).total_cycles
    return EstimateReport(
        device=device,
        latency=dnn_latency(m, device, char),
        resource=dnn_resource(m, char),
        sim_cycles=sim_cycles,
    )


def report_to_json(report: EstimateReport) -> Dict[str, Any]:
    lat = report.latency
    return {
        "schema_version": SCHEMA_VERSION,
        "device": report.device.to_dict(),
        "latency": {
            "cycles": lat.cycles,
            "ms": lat.ms,
            "per_replication_cycles": list(lat.per_replication),
            "head_tail_cycles": lat.head_tail_cycles,
            "data_movement_cycles": lat.data_movement_cycles,
        },
        "resource": report.resource.to_dict(),
        "utilization_pct": report.utilization,
        "fits_budget": report.fits,
        "simulation": {
            "cycles": report.sim_cycles,
            "ms": report.sim_ms,
            "relative_error": report.sim_error,
        },
    }
