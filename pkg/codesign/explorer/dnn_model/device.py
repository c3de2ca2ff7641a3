"""
Target device description.
"""

from dataclasses import dataclass
from typing import Any, Dict

from codesign.explorer.exceptions import ConfigError
from codesign.explorer.ip_catalog.core_types import RESOURCE_CLASSES, ResourceVector


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    budget: ResourceVector
    clock_mhz: float
    bw: float  # off-chip bytes per cycle

    def __post_init__(self):
        if self.clock_mhz <= 0 or self.bw <= 0:
            raise ConfigError(f"Device {self.name}: clock_mhz and bw must be positive")
        if any(getattr(self.budget, n) < 0 for n in RESOURCE_CLASSES):
            raise ConfigError(f"Device {self.name}: budget components must be >= 0")

    def cycles_to_ms(self, cycles: float) -> float:
        return cycles / (self.clock_mhz * 1000.0)

    def ms_to_cycles(self, ms: float) -> float:
        return ms * self.clock_mhz * 1000.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "budget": self.budget.to_dict(),
            "clock_mhz": self.clock_mhz,
            "bw": self.bw,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DeviceSpec":
        unknown = set(data) - {"name", "budget", "clock_mhz", "bw"}
        if unknown:
            raise ConfigError(f"Unknown device keys: {sorted(unknown)}")
        return cls(
            name=data["name"],
            budget=ResourceVector.from_dict(data["budget"]),
            clock_mhz=float(data["clock_mhz"]),
            bw=float(data["bw"]),
        )


# 4.9 Mbit of BRAM, 220 DSPs, 53,200 LUTs, 106,400 FFs; 64-bit AXI port at 100 MHz
PYNQ_Z1 = DeviceSpec(
    name="pynq-z1",
    budget=ResourceVector(dsp=220, lut=53200, ff=106400, bram_kbit=4900),
    clock_mhz=100.0,
    bw=8.0,
)
