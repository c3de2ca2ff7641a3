"""
Bundle types: the ordered layer sequence that every DNN in the search is
replicated from, and its calibration constants.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

from codesign.explorer.exceptions import ConfigError
from codesign.explorer.ip_catalog.core_types import ZERO_RESOURCES, QuantScheme, ResourceVector
from codesign.explorer.ip_catalog.templates import IpInstance, IpTemplate, get_template
from codesign.explorer.logger_utils.logger_utils import setup_logger

logger = setup_logger("bundle", module="bundle_arch")

MAX_COMPUTATIONAL_IPS = 2
CALIBRATION_FLOOR = 1e-6
CALIBRATION_CEILING = 1.5


@dataclass(frozen=True)
class BundleCalibration:
    """Overlap factors of the bundle latency model plus the bundle resource overhead."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma_res: ResourceVector = field(default_factory=ResourceVector)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")

    @classmethod
    def clamped(cls, alpha: float, beta: float, gamma_res: ResourceVector = ZERO_RESOURCES,
                label: str = "") -> "BundleCalibration":
        """Build a calibration from raw fitted factors, clamping both into (0, 1.5]."""
        values = []
        for name, raw in (("alpha", alpha), ("beta", beta)):
            value = min(max(raw, CALIBRATION_FLOOR), CALIBRATION_CEILING)
            if value != raw:
                logger.warning(f"Calibration {label} {name}={raw:.6g} outside (0, {CALIBRATION_CEILING}]; clamped to {value:.6g}")
            values.append(value)
        return cls(alpha=values[0], beta=values[1], gamma_res=gamma_res)

    def to_dict(self) -> Dict[str, Any]:
        return {"alpha": self.alpha, "beta": self.beta, "gamma_res": self.gamma_res.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BundleCalibration":
        return cls(
            alpha=float(data["alpha"]),
            beta=float(data["beta"]),
            gamma_res=ResourceVector.from_dict(data.get("gamma_res", {})),
        )


@dataclass(frozen=True)
class DataFootprint:
    bytes_in: int
    bytes_out: int
    bytes_weights: int

    @property
    def total(self) -> int:
        return self.bytes_in + self.bytes_out + self.bytes_weights


@dataclass(frozen=True)
class Bundle:
    """
    A sequence of layer templates executed top to bottom.

    Unconfigured bundles are skeletons; configure() fixes the parallel
    factor and quantization shared by every instance.
    """

    id: int
    templates: Tuple[IpTemplate, ...]
    calib: BundleCalibration = field(default_factory=BundleCalibration)
    pf: Optional[int] = None
    quant: Optional[QuantScheme] = None

    def __post_init__(self):
        if not self.templates:
            raise ConfigError(f"Bundle {self.id} has no layers")
        if self.computational_count > MAX_COMPUTATIONAL_IPS:
            raise ConfigError(
                f"Bundle {self.id} has {self.computational_count} computational IPs (max {MAX_COMPUTATIONAL_IPS})"
            )
        ids = [t.id for t in self.templates]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"Bundle {self.id} repeats an IP template: {ids}")

    @property
    def name(self) -> str:
        return "+".join(t.id for t in self.templates)

    @property
    def label(self) -> str:
        return f"bundle_{self.id:02d}"

    @property
    def computational_count(self) -> int:
        return sum(1 for t in self.templates if t.computational)

    @property
    def layers_per_bundle(self) -> int:
        return len(self.templates)

    @property
    def configured(self) -> bool:
        return self.pf is not None and self.quant is not None

    @property
    def instances(self) -> Tuple[IpInstance, ...]:
        if not self.configured:
            raise ConfigError(f"Bundle {self.id} has no parallel factor / quantization yet")
        return tuple(IpInstance(t, self.pf, self.quant) for t in self.templates)

    def configure(self, pf: int, quant: QuantScheme) -> "Bundle":
        return replace(self, pf=pf, quant=quant)

    def with_calibration(self, calib: BundleCalibration) -> "Bundle":
        return replace(self, calib=calib)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "id": self.id,
            "name": self.name,
            "instances": [t.id for t in self.templates],
            "calibration": self.calib.to_dict(),
        }
        if self.configured:
            data["pf"] = self.pf
            data["quant"] = self.quant.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Bundle":
        quant = QuantScheme.from_dict(data["quant"]) if "quant" in data else None
        calib = BundleCalibration.from_dict(data["calibration"]) if "calibration" in data else BundleCalibration()
        return cls(
            id=int(data["id"]),
            templates=tuple(get_template(t) for t in data["instances"]),
            calib=calib,
            pf=data.get("pf"),
            quant=quant,
        )
