"""
Value types shared by every layer of the explorer: quantization schemes,
resource vectors, tile shapes and feature-map dimensions.

All types are frozen dataclasses.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from codesign.explorer.exceptions import ConfigError, DomainError

RESOURCE_CLASSES: Tuple[str, ...] = ("dsp", "lut", "ff", "bram_kbit")
ALLOWED_BITS = (8, 16)
ACTIVATION_CLIPS = ("relu", "relu4", "relu8")


@dataclass(frozen=True)
class QuantScheme:
    weight_bits: int = 8
    activation_bits: int = 8
    activation_clip: str = "relu"

    def __post_init__(self):
        if self.weight_bits not in ALLOWED_BITS:
            raise ConfigError(f"weight_bits must be one of {ALLOWED_BITS}, got {self.weight_bits}")
        if self.activation_bits not in ALLOWED_BITS:
            raise ConfigError(f"activation_bits must be one of {ALLOWED_BITS}, got {self.activation_bits}")
        if self.activation_clip not in ACTIVATION_CLIPS:
            raise ConfigError(f"activation_clip must be one of {ACTIVATION_CLIPS}, got {self.activation_clip}")

    @property
    def weight_bytes(self) -> int:
        return self.weight_bits // 8

    @property
    def activation_bytes(self) -> int:
        return self.activation_bits // 8

    def with_clip(self, clip: str) -> "QuantScheme":
        return QuantScheme(self.weight_bits, self.activation_bits, clip)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "weight_bits": self.weight_bits,
            "activation_bits": self.activation_bits,
            "activation_clip": self.activation_clip,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QuantScheme":
        return cls(
            weight_bits=int(data.get("weight_bits", 8)),
            activation_bits=int(data.get("activation_bits", 8)),
            activation_clip=data.get("activation_clip", "relu"),
        )


@dataclass(frozen=True)
class ResourceVector:
    """Usage per FPGA resource class. Ordering is component-wise."""

    dsp: float = 0.0
    lut: float = 0.0
    ff: float = 0.0
    bram_kbit: float = 0.0

    def __post_init__(self):
        for name in RESOURCE_CLASSES:
            if getattr(self, name) < 0:
                raise DomainError(f"Resource component {name} must be >= 0, got {getattr(self, name)}")

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(*(getattr(self, n) + getattr(other, n) for n in RESOURCE_CLASSES))

    def __sub__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(*(getattr(self, n) - getattr(other, n) for n in RESOURCE_CLASSES))

    def __le__(self, other: "ResourceVector") -> bool:
        return self.fits_within(other)

    def scale(self, factor: float) -> "ResourceVector":
        return ResourceVector(*(getattr(self, n) * factor for n in RESOURCE_CLASSES))

    def fits_within(self, budget: "ResourceVector") -> bool:
        return all(getattr(self, n) <= getattr(budget, n) for n in RESOURCE_CLASSES)

    def binding_resource(self, budget: "ResourceVector") -> Optional[str]:
        """First resource class (in RESOURCE_CLASSES order) that exceeds the budget."""
        for name in RESOURCE_CLASSES:
            if getattr(self, name) > getattr(budget, name):
                return name
        return None

    def utilization(self, budget: "ResourceVector") -> Dict[str, float]:
        """Usage as a percentage of the budget, per class."""
        result = {}
        for name in RESOURCE_CLASSES:
            cap = getattr(budget, name)
            used = getattr(self, name)
            if cap > 0:
                result[name] = 100.0 * used / cap
            else:
                result[name] = 0.0 if used == 0 else math.inf
        return result

    def to_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in RESOURCE_CLASSES}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ResourceVector":
        unknown = set(data) - set(RESOURCE_CLASSES)
        if unknown:
            raise ConfigError(f"Unknown resource classes: {sorted(unknown)}")
        return cls(**{name: float(data.get(name, 0.0)) for name in RESOURCE_CLASSES})


ZERO_RESOURCES = ResourceVector()


@dataclass(frozen=True)
class TileShape:
    width: int
    height: int
    channels: int

    def __post_init__(self):
        if min(self.width, self.height, self.channels) < 1:
            raise DomainError(f"Tile dimensions must be >= 1, got {self}")

    @property
    def elements(self) -> int:
        return self.width * self.height * self.channels

    def clip_to(self, fmap: "FeatureMap") -> "TileShape":
        """The tile a layer actually sees: never larger than the layer's output map."""
        return TileShape(
            min(self.width, fmap.width),
            min(self.height, fmap.height),
            min(self.channels, fmap.channels),
        )

    def to_dict(self) -> Dict[str, int]:
        return {"width": self.width, "height": self.height, "channels": self.channels}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TileShape":
        return cls(int(data["width"]), int(data["height"]), int(data["channels"]))


@dataclass(frozen=True)
class FeatureMap:
    width: int
    height: int
    channels: int

    @property
    def elements(self) -> int:
        return self.width * self.height * self.channels

    def is_empty(self) -> bool:
        return min(self.width, self.height, self.channels) < 1

    def to_dict(self) -> Dict[str, int]:
        return {"width": self.width, "height": self.height, "channels": self.channels}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FeatureMap":
        return cls(int(data["width"]), int(data["height"]), int(data["channels"]))


@dataclass(frozen=True)
class LayerDims:
    """Input and output feature maps of one layer."""

    inp: FeatureMap
    out: FeatureMap

    @classmethod
    def same(cls, fmap: FeatureMap) -> "LayerDims":
        return cls(fmap, fmap)

    def validate(self) -> "LayerDims":
        if self.inp.is_empty() or self.out.is_empty():
            raise DomainError(f"Layer dimensions must be non-zero, got {self}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {"in": self.inp.to_dict(), "out": self.out.to_dict()}
