"""
DNN structure: bundle replications separated by down-sampling spots and
channel expansions, optionally wrapped in a fixed head and tail.

layer_plan() is the single source of per-layer dimensions; the latency
model, the simulator and the code generator all consume it.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

from codesign.explorer.bundle_arch.bundle import Bundle
from codesign.explorer.exceptions import ConfigError, ModelError
from codesign.explorer.ip_catalog.core_types import (
    FeatureMap,
    LayerDims,
    ResourceVector,
    TileShape,
)
from codesign.explorer.ip_catalog.templates import IpInstance, IpKind, IpTemplate, get_template
from codesign.explorer.utils.file_tools import SCHEMA_VERSION

PURE_REPLICATION = "pure_replication"
FIXED_HEAD_TAIL = "fixed_head_tail"
CONSTRUCTIONS = (PURE_REPLICATION, FIXED_HEAD_TAIL)

EXPANSION_FACTORS: Tuple[float, ...] = (1.2, 1.3, 1.5, 1.75, 2.0)
NO_EXPANSION = 1.0
ALLOWED_EXPANSIONS: Tuple[float, ...] = (NO_EXPANSION,) + EXPANSION_FACTORS

HEAD_TEMPLATES: Tuple[IpTemplate, ...] = (get_template(IpKind.CONV3X3.value),)
TAIL_TEMPLATES: Tuple[IpTemplate, ...] = (get_template(IpKind.AVG_POOL.value), get_template(IpKind.CONV1X1.value))
STEM_STRIDE = 2


@dataclass(frozen=True)
class DnnCalibration:
    """DNN-level constants: inter-bundle data movement and controller overhead."""

    phi: float = 1.0
    lat_dm: float = 0.0
    gamma_ctl: float = 0.0
    res_ctl: ResourceVector = field(default_factory=ResourceVector)

    def __post_init__(self):
        if min(self.phi, self.lat_dm, self.gamma_ctl) < 0:
            raise ConfigError(f"DNN calibration constants must be >= 0, got {self}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "phi": self.phi,
            "lat_dm": self.lat_dm,
            "gamma_ctl": self.gamma_ctl,
            "res_ctl": self.res_ctl.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DnnCalibration":
        return cls(
            phi=float(data["phi"]),
            lat_dm=float(data["lat_dm"]),
            gamma_ctl=float(data["gamma_ctl"]),
            res_ctl=ResourceVector.from_dict(data.get("res_ctl", {})),
        )


@dataclass(frozen=True)
class LayerSpec:
    index: int
    template: IpTemplate
    role: str  # head | bundle | tail
    replication: Optional[int]
    dims: LayerDims

    @property
    def instance_name(self) -> str:
        return f"ip_{self.template.id}"


def expand_channels(channels: int, factor: float, align: int) -> int:
    """ceil(factor * channels), rounded up to a multiple of align."""
    expanded = math.ceil(round(factor * channels, 9))
    return max(align, math.ceil(expanded / align) * align)


@dataclass(frozen=True)
class DnnModel:
    bundle: Bundle
    n_rep: int
    x_ds: Tuple[int, ...]
    f_ds: Tuple[int, ...]
    pi_ch: Tuple[float, ...]
    input_dims: FeatureMap
    tile: TileShape
    calib: DnnCalibration = field(default_factory=DnnCalibration)
    construction: str = PURE_REPLICATION

    def __post_init__(self):
        if not self.bundle.configured:
            raise ModelError(f"Bundle {self.bundle.id} must be configured with pf and quant")
        if self.n_rep < 1:
            raise ModelError(f"n_rep must be >= 1, got {self.n_rep}")
        boundaries = self.n_rep - 1
        for name in ("x_ds", "f_ds", "pi_ch"):
            if len(getattr(self, name)) != boundaries:
                raise ModelError(f"{name} must have {boundaries} entries, got {len(getattr(self, name))}")
        if any(x not in (0, 1) for x in self.x_ds):
            raise ModelError(f"x_ds entries must be 0 or 1, got {self.x_ds}")
        if any(f < 1 for f in self.f_ds):
            raise ModelError(f"f_ds entries must be >= 1, got {self.f_ds}")
        if any(p not in ALLOWED_EXPANSIONS for p in self.pi_ch):
            raise ModelError(f"pi_ch entries must be in {ALLOWED_EXPANSIONS}, got {self.pi_ch}")
        if self.construction not in CONSTRUCTIONS:
            raise ModelError(f"Unknown construction {self.construction!r}")
        if self.input_dims.is_empty():
            raise ModelError(f"Input dims must be non-zero, got {self.input_dims}")

    @property
    def pf(self) -> int:
        return self.bundle.pf

    @property
    def quant(self):
        return self.bundle.quant

    @property
    def has_head_tail(self) -> bool:
        return self.construction == FIXED_HEAD_TAIL

    @property
    def layer_count(self) -> int:
        extra = len(HEAD_TEMPLATES) + len(TAIL_TEMPLATES) if self.has_head_tail else 0
        return self.n_rep * self.bundle.layers_per_bundle + extra

    @property
    def instances(self) -> Tuple[IpInstance, ...]:
        """One instance per distinct template: bundle instances first, then head/tail extras."""
        result = list(self.bundle.instances)
        if self.has_head_tail:
            known = {t.id for t in self.bundle.templates}
            for template in HEAD_TEMPLATES + TAIL_TEMPLATES:
                if template.id not in known:
                    known.add(template.id)
                    result.append(IpInstance(template, self.pf, self.quant))
        return tuple(result)

    @property
    def extra_instances(self) -> Tuple[IpInstance, ...]:
        return self.instances[self.bundle.layers_per_bundle:]

    @property
    def layer_assignment(self) -> Dict[str, List[int]]:
        assignment: Dict[str, List[int]] = {inst.name: [] for inst in self.instances}
        for layer in layer_plan(self):
            assignment[layer.instance_name].append(layer.index)
        return assignment

    def with_structure(self, n_rep: int, x_ds, f_ds, pi_ch) -> "DnnModel":
        return replace(self, n_rep=n_rep, x_ds=tuple(x_ds), f_ds=tuple(f_ds), pi_ch=tuple(pi_ch))


def stem_output(frame: FeatureMap) -> FeatureMap:
    return FeatureMap(frame.width // STEM_STRIDE, frame.height // STEM_STRIDE, frame.channels)


def replication_dims(m: DnnModel) -> List[FeatureMap]:
    """
    Output feature map of every replication.

    Raises:
        ModelError: If down-sampling shrinks the map to nothing
    """
    fmap = stem_output(m.input_dims) if m.has_head_tail else m.input_dims
    if fmap.is_empty():
        raise ModelError(f"Feature map collapses to zero after the stem: {fmap}")
    dims = [fmap]
    for b in range(m.n_rep - 1):
        w, h = fmap.width, fmap.height
        if m.x_ds[b]:
            w, h = w // m.f_ds[b], h // m.f_ds[b]
        c = expand_channels(fmap.channels, m.pi_ch[b], m.tile.channels) if m.pi_ch[b] != NO_EXPANSION else fmap.channels
        fmap = FeatureMap(w, h, c)
        if fmap.is_empty():
            raise ModelError(f"Feature map collapses to zero after replication {b + 1}: {fmap}")
        dims.append(fmap)
    return dims


def layer_plan(m: DnnModel) -> List[LayerSpec]:
    """Every layer of the model in execution order with its dims."""
    layers: List[LayerSpec] = []
    rep_dims = replication_dims(m)

    if m.has_head_tail:
        layers.append(LayerSpec(0, HEAD_TEMPLATES[0], "head", None, LayerDims(m.input_dims, rep_dims[0])))

    prev = rep_dims[0] if m.has_head_tail else m.input_dims
    for r, fmap in enumerate(rep_dims):
        for j, template in enumerate(m.bundle.templates):
            if j == 0:
                # the first layer absorbs the boundary's spatial/channel change
                inp = FeatureMap(fmap.width, fmap.height, prev.channels)
            else:
                inp = fmap
            layers.append(LayerSpec(len(layers), template, "bundle", r, LayerDims(inp, fmap)))
        prev = fmap

    if m.has_head_tail:
        last = rep_dims[-1]
        pooled = FeatureMap(1, 1, last.channels)
        layers.append(LayerSpec(len(layers), TAIL_TEMPLATES[0], "tail", None, LayerDims(last, pooled)))
        head_out = FeatureMap(1, 1, m.tile.channels)
        layers.append(LayerSpec(len(layers), TAIL_TEMPLATES[1], "tail", None, LayerDims(pooled, head_out)))
    return layers


def replication_layers(m: DnnModel, replication: int) -> List[LayerSpec]:
    return [layer for layer in layer_plan(m) if layer.replication == replication]


def dnn_to_dict(m: DnnModel) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "bundle": m.bundle.to_dict(),
        "n_rep": m.n_rep,
        "x_ds": list(m.x_ds),
        "f_ds": list(m.f_ds),
        "pi_ch": list(m.pi_ch),
        "input_dims": m.input_dims.to_dict(),
        "tile": m.tile.to_dict(),
        "calibration": m.calib.to_dict(),
        "construction": m.construction,
        "layer_count": m.layer_count,
        "layer_assignment": m.layer_assignment,
    }


def dnn_from_dict(data: Dict[str, Any]) -> DnnModel:
    return DnnModel(
        bundle=Bundle.from_dict(data["bundle"]),
        n_rep=int(data["n_rep"]),
        x_ds=tuple(int(x) for x in data["x_ds"]),
        f_ds=tuple(int(f) for f in data["f_ds"]),
        pi_ch=tuple(float(p) for p in data["pi_ch"]),
        input_dims=FeatureMap.from_dict(data["input_dims"]),
        tile=TileShape.from_dict(data["tile"]),
        calib=DnnCalibration.from_dict(data["calibration"]) if "calibration" in data else DnnCalibration(),
        construction=data.get("construction", PURE_REPLICATION),
    )
