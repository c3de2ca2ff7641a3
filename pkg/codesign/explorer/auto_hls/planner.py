"""
Code generation planning.

A plan fixes everything the emitter needs: one compute function per IP
instance, the call schedule (every layer exactly once), the on-chip
buffers that carry tiles between layers of a replication, the off-chip
arrays that hold feature maps between replications, and the offsets of
each layer's weights in the packed weight image.

Replications run as spatial tile loops over on-chip buffers. Head and
tail layers run directly on off-chip arrays.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from codesign.explorer.bundle_arch.estimates import invocation_cycles
from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.model import DnnModel, LayerSpec, layer_plan, replication_dims
from codesign.explorer.exceptions import PlanningError
from codesign.explorer.ip_catalog.characterization import IpCharacterization, weight_bytes
from codesign.explorer.ip_catalog.core_types import FeatureMap, LayerDims, TileShape
from codesign.explorer.ip_catalog.templates import IpInstance, IpKind, IpTemplate
from codesign.explorer.logger_utils.logger_utils import setup_logger

logger = setup_logger("planner", module="auto_hls")

ON_CHIP = "on_chip"
OFF_CHIP = "off_chip"

FRAME_PORT = "frame"
RESULT_PORT = "result"

POST_NORMALIZATION = 1
POST_ACTIVATION = 2
_POST_BITS = {IpKind.NORMALIZATION: POST_NORMALIZATION, IpKind.ACTIVATION: POST_ACTIVATION}


@dataclass(frozen=True)
class PlanOptions:
    """Optional manual optimizations, both off by default."""

    reallocate_buffers: bool = False
    fuse_elementwise: bool = False

    def to_dict(self) -> Dict[str, bool]:
        return {"reallocate_buffers": self.reallocate_buffers, "fuse_elementwise": self.fuse_elementwise}


@dataclass(frozen=True)
class InstanceDecl:
    name: str
    template: IpTemplate
    pf: int
    weight_buffer_bytes: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "template": self.template.id,
            "pf": self.pf,
            "weight_buffer_bytes": self.weight_buffer_bytes,
        }


@dataclass(frozen=True)
class BufferSpec:
    name: str
    location: str  # on_chip | off_chip
    size_bytes: int
    offset: int = 0
    users: Tuple[int, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "location": self.location,
            "size_bytes": self.size_bytes,
            "offset": self.offset,
            "users": list(self.users),
        }


@dataclass(frozen=True)
class WeightLoad:
    layer: int
    instance: str
    offset: int
    size_bytes: int

    def to_dict(self) -> Dict[str, Any]:
        return {"layer": self.layer, "instance": self.instance, "offset": self.offset, "size_bytes": self.size_bytes}


@dataclass(frozen=True)
class CallSpec:
    """One compute-function call. Fused element-wise layers ride along in layers[1:]."""

    index: int
    instance: str
    layers: Tuple[int, ...]
    role: str
    replication: Optional[int]
    dims: LayerDims
    tile_loop: Tuple[int, int, int]
    in_buffer: str
    out_buffer: str
    weight_offset: Optional[int]
    post_ops: int
    post_offset: Optional[int]
    cycles_per_invocation: int

    @property
    def invocations(self) -> int:
        nw, nh, nc = self.tile_loop
        return nw * nh * nc

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "instance": self.instance,
            "layers": list(self.layers),
            "role": self.role,
            "replication": self.replication,
            "dims": self.dims.to_dict(),
            "tile_loop": list(self.tile_loop),
            "invocations": self.invocations,
            "in_buffer": self.in_buffer,
            "out_buffer": self.out_buffer,
            "weight_offset": self.weight_offset,
            "post_ops": self.post_ops,
            "post_offset": self.post_offset,
            "cycles_per_invocation": self.cycles_per_invocation,
        }


@dataclass(frozen=True)
class Segment:
    """A replication's tile loop (tiled) or a single head/tail call (direct)."""

    label: str
    tiled: bool
    source: str
    dest: str
    source_dims: FeatureMap
    out_dims: FeatureMap
    step: int
    calls: Tuple[CallSpec, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "tiled": self.tiled,
            "source": self.source,
            "dest": self.dest,
            "source_dims": self.source_dims.to_dict(),
            "out_dims": self.out_dims.to_dict(),
            "step": self.step,
            "calls": [c.index for c in self.calls],
        }


@dataclass(frozen=True)
class CodegenPlan:
    model: DnnModel
    options: PlanOptions
    instances: Tuple[InstanceDecl, ...]
    segments: Tuple[Segment, ...]
    buffers: Tuple[BufferSpec, ...]
    weight_loads: Tuple[WeightLoad, ...]
    device: DeviceSpec

    @property
    def bram_budget_bytes(self) -> int:
        return int(self.device.budget.bram_kbit * 1024 // 8)

    @property
    def tile(self) -> TileShape:
        return self.model.tile

    @property
    def schedule(self) -> Tuple[CallSpec, ...]:
        return tuple(c for s in self.segments for c in s.calls)

    @property
    def on_chip_bytes(self) -> int:
        return sum(b.size_bytes for b in self.buffers if b.location == ON_CHIP) + sum(
            i.weight_buffer_bytes for i in self.instances
        )

    @property
    def off_chip_bytes(self) -> int:
        return sum(b.size_bytes for b in self.buffers if b.location == OFF_CHIP)

    @property
    def weight_image_bytes(self) -> int:
        return sum(w.size_bytes for w in self.weight_loads)

    @property
    def bram_utilization(self) -> float:
        return 100.0 * self.on_chip_bytes / self.bram_budget_bytes

    def buffer(self, name: str) -> BufferSpec:
        for b in self.buffers:
            if b.name == name:
                return b
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "device": self.device.name,
            "options": self.options.to_dict(),
            "instances": [i.to_dict() for i in self.instances],
            "segments": [s.to_dict() for s in self.segments],
            "schedule": [c.to_dict() for c in self.schedule],
            "buffers": [b.to_dict() for b in self.buffers],
            "weight_loads": [w.to_dict() for w in self.weight_loads],
            "on_chip_bytes": self.on_chip_bytes,
            "off_chip_bytes": self.off_chip_bytes,
            "weight_image_bytes": self.weight_image_bytes,
            "bram_budget_bytes": self.bram_budget_bytes,
            "bram_utilization": self.bram_utilization,
        }


def _tile_loop(out: FeatureMap, tile: TileShape) -> Tuple[int, int, int]:
    return (math.ceil(out.width / tile.width), math.ceil(out.height / tile.height),
            math.ceil(out.channels / tile.channels))


def _staged_weight_bytes(template: IpTemplate, in_channels: int, tile: TileShape, wbytes: int) -> int:
    """Weights staged on chip for one output-channel tile."""
    k2 = template.kernel * template.kernel
    if template.computational and not template.depthwise:
        return k2 * in_channels * tile.channels * wbytes
    if template.depthwise:
        return k2 * tile.channels * wbytes
    if template.kind == IpKind.NORMALIZATION:
        return 2 * tile.channels * wbytes
    return 0


def _group_calls(layers: List[LayerSpec], fuse: bool) -> List[List[LayerSpec]]:
    """Fold normalization/activation layers into the preceding computational layer."""
    groups: List[List[LayerSpec]] = []
    for layer in layers:
        kind = layer.template.kind
        if fuse and groups and layer.replication is not None and kind in _POST_BITS:
            head = groups[-1][0]
            used = {g.template.kind for g in groups[-1][1:]}
            if head.template.computational and head.replication == layer.replication and kind not in used:
                groups[-1].append(layer)
                continue
        groups.append([layer])
    return groups


class _Planner:
    def __init__(self, m: DnnModel, device: DeviceSpec, char: IpCharacterization, options: PlanOptions):
        self.m = m
        self.device = device
        self.char = char
        self.options = options
        self.act = m.quant.activation_bytes
        self.wbytes = m.quant.weight_bytes
        self.weight_offsets: Dict[int, int] = {}
        self.weight_loads: List[WeightLoad] = []
        self.staged: Dict[str, int] = {}
        self.edge_sizes: Dict[int, int] = {}
        self.edge_users: Dict[int, List[int]] = {}
        self.off_chip: List[BufferSpec] = []

    def _pack_weights(self, plan: List[LayerSpec]):
        offset = 0
        for layer in plan:
            d = layer.dims
            size = weight_bytes(layer.template, d.inp.channels, d.out.channels, self.m.quant)
            name = layer.instance_name
            self.staged[name] = max(self.staged.get(name, 0),
                                    _staged_weight_bytes(layer.template, d.inp.channels, self.m.tile, self.wbytes))
            if size:
                self.weight_offsets[layer.index] = offset
                self.weight_loads.append(WeightLoad(layer.index, name, offset, size))
                offset += size

    def _add_off_chip(self, name: str, fmap: FeatureMap) -> str:
        offset = sum(b.size_bytes for b in self.off_chip)
        self.off_chip.append(BufferSpec(name, OFF_CHIP, fmap.elements * self.act, offset))
        return name

    def _edge_name(self, k: int, last: int) -> str:
        if self.options.reallocate_buffers:
            return "pool_a" if k % 2 == 0 else "pool_b"
        if k == 0:
            return "tile_in"
        if k == last:
            return "tile_out"
        return f"link_{k}"

    def _use_edge(self, k: int, fmap: FeatureMap, call: int):
        tile = self.m.tile
        size = min(tile.width, fmap.width) * min(tile.height, fmap.height) * fmap.channels * self.act
        self.edge_sizes[k] = max(self.edge_sizes.get(k, 0), size)
        self.edge_users.setdefault(k, []).append(call)

    def _call(self, index: int, group: List[LayerSpec], in_buffer: str, out_buffer: str) -> CallSpec:
        first = group[0]
        dims = LayerDims(first.dims.inp, group[-1].dims.out)
        post_ops = 0
        post_offset = None
        for layer in group[1:]:
            post_ops |= _POST_BITS[layer.template.kind]
            if layer.template.kind == IpKind.NORMALIZATION:
                post_offset = self.weight_offsets.get(layer.index)
        inst = IpInstance(first.template, self.m.pf, self.m.quant)
        return CallSpec(
            index=index,
            instance=first.instance_name,
            layers=tuple(layer.index for layer in group),
            role=first.role,
            replication=first.replication,
            dims=dims,
            tile_loop=_tile_loop(dims.out, self.m.tile),
            in_buffer=in_buffer,
            out_buffer=out_buffer,
            weight_offset=self.weight_offsets.get(first.index),
            post_ops=post_ops,
            post_offset=post_offset,
            cycles_per_invocation=invocation_cycles(inst, first.dims, self.m.tile, self.char),
        )

    def build(self) -> CodegenPlan:
        m = self.m
        plan = layer_plan(m)
        rep_dims = replication_dims(m)
        self._pack_weights(plan)

        segments: List[Segment] = []
        calls = 0
        current = FRAME_PORT
        current_dims = m.input_dims
        ordered: List[Tuple[Optional[int], List[LayerSpec]]] = []
        for layer in plan:
            if layer.replication is None:
                ordered.append((None, [layer]))
            elif ordered and ordered[-1][0] == layer.replication:
                ordered[-1][1].append(layer)
            else:
                ordered.append((layer.replication, [layer]))

        for position, (rep, layers) in enumerate(ordered):
            final = position == len(ordered) - 1
            out_dims = layers[-1].dims.out
            if final:
                dest = RESULT_PORT
            elif rep is None:
                dest = self._add_off_chip(f"fmap_{layers[0].role}_{layers[0].template.id}", out_dims)
            else:
                dest = self._add_off_chip(f"fmap_{rep}", out_dims)

            groups = _group_calls(layers, self.options.fuse_elementwise)
            if rep is None:
                call = self._call(calls, groups[0], current, dest)
                calls += 1
                segments.append(Segment(f"{layers[0].role}_{layers[0].template.id}", False, current, dest,
                                        current_dims, out_dims, 1, (call,)))
            else:
                fmap = rep_dims[rep]
                step = max(1, current_dims.width // fmap.width)
                last = len(groups)
                seg_calls = []
                for k, group in enumerate(groups):
                    self._use_edge(k, group[0].dims.inp, calls)
                    self._use_edge(k + 1, group[-1].dims.out, calls)
                    seg_calls.append(self._call(calls, group, self._edge_name(k, last), self._edge_name(k + 1, last)))
                    calls += 1
                segments.append(Segment(f"replication_{rep}", True, current, dest, current_dims, out_dims, step,
                                        tuple(seg_calls)))
            current, current_dims = dest, out_dims

        on_chip = self._on_chip_buffers()
        instances = tuple(
            InstanceDecl(inst.name, inst.template, inst.pf, self.staged.get(inst.name, 0)) for inst in m.instances
        )
        result = CodegenPlan(
            model=m,
            options=self.options,
            instances=instances,
            segments=tuple(segments),
            buffers=tuple(on_chip + self.off_chip),
            weight_loads=tuple(self.weight_loads),
            device=self.device,
        )
        self._check_bram(result)
        return result

    def _on_chip_buffers(self) -> List[BufferSpec]:
        if not self.edge_sizes:
            return []
        last = max(self.edge_sizes)
        if self.options.reallocate_buffers:
            size = max(self.edge_sizes.values())
            pools = []
            for name, parity in (("pool_a", 0), ("pool_b", 1)):
                users = sorted(c for k, u in self.edge_users.items() if k % 2 == parity for c in u)
                if users:
                    pools.append(BufferSpec(name, ON_CHIP, size, users=tuple(sorted(set(users)))))
            return pools
        return [
            BufferSpec(self._edge_name(k, last), ON_CHIP, self.edge_sizes[k],
                       users=tuple(sorted(set(self.edge_users[k]))))
            for k in sorted(self.edge_sizes)
        ]

    def _check_bram(self, result: CodegenPlan):
        budget = result.bram_budget_bytes
        used = 0
        named = [(b.name, b.size_bytes) for b in result.buffers if b.location == ON_CHIP]
        named += [(f"wbuf_{i.name}", i.weight_buffer_bytes) for i in result.instances if i.weight_buffer_bytes]
        for name, size in named:
            used += size
            if used > budget:
                raise PlanningError(
                    f"On-chip buffers need {used} bytes at '{name}' but {self.device.name} has {budget} bytes of BRAM",
                    buffer_name=name,
                )


def plan(m: DnnModel, device: DeviceSpec, char: IpCharacterization, options: PlanOptions = PlanOptions()) -> CodegenPlan:
    """
    Build the code generation plan of a model.

    Args:
        m: Model to generate
        device: Target device; its BRAM budget bounds the on-chip buffers
        char: Characterization used for per-call cycle annotations
        options: Optional buffer re-allocation and element-wise fusion passes

    Returns:
        CodegenPlan: Deterministic plan covering every layer exactly once

    Raises:
        PlanningError: If the on-chip buffers do not fit the device BRAM
    """
    result = _Planner(m, device, char, options).build()
    logger.info(
        f"Planned {m.bundle.label} n_rep={m.n_rep}: {len(result.schedule)} calls, "
        f"{result.on_chip_bytes} on-chip bytes ({result.bram_utilization:.1f}% of BRAM)"
    )
    return result
