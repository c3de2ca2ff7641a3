"""
Discrete-event simulator of the tile-pipelined accelerator.

Every layer of a bundle is one pipeline stage. Consecutive stages hand
tiles to each other through simpy Stores whose capacity is the on-chip
buffer depth, so a stage that finishes a tile blocks until its consumer
frees a slot. With transfers on, a loader stage in front reads weights and
input tiles over the read channel and a storer stage at the back writes
output tiles, both at the off-chip bandwidth.

Replications of a DNN run one after another; each replication boundary
costs a fixed synchronization turnaround.
"""

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import simpy

from codesign.explorer.bundle_arch.bundle import Bundle
from codesign.explorer.bundle_arch.estimates import DimsArg, invocation_cycles, per_instance_dims
from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.dnn_model.model import DnnModel, LayerSpec, layer_plan
from codesign.explorer.exceptions import ConfigError, DomainError, SimulationError
from codesign.explorer.ip_catalog.characterization import IpCharacterization, reuse_count, weight_bytes
from codesign.explorer.ip_catalog.core_types import LayerDims, TileShape
from codesign.explorer.ip_catalog.templates import IpInstance
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.utils.file_tools import SCHEMA_VERSION

logger = setup_logger("simulator", module="tile_sim")

LOAD_STAGE = "load"
STORE_STAGE = "store"


@dataclass(frozen=True)
class SimSettings:
    buffer_depth: int = 1
    dm_sync_cycles: int = 4096
    transfers: bool = True

    def __post_init__(self):
        if self.buffer_depth < 1:
            raise ConfigError(f"buffer_depth must be >= 1, got {self.buffer_depth}")
        if self.dm_sync_cycles < 0:
            raise ConfigError(f"dm_sync_cycles must be >= 0, got {self.dm_sync_cycles}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "buffer_depth": self.buffer_depth,
            "dm_sync_cycles": self.dm_sync_cycles,
            "transfers": self.transfers,
        }


@dataclass(frozen=True)
class PipelineStage:
    name: str
    per_tile_cycles: int
    order: int
    instance: Optional[IpInstance] = None
    weight_bytes: int = 0

    def __post_init__(self):
        if self.per_tile_cycles <= 0:
            raise DomainError(f"Stage {self.name}: per_tile_cycles must be > 0, got {self.per_tile_cycles}")


@dataclass(frozen=True)
class SegmentWork:
    """One pipelined pass: a bundle replication, or a single head/tail layer."""

    label: str
    stages: Tuple[PipelineStage, ...]
    tile_count: int
    in_bytes_per_tile: int = 0
    out_bytes_per_tile: int = 0
    sync_before: bool = False


@dataclass(frozen=True)
class TileTiming:
    segment: int
    stage: str
    order: int
    tile: int
    start: int
    finish: int


@dataclass(frozen=True)
class SegmentSpan:
    label: str
    start: int
    finish: int


@dataclass(frozen=True)
class SimTrace:
    total_cycles: int
    transfer_cycles: int
    stalls: int
    timings: Tuple[TileTiming, ...]
    segments: Tuple[SegmentSpan, ...]

    def segment_cycles(self) -> List[int]:
        return [s.finish - s.start for s in self.segments]

    def boundary_gaps(self) -> List[int]:
        return [b.start - a.finish for a, b in zip(self.segments, self.segments[1:])]


class _Recorder:
    def __init__(self):
        self.timings: List[TileTiming] = []
        self.segments: List[SegmentSpan] = []
        self.transfer_cycles = 0
        self.stalls = 0

    def timing(self, segment: int, stage: str, order: int, tile: int, start: int, finish: int):
        self.timings.append(TileTiming(segment, stage, order, tile, start, finish))

    def freeze(self, total: int) -> SimTrace:
        return SimTrace(
            total_cycles=total,
            transfer_cycles=self.transfer_cycles,
            stalls=self.stalls,
            timings=tuple(self.timings),
            segments=tuple(self.segments),
        )


def _hand_off(outbox: simpy.Store, item: int, rec: _Recorder):
    request = outbox.put(item)
    if not request.triggered:
        rec.stalls += 1
    yield request


def _read_cycles(nbytes: int, bw: float) -> int:
    return math.ceil(nbytes / bw)


def _loader(env, seg: int, work: SegmentWork, bw: float, outbox, weights_ready, rec: _Recorder):
    # the first layer's weights gate the pipeline; the rest are prefetched behind the first input tile
    cycles = _read_cycles(work.stages[0].weight_bytes, bw)
    yield env.timeout(cycles)
    rec.transfer_cycles += cycles
    weights_ready[0].succeed()

    for k in range(work.tile_count):
        start = env.now
        cycles = _read_cycles(work.in_bytes_per_tile, bw)
        yield env.timeout(cycles)
        rec.transfer_cycles += cycles
        rec.timing(seg, LOAD_STAGE, 0, k, start, env.now)
        yield from _hand_off(outbox, k, rec)
        if k == 0:
            for j in range(1, len(work.stages)):
                cycles = _read_cycles(work.stages[j].weight_bytes, bw)
                yield env.timeout(cycles)
                rec.transfer_cycles += cycles
                weights_ready[j].succeed()


def _compute(env, seg: int, order: int, stage: PipelineStage, tiles: int, inbox, outbox, weights, rec: _Recorder):
    yield weights
    for k in range(tiles):
        if inbox is not None:
            yield inbox.get()
        start = env.now
        yield env.timeout(stage.per_tile_cycles)
        rec.timing(seg, stage.name, order, k, start, env.now)
        if outbox is not None:
            yield from _hand_off(outbox, k, rec)


def _storer(env, seg: int, order: int, work: SegmentWork, bw: float, inbox, rec: _Recorder):
    for k in range(work.tile_count):
        yield inbox.get()
        start = env.now
        cycles = _read_cycles(work.out_bytes_per_tile, bw)
        yield env.timeout(cycles)
        rec.transfer_cycles += cycles
        rec.timing(seg, STORE_STAGE, order, k, start, env.now)


def _run_segment(env, seg: int, work: SegmentWork, bw: float, settings: SimSettings, rec: _Recorder):
    start = env.now
    offset = 1 if settings.transfers else 0
    positions = len(work.stages) + 2 * offset
    stores = [simpy.Store(env, capacity=settings.buffer_depth) for _ in range(positions - 1)]
    weights_ready = [env.event() for _ in work.stages]

    procs = []
    if settings.transfers:
        procs.append(env.process(_loader(env, seg, work, bw, stores[0], weights_ready, rec)))
    else:
        for event in weights_ready:
            event.succeed()

    for j, stage in enumerate(work.stages):
        pos = offset + j
        inbox = stores[pos - 1] if pos > 0 else None
        outbox = stores[pos] if pos < len(stores) else None
        procs.append(env.process(_compute(env, seg, pos, stage, work.tile_count, inbox, outbox, weights_ready[j], rec)))

    if settings.transfers:
        procs.append(env.process(_storer(env, seg, positions - 1, work, bw, stores[-1], rec)))

    yield env.all_of(procs)
    rec.segments.append(SegmentSpan(work.label, start, env.now))


def check_trace(trace: SimTrace) -> List[str]:
    """
    Re-verify the ordering invariants of a trace.

    Returns:
        List[str]: One message per violation (empty when the trace is causal)
    """
    violations = []
    by_stage = defaultdict(list)
    by_tile = defaultdict(list)
    for t in trace.timings:
        if t.finish < t.start:
            violations.append(f"segment {t.segment} {t.stage} tile {t.tile} finishes before it starts")
        by_stage[(t.segment, t.order)].append(t)
        by_tile[(t.segment, t.tile)].append(t)

    for (seg, order), items in by_stage.items():
        items.sort(key=lambda t: t.tile)
        for prev, cur in zip(items, items[1:]):
            if cur.start < prev.finish:
                violations.append(f"segment {seg} {cur.stage}: tile {cur.tile} starts before tile {prev.tile} finishes")

    for (seg, tile), items in by_tile.items():
        items.sort(key=lambda t: t.order)
        for prev, cur in zip(items, items[1:]):
            if cur.start < prev.finish:
                violations.append(f"segment {seg} tile {tile}: {cur.stage} starts before {prev.stage} finishes")
    return violations


def run_segments(works: Sequence[SegmentWork], bw: float, settings: SimSettings) -> SimTrace:
    """Simulate segments back to back and return the checked trace."""
    if bw <= 0:
        raise DomainError(f"Off-chip bandwidth must be > 0 bytes/cycle, got {bw}")
    if not works:
        raise DomainError("Nothing to simulate")

    env = simpy.Environment()
    rec = _Recorder()

    def driver():
        for i, work in enumerate(works):
            if i > 0 and work.sync_before and settings.dm_sync_cycles:
                yield env.timeout(settings.dm_sync_cycles)
            yield env.process(_run_segment(env, i, work, bw, settings, rec))

    env.process(driver())
    env.run()

    trace = rec.freeze(env.now)
    violations = check_trace(trace)
    if violations:
        raise SimulationError(f"{len(violations)} causality violations, first: {violations[0]}")
    return trace


def simulate_stages(stages: Sequence[PipelineStage], tile_count: int,
                    settings: SimSettings = SimSettings(transfers=False), bw: float = 1.0) -> SimTrace:
    """Push tile_count identical tiles through a bare stage list."""
    if tile_count < 1 or not stages:
        raise DomainError("Need at least one stage and one tile")
    work = SegmentWork("stages", tuple(stages), tile_count)
    return run_segments([work], bw, settings)


def segment_for_layers(label: str, instances: Sequence[IpInstance], dims: Sequence[LayerDims],
                       tile: TileShape, char: IpCharacterization, sync_before: bool = False) -> SegmentWork:
    stages = tuple(
        PipelineStage(
            name=inst.name,
            per_tile_cycles=invocation_cycles(inst, d, tile, char),
            order=j,
            instance=inst,
            weight_bytes=weight_bytes(inst.template, d.inp.channels, d.out.channels, inst.quant),
        )
        for j, (inst, d) in enumerate(zip(instances, dims))
    )
    tiles = reuse_count(instances[-1], dims[-1], tile)
    act = instances[0].quant.activation_bytes
    return SegmentWork(
        label=label,
        stages=stages,
        tile_count=tiles,
        in_bytes_per_tile=math.ceil(dims[0].inp.elements * act / tiles),
        out_bytes_per_tile=math.ceil(dims[-1].out.elements * act / tiles),
        sync_before=sync_before,
    )


def simulate_bundle(bundle: Bundle, layer_dims: DimsArg, tile: TileShape, bw: float,
                    char: IpCharacterization, settings: SimSettings = SimSettings()) -> SimTrace:
    """Simulate one execution of a configured bundle."""
    dims = per_instance_dims(bundle, layer_dims)
    for d in dims:
        d.validate()
    work = segment_for_layers(bundle.label, bundle.instances, dims, tile, char)
    return run_segments([work], bw, settings)


def dnn_segments(m: DnnModel, char: IpCharacterization) -> List[SegmentWork]:
    """Split the layer plan into segments: one per replication, one per head/tail layer."""
    works: List[SegmentWork] = []
    pending: List[LayerSpec] = []

    def flush():
        if pending:
            rep = pending[0].replication
            works.append(segment_for_layers(
                f"replication_{rep}",
                [IpInstance(spec.template, m.pf, m.quant) for spec in pending],
                [spec.dims for spec in pending],
                m.tile,
                char,
                sync_before=rep > 0,
            ))
            pending.clear()

    for layer in layer_plan(m):
        if layer.replication is None:
            flush()
            works.append(segment_for_layers(
                f"{layer.role}_{layer.template.id}",
                [IpInstance(layer.template, m.pf, m.quant)],
                [layer.dims],
                m.tile,
                char,
            ))
        elif pending and pending[0].replication != layer.replication:
            flush()
            pending.append(layer)
        else:
            pending.append(layer)
    flush()
    return works


def simulate_dnn(m: DnnModel, device: DeviceSpec, char: IpCharacterization,
                 settings: SimSettings = SimSettings()) -> SimTrace:
    """Simulate a whole frame: replications run sequentially."""
    trace = run_segments(dnn_segments(m, char), device.bw, settings)
    logger.debug(f"Simulated {m.bundle.label} n_rep={m.n_rep}: {trace.total_cycles} cycles, {trace.stalls} stalls")
    return trace


def trace_to_json(trace: SimTrace) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "total_cycles": trace.total_cycles,
        "transfer_cycles": trace.transfer_cycles,
        "stalls": trace.stalls,
        "segments": [
            {"label": s.label, "start": s.start, "finish": s.finish} for s in trace.segments
        ],
        "tiles": [
            {
                "segment": t.segment,
                "stage": t.stage,
                "order": t.order,
                "tile": t.tile,
                "start": t.start,
                "finish": t.finish,
            }
            for t in trace.timings
        ],
    }
