"""
Stochastic coordinate descent over (N, PI, X).

Each iteration either accepts the current model (latency inside the
target window and resources inside the budget) or probes a unit move
toward the target along every coordinate, picks one of the useful
coordinates uniformly at random, and jumps floor(|dL| / |dLat|) units
along it.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from codesign.explorer.dnn_model.model import DnnModel
from codesign.explorer.exceptions import ConfigError, RejectedMoveError
from codesign.explorer.ip_catalog.core_types import ResourceVector
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.scd_search.moves import Coordinate, coordinate_move

logger = setup_logger("search", module="scd_search")

ALL_MOVES: Tuple[Coordinate, ...] = (Coordinate.N, Coordinate.PI, Coordinate.X)


class LatencyResourceModels(Protocol):
    def est_lat_ms(self, m: DnnModel) -> float: ...

    def est_res(self, m: DnnModel) -> ResourceVector: ...


@dataclass(frozen=True)
class SearchConfig:
    lat_targ: float
    epsilon: float
    res_max: ResourceVector
    k: int = 3
    seed: int = 0
    max_iters: int = 1000
    moves: Tuple[Coordinate, ...] = ALL_MOVES

    def __post_init__(self):
        if self.lat_targ <= 0:
            raise ConfigError(f"lat_targ must be > 0 ms, got {self.lat_targ}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0 ms, got {self.epsilon}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.moves:
            raise ConfigError("At least one move coordinate must be enabled")
        object.__setattr__(self, "moves", tuple(Coordinate(c) for c in self.moves))


@dataclass(frozen=True)
class SearchStep:
    iteration: int
    action: str  # accept | duplicate | move | hold | perturb
    coordinate: Optional[str]
    steps: int
    lat_ms: float
    res: ResourceVector
    n_rep: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iteration": self.iteration,
            "action": self.action,
            "coordinate": self.coordinate,
            "steps": self.steps,
            "lat_ms": self.lat_ms,
            "res": self.res.to_dict(),
            "n_rep": self.n_rep,
        }

    def log_line(self) -> str:
        coord = self.coordinate or "-"
        return (f"iter={self.iteration} action={self.action} coord={coord} steps={self.steps:+d} "
                f"lat={self.lat_ms:.3f}ms dsp={self.res.dsp:.0f} lut={self.res.lut:.0f} n_rep={self.n_rep}")


@dataclass
class SearchState:
    model: DnnModel
    accepted: List[DnnModel] = field(default_factory=list)
    iteration: int = 0
    trace: List[SearchStep] = field(default_factory=list)


@dataclass(frozen=True)
class SearchResult:
    models: Tuple[DnnModel, ...]
    trace: Tuple[SearchStep, ...]
    complete: bool
    iterations: int


@dataclass(frozen=True)
class Probe:
    coordinate: Coordinate
    moved: DnnModel
    delta_lat: float
    entries: Optional[Tuple[int, ...]] = None


def pick_coordinate(rng: np.random.Generator, candidates: Sequence[Coordinate]) -> Coordinate:
    """Uniform pick among the candidate coordinates."""
    return candidates[int(rng.integers(len(candidates)))]


def structure_key(m: DnnModel) -> tuple:
    return (m.n_rep, m.x_ds, m.f_ds, m.pi_ch)


def within_target(lat: float, res: ResourceVector, cfg: SearchConfig) -> bool:
    return abs(cfg.lat_targ - lat) < cfg.epsilon and res.fits_within(cfg.res_max)


def _ranked_toggles(m: DnnModel, lat: float, direction: int, models: LatencyResourceModels) -> List[Tuple[float, int]]:
    """Down-sampling entries whose toggle moves latency toward the target, best first."""
    ranked = []
    for i in range(m.n_rep - 1):
        try:
            moved = coordinate_move(m, Coordinate.X, 1, entries=[i])
        except RejectedMoveError:
            continue
        gain = direction * (models.est_lat_ms(moved) - lat)
        if gain > 0:
            ranked.append((gain, i))
    ranked.sort(key=lambda item: (-item[0], item[1]))
    return ranked


def probe(m: DnnModel, coord: Coordinate, lat: float, direction: int, models: LatencyResourceModels,
          rng: np.random.Generator) -> Optional[Probe]:
    """
    Unit move toward the target along coord.

    Returns None when the move is impossible or does not move latency in
    the wanted direction.
    """
    entries = None
    try:
        if coord == Coordinate.X:
            ranked = _ranked_toggles(m, lat, direction, models)
            if not ranked:
                return None
            entries = tuple(i for _, i in ranked)
            moved = coordinate_move(m, coord, 1, entries=entries[:1])
        else:
            moved = coordinate_move(m, coord, direction, rng=rng)
    except RejectedMoveError:
        return None
    delta = models.est_lat_ms(moved) - lat
    if delta == 0 or math.copysign(1, delta) != direction:
        return None
    return Probe(coord, moved, delta, entries)


def perturb(m: DnnModel, cfg: SearchConfig, rng: np.random.Generator) -> Tuple[DnnModel, Optional[Coordinate], int]:
    """Random unit move along a random enabled coordinate; m itself when nothing can move."""
    order = [cfg.moves[i] for i in rng.permutation(len(cfg.moves))]
    for coord in order:
        sign = 1 if rng.random() < 0.5 else -1
        for s in (sign, -sign):
            try:
                return coordinate_move(m, coord, s, rng=rng), coord, s
            except RejectedMoveError:
                continue
    return m, None, 0


def _jump(m: DnnModel, p: Probe, steps: int, direction: int, rng: np.random.Generator) -> DnnModel:
    if p.coordinate == Coordinate.X:
        count = min(steps, len(p.entries))
        return coordinate_move(m, Coordinate.X, count, entries=p.entries[:count])
    return coordinate_move(m, p.coordinate, direction * steps, rng=rng)


def scd_search(initial: DnnModel, cfg: SearchConfig, models: LatencyResourceModels) -> SearchResult:
    """
    Search for cfg.k distinct models inside the latency window and budget.

    Args:
        initial: Starting model (usually from initialize_dnn)
        cfg: Target, tolerance, budget, count, seed and iteration cap
        models: Latency/resource estimators

    Returns:
        SearchResult: Accepted models in acceptance order, the iteration
        trace and whether all cfg.k models were found
    """
    rng = np.random.default_rng(cfg.seed)
    state = SearchState(model=initial)
    seen = set()
    label = initial.bundle.label

    def record(action: str, coord: Optional[Coordinate], steps: int, lat: float, res: ResourceVector):
        step = SearchStep(state.iteration, action, coord.value if coord else None, steps, lat, res,
                          state.model.n_rep)
        state.trace.append(step)
        logger.debug(f"{label} {step.log_line()}")

    while state.iteration < cfg.max_iters and len(state.accepted) < cfg.k:
        state.iteration += 1
        m = state.model
        lat = models.est_lat_ms(m)
        res = models.est_res(m)

        if within_target(lat, res, cfg):
            key = structure_key(m)
            if key not in seen:
                seen.add(key)
                state.accepted.append(m)
                record("accept", None, 0, lat, res)
                logger.info(f"{label}: accepted model {len(state.accepted)}/{cfg.k} at {lat:.3f} ms "
                            f"(target {cfg.lat_targ:.3f} ms, n_rep={m.n_rep})")
                if len(state.accepted) >= cfg.k:
                    break
            else:
                record("duplicate", None, 0, lat, res)
            state.model, coord, s = perturb(m, cfg, rng)
            record("perturb", coord, s, lat, res)
            continue

        direction = 1 if lat < cfg.lat_targ else -1
        probes = {}
        for coord in cfg.moves:
            p = probe(m, coord, lat, direction, models, rng)
            if p is not None:
                probes[coord] = p
        if not probes:
            state.model, coord, s = perturb(m, cfg, rng)
            record("perturb", coord, s, lat, res)
            continue

        coord = pick_coordinate(rng, [c for c in cfg.moves if c in probes])
        p = probes[coord]
        if not models.est_res(p.moved).fits_within(cfg.res_max):
            record("hold", coord, 0, lat, res)
            continue

        gap = abs(cfg.lat_targ - lat)
        steps = int(math.floor(gap / abs(p.delta_lat)))
        if steps == 0:
            unit_gap = abs(cfg.lat_targ - (lat + p.delta_lat))
            if unit_gap < gap:
                state.model = p.moved
                record("move", coord, direction, lat, res)
            else:
                record("hold", coord, 0, lat, res)
            continue

        try:
            jumped = _jump(m, p, steps, direction, rng)
        except RejectedMoveError as e:
            logger.debug(f"{label}: {steps}-unit {coord.value} move rejected ({e}); taking the unit move")
            jumped = None
        if jumped is not None and steps > 1 and not models.est_res(jumped).fits_within(cfg.res_max):
            logger.debug(f"{label}: {steps}-unit {coord.value} move exceeds the budget; taking the unit move")
            jumped = None
        if jumped is None:
            jumped, steps = p.moved, 1
        state.model = jumped
        record("move", coord, direction * steps, lat, res)

    complete = len(state.accepted) >= cfg.k
    if not complete:
        logger.warning(f"{label}: max_iters={cfg.max_iters} reached with {len(state.accepted)}/{cfg.k} "
                       f"models for target {cfg.lat_targ:.3f} ms")
    return SearchResult(
        models=tuple(state.accepted),
        trace=tuple(state.trace),
        complete=complete,
        iterations=state.iteration,
    )
