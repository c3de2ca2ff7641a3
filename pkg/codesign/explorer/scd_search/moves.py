"""
Unit moves along the three search coordinates.

    N   replication count; new boundaries start without down-sampling
        and without channel expansion
    PI  channel expansion; one boundary entry steps one rung along the
        expansion ladder per unit
    X   down-sampling; one boundary entry is toggled per unit
"""

from enum import Enum
from typing import Optional, Sequence

import numpy as np

from codesign.explorer.dnn_model.model import (
    ALLOWED_EXPANSIONS,
    NO_EXPANSION,
    DnnModel,
    replication_dims,
)
from codesign.explorer.exceptions import DomainError, ModelError, RejectedMoveError

NEW_BOUNDARY_F_DS = 2


class Coordinate(str, Enum):
    N = "N"
    PI = "PI"
    X = "X"


def _ladder_step(factor: float, direction: int) -> Optional[float]:
    """Next expansion factor in direction, or None at the end of the ladder."""
    i = ALLOWED_EXPANSIONS.index(factor) + direction
    return ALLOWED_EXPANSIONS[i] if 0 <= i < len(ALLOWED_EXPANSIONS) else None


def _move_n(m: DnnModel, steps: int) -> DnnModel:
    n_rep = m.n_rep + steps
    if n_rep < 1:
        raise RejectedMoveError(f"n_rep {m.n_rep} {steps:+d} would drop below 1")
    keep = min(m.n_rep, n_rep) - 1
    grow = max(0, n_rep - m.n_rep)
    return m.with_structure(
        n_rep,
        m.x_ds[:keep] + (0,) * grow,
        m.f_ds[:keep] + (NEW_BOUNDARY_F_DS,) * grow,
        m.pi_ch[:keep] + (NO_EXPANSION,) * grow,
    )


def _move_pi(m: DnnModel, steps: int, rng: Optional[np.random.Generator],
             entries: Optional[Sequence[int]]) -> DnnModel:
    direction = 1 if steps > 0 else -1
    pi = list(m.pi_ch)
    for unit in range(abs(steps)):
        if entries is not None:
            i = entries[unit]
            if _ladder_step(pi[i], direction) is None:
                raise RejectedMoveError(f"Expansion entry {i} at {pi[i]} cannot move {direction:+d}")
        else:
            choices = [i for i, p in enumerate(pi) if _ladder_step(p, direction) is not None]
            if not choices:
                raise RejectedMoveError(f"No expansion entry can move {direction:+d}")
            i = choices[int(rng.integers(len(choices)))] if rng is not None else choices[0]
        pi[i] = _ladder_step(pi[i], direction)
    return m.with_structure(m.n_rep, m.x_ds, m.f_ds, pi)


def _move_x(m: DnnModel, steps: int, rng: Optional[np.random.Generator],
            entries: Optional[Sequence[int]]) -> DnnModel:
    count = abs(steps)
    boundaries = m.n_rep - 1
    if count > boundaries:
        raise RejectedMoveError(f"Cannot toggle {count} down-sampling entries of {boundaries}")
    if entries is None:
        if rng is not None:
            entries = [int(i) for i in rng.choice(boundaries, size=count, replace=False)]
        else:
            entries = list(range(count))
    if len(set(entries[:count])) != count:
        raise RejectedMoveError(f"Down-sampling toggles must name distinct entries, got {entries}")
    x = list(m.x_ds)
    for i in entries[:count]:
        x[i] = 1 - x[i]
    return m.with_structure(m.n_rep, x, m.f_ds, m.pi_ch)


def coordinate_move(m: DnnModel, coord: Coordinate, steps: int, rng: Optional[np.random.Generator] = None,
                    entries: Optional[Sequence[int]] = None) -> DnnModel:
    """
    Move m by steps units along one coordinate.

    For PI the sign of steps is the ladder direction; for X only its
    magnitude matters. entries pins the boundary edited by each unit;
    otherwise rng picks (the lowest candidate index without an rng).

    Raises:
        DomainError: If steps is zero
        RejectedMoveError: If the moved model would break a model invariant
    """
    if steps == 0:
        raise DomainError("A coordinate move needs a non-zero step count")
    coord = Coordinate(coord)
    try:
        if coord == Coordinate.N:
            moved = _move_n(m, steps)
        elif coord == Coordinate.PI:
            moved = _move_pi(m, steps, rng, entries)
        else:
            moved = _move_x(m, steps, rng, entries)
        replication_dims(moved)
    except RejectedMoveError:
        raise
    except ModelError as e:
        raise RejectedMoveError(f"{coord.value} move by {steps:+d} rejected: {e}")
    return moved
