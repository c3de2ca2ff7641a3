"""Stochastic coordinate descent search for DNNs that meet a latency target."""

from .moves import Coordinate, coordinate_move
from .search import (
    SearchConfig,
    SearchResult,
    SearchStep,
    pick_coordinate,
    scd_search,
    structure_key,
    within_target,
)

__all__ = [
    "Coordinate",
    "coordinate_move",
    "SearchConfig",
    "SearchResult",
    "SearchStep",
    "pick_coordinate",
    "scd_search",
    "structure_key",
    "within_target",
]
