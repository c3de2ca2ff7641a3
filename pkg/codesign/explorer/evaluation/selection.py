"""
Pareto-based bundle selection.

Records are grouped into DSP bands of a fixed width. Within a band a record
survives unless another record is at least as fast and at least as accurate
and strictly better in one of the two.
"""

import math
from collections import defaultdict
from statistics import mean
from typing import Dict, Iterable, List, Optional, Sequence

from codesign.explorer.dnn_model.device import DeviceSpec
from codesign.explorer.evaluation.records import EvalRecord
from codesign.explorer.exceptions import DomainError
from codesign.explorer.ip_catalog.core_types import ResourceVector
from codesign.explorer.logger_utils.logger_utils import setup_logger

logger = setup_logger("selection", module="evaluation")

DEFAULT_BAND_FRACTION = 0.2
DEFAULT_TOP_N = 5


def default_band_width(device: DeviceSpec) -> float:
    return DEFAULT_BAND_FRACTION * device.budget.dsp


def dsp_band(record: EvalRecord, band_width: float) -> int:
    return int(math.floor(record.dsp / band_width))


def dominates(a: EvalRecord, b: EvalRecord) -> bool:
    """a is no slower and no less accurate than b, and strictly better in one."""
    no_worse = a.latency_ms <= b.latency_ms and a.accuracy >= b.accuracy
    better = a.latency_ms < b.latency_ms or a.accuracy > b.accuracy
    return no_worse and better


def group_by_band(records: Iterable[EvalRecord], band_width: float) -> Dict[int, List[EvalRecord]]:
    if band_width <= 0:
        raise DomainError(f"DSP band width must be > 0, got {band_width}")
    bands: Dict[int, List[EvalRecord]] = defaultdict(list)
    for r in records:
        bands[dsp_band(r, band_width)].append(r)
    return dict(bands)


def _band_front(records: List[EvalRecord]) -> List[EvalRecord]:
    # sweep by latency; a record survives if it is the most accurate at its
    # latency and strictly beats every faster record
    ordered = sorted(records, key=lambda r: (r.latency_ms, -r.accuracy))
    front = []
    best_faster = -math.inf
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j].latency_ms == ordered[i].latency_ms:
            j += 1
        group = ordered[i:j]
        top = group[0].accuracy
        if top > best_faster:
            front.extend(r for r in group if r.accuracy == top)
        best_faster = max(best_faster, top)
        i = j
    return front


def pareto_front(records: Sequence[EvalRecord], band_width: float) -> List[EvalRecord]:
    """Non-dominated valid records of every band."""
    front = []
    for _, band in sorted(group_by_band((r for r in records if r.valid), band_width).items()):
        front.extend(_band_front(band))
    return front


def pareto_select(records: Sequence[EvalRecord], band_width: float) -> List[int]:
    """Bundle ids with at least one record on a band's Pareto front."""
    selected = sorted({r.bundle_id for r in pareto_front(records, band_width)})
    logger.info(f"Pareto selection kept bundles {selected} out of {len({r.bundle_id for r in records})}")
    return selected


def _fits(record: EvalRecord, budget: Optional[ResourceVector]) -> bool:
    return budget is None or record.resource.fits_within(budget)


def select_top_bundles(coarse_records: Sequence[EvalRecord], band_width: float, top_n: int = DEFAULT_TOP_N,
                       budget: Optional[ResourceVector] = None) -> List[int]:
    """
    Pareto selection over the records that fit the budget, topped up to
    top_n with the best remaining bundles (accuracy, then latency, then id).
    """
    usable = [r for r in coarse_records if r.valid and _fits(r, budget)]
    if not usable:
        logger.warning("No valid coarse records fit the budget; nothing to select")
        return []
    selected = pareto_select(usable, band_width)
    if len(selected) < top_n:
        for r in sorted(usable, key=lambda r: (-r.accuracy, r.latency_ms, r.bundle_id)):
            if len(selected) >= top_n:
                break
            if r.bundle_id not in selected:
                selected.append(r.bundle_id)
        logger.info(f"Selection topped up to {selected}")
    return selected


def rank_bundles(fine_records: Sequence[EvalRecord], band_width: float,
                 top_n: Optional[int] = None) -> List[int]:
    """
    Order bundles for the search: fine-grained Pareto members first, then
    by mean accuracy (higher first), then by id.
    """
    valid = [r for r in fine_records if r.valid]
    members = {r.bundle_id for r in pareto_front(valid, band_width)}
    by_bundle: Dict[int, List[float]] = defaultdict(list)
    for r in valid:
        by_bundle[r.bundle_id].append(r.accuracy)
    ranked = sorted(by_bundle, key=lambda b: (b not in members, -mean(by_bundle[b]), b))
    return ranked[:top_n] if top_n is not None else ranked
