import numpy as np
import pytest

from codesign.explorer.evaluation.records import EvalRecord, records_from_json, records_to_csv, records_to_json
from codesign.explorer.evaluation.selection import (
    dominates,
    pareto_front,
    pareto_select,
    rank_bundles,
    select_top_bundles,
)
from codesign.explorer.exceptions import DomainError
from codesign.explorer.ip_catalog.core_types import QuantScheme, ResourceVector


def rec(bundle_id, latency, accuracy, dsp=10.0, n_rep=1, method="fixed_head_tail"):
    return EvalRecord(bundle_id=bundle_id, method=method, pf=1, quant=QuantScheme(), latency_ms=latency,
                      resource=ResourceVector(dsp=dsp), accuracy=accuracy, n_rep=n_rep)


def oracle_select(records, band_width):
    bands = {}
    for r in records:
        bands.setdefault(int(r.dsp // band_width), []).append(r)
    survivors = set()
    for peers in bands.values():
        for r in peers:
            if not any(dominates(o, r) for o in peers):
                survivors.add(r.bundle_id)
    return sorted(survivors)


def test_dominance():
    assert dominates(rec(1, 10, 0.8), rec(2, 12, 0.7))
    assert dominates(rec(1, 10, 0.8), rec(2, 10, 0.7))
    assert not dominates(rec(1, 10, 0.8), rec(2, 10, 0.8))
    assert not dominates(rec(1, 10, 0.6), rec(2, 12, 0.7))


def test_front_within_one_band():
    records = [rec(1, 10, 0.80), rec(2, 12, 0.70), rec(3, 12, 0.90), rec(4, 15, 0.85)]
    assert pareto_select(records, band_width=100) == [1, 3]


def test_equal_records_both_survive():
    assert pareto_select([rec(1, 10, 0.8), rec(2, 10, 0.8)], band_width=100) == [1, 2]


def test_bands_are_judged_separately():
    records = [rec(1, 10, 0.9, dsp=5), rec(2, 20, 0.5, dsp=50)]
    assert pareto_select(records, band_width=20) == [1, 2]
    assert pareto_select(records, band_width=100) == [1]


def test_invalid_records_are_ignored():
    failed = EvalRecord(bundle_id=9, method="fixed_head_tail", pf=1, quant=QuantScheme(), latency_ms=1.0,
                        resource=ResourceVector(), accuracy=None, error="boom")
    assert pareto_front([failed, rec(1, 10, 0.5)], 100) == [rec(1, 10, 0.5)]


def test_band_width_must_be_positive():
    with pytest.raises(DomainError):
        pareto_select([rec(1, 10, 0.5)], band_width=0)


def test_record_validation():
    with pytest.raises(DomainError):
        rec(1, 0.0, 0.5)
    with pytest.raises(DomainError):
        rec(1, 10, 1.5)
    with pytest.raises(DomainError):
        rec(1, 10, 0.5, method="nas")


@pytest.mark.timeout(120)
def test_matches_brute_force():
    rng = np.random.default_rng(1234)
    for _ in range(200):
        size = int(rng.integers(5, 201))
        records = [
            rec(
                bundle_id=int(rng.integers(1, 19)),
                latency=float(rng.integers(1, 40)),
                accuracy=round(float(rng.uniform(0.3, 0.9)), 2),
                dsp=float(rng.integers(0, 220)),
            )
            for _ in range(size)
        ]
        assert pareto_select(records, band_width=44) == oracle_select(records, 44)


def test_top_up_to_n():
    records = [rec(1, 10, 0.9), rec(2, 12, 0.8), rec(3, 11, 0.85), rec(4, 20, 0.6)]
    assert select_top_bundles(records, band_width=100, top_n=1) == [1]
    assert select_top_bundles(records, band_width=100, top_n=3) == [1, 3, 2]


def test_budget_filters_records():
    records = [rec(1, 10, 0.9, dsp=300), rec(2, 12, 0.8, dsp=100)]
    assert select_top_bundles(records, band_width=44, top_n=1, budget=ResourceVector(dsp=220)) == [2]
    assert select_top_bundles(records, band_width=44, budget=ResourceVector(dsp=50)) == []


def test_rank_bundles():
    records = [
        rec(1, 10, 0.70, n_rep=1), rec(1, 20, 0.74, n_rep=2),
        rec(2, 30, 0.72, n_rep=1),
        rec(3, 11, 0.90, n_rep=1), rec(3, 21, 0.91, n_rep=2),
    ]
    assert rank_bundles(records, band_width=100) == [3, 1, 2]
    assert rank_bundles(records, band_width=100, top_n=1) == [3]


def test_report_formats():
    records = [rec(2, 12, 0.8), rec(1, 10, 0.9)]
    data = records_to_json(records)
    assert [r["bundle_id"] for r in data["records"]] == [1, 2]
    assert records_from_json(data) == sorted(records, key=EvalRecord.sort_key)
    lines = records_to_csv(records).splitlines()
    assert lines[0].startswith("bundle_id,method,n_rep,pf")
    assert len(lines) == 3
