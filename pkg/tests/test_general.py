from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest

from exact_ate.balanced import confidence_set
from exact_ate.core import InputError, ObservedCounts, TestLedger, candidate_grid
from exact_ate.general import (
    CountVector,
    candidate_pvalues,
    confidence_set_general,
    exact_pvalue,
    feasible_v_iter,
)
from exact_ate.oracle import oracle_confidence_set, unit_completions


def _brute_vectors(counts: ObservedCounts, t: int) -> set[tuple[int, int, int, int]]:
    # tau0 = (v10 - v01) / n
    return {v for v in unit_completions(counts) if v[1] - v[2] == t}


def test_feasible_v_iter_small_example():
    counts = ObservedCounts(1, 1, 1, 1)
    got = [v.as_tuple() for v in feasible_v_iter(counts, 0)]
    assert len(got) == len(set(got))
    assert set(got) == _brute_vectors(counts, 0)
    for v in [(2, 0, 0, 2), (2, 1, 1, 0), (1, 1, 1, 1)]:
        assert v in got


def test_feasible_v_iter_forced_completion():
    assert list(feasible_v_iter(ObservedCounts(1, 0, 0, 0), 1)) == [CountVector(0, 1, 0, 0)]


def test_feasible_v_iter_grid_max():
    counts = ObservedCounts(2, 1, 3, 1)
    top = candidate_grid(counts).numerators[-1]
    got = list(feasible_v_iter(counts, top))
    assert got and all(v.v01 == 0 for v in got)


def test_feasible_v_iter_matches_brute_force():
    for cells in itertools.product(range(4), repeat=4):
        counts = ObservedCounts(*cells)
        if counts.n == 0:
            continue
        for t in candidate_grid(counts).numerators:
            assert {v.as_tuple() for v in feasible_v_iter(counts, t)} == _brute_vectors(counts, t)


@pytest.mark.parametrize("p", [Fraction(1, 3), Fraction(2, 5), Fraction(3, 4)])
def test_candidate_pvalues_match_exact(p):
    counts = ObservedCounts(3, 2, 4, 1)
    for t in candidate_grid(counts).numerators:
        for vec, pv in candidate_pvalues(counts, t, p, TestLedger()):
            assert pv == pytest.approx(float(exact_pvalue(counts, t, p, vec)), abs=1e-12)


def test_long_runs_stay_accurate():
    counts = ObservedCounts(0, 150, 0, 150)
    p = Fraction(1, 3)
    ledger = TestLedger()
    pvals = candidate_pvalues(counts, 0, p, ledger)
    assert len(pvals) > 64 and ledger.pmf_updates > 0
    for vec, pv in pvals[::37]:
        assert pv == pytest.approx(float(exact_pvalue(counts, 0, p, vec)), abs=1e-10)


def test_matches_oracle_on_small_tables():
    rng = random.Random(3)
    for _ in range(12):
        counts = ObservedCounts(*(rng.randint(0, 2) for _ in range(4)))
        if counts.n == 0:
            continue
        p = rng.choice([Fraction(1, 3), Fraction(2, 5), Fraction(1, 2)])
        got = confidence_set_general(counts, p, "0.1")
        assert got.accepted == oracle_confidence_set(counts, "general", p, "0.1").accepted


def test_half_agrees_with_balanced():
    for cells in [(2, 6, 8, 0), (6, 4, 4, 6), (3, 0, 0, 3)]:
        counts = ObservedCounts(*cells)
        got = confidence_set_general(counts, "1/2", "0.05")
        assert got.accepted == confidence_set(counts, "0.05").accepted


def test_all_units_in_one_cell():
    for cells in [(5, 0, 0, 0), (0, 5, 0, 0), (0, 0, 5, 0), (0, 0, 0, 5)]:
        counts = ObservedCounts(*cells)
        got = confidence_set_general(counts, "1/3", "0.05")
        assert got.accepted == oracle_confidence_set(counts, "general", "1/3", "0.05").accepted


def test_parallel_matches_serial():
    counts = ObservedCounts(4, 3, 2, 5)
    serial = confidence_set_general(counts, "2/5", "0.05")
    parallel = confidence_set_general(counts, "2/5", "0.05", jobs=2)
    assert serial.accepted == parallel.accepted
    assert serial.ledger.as_dict() == parallel.ledger.as_dict()


def test_invalid_arguments():
    with pytest.raises(InputError):
        confidence_set_general(ObservedCounts(1, 1, 1, 1), "1", "0.05")
    with pytest.raises(InputError):
        confidence_set_general(ObservedCounts(1, 1, 1, 1), "1/3", "0")
