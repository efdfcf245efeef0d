from __future__ import annotations

from fractions import Fraction

import pytest

from exact_ate.core import InputError, ObservedCounts
from exact_ate.oracle import oracle_confidence_set, oracle_pmax, pair_completions, unit_completions
from exact_ate.pairs import PairObservedCounts


@pytest.mark.parametrize(
    "counts,interval,tests",
    [((2, 6, 8, 0), (-14, 0), 189), ((6, 4, 4, 6), (-7, 12), 1225)],
)
def test_golden_tables(counts, interval, tests):
    result = oracle_confidence_set(ObservedCounts(*counts), "balanced", alpha="0.05")
    assert result.interval == interval
    assert result.ledger.tail_evaluations == tests


def test_single_unit_one_vector_per_candidate():
    counts = ObservedCounts(0, 1, 0, 0)
    for t in (-1, 0):
        _, used = oracle_pmax(counts, t, "balanced")
        assert used == 1


def test_unit_completions_count():
    counts = ObservedCounts(1, 2, 0, 3)
    assert sum(1 for _ in unit_completions(counts)) == 2 * 3 * 1 * 4


def test_pair_toy_case_by_hand():
    # one pair with W = 1 and one with W = 0: missing differences u are free
    counts = PairObservedCounts(1, 0, 0, 1, 0, 0)
    tables = list(pair_completions(counts))
    assert len(tables) == 9
    result = oracle_confidence_set(counts, "pairs", alpha="0.05")
    # two pairs give p >= 1/4 for every completion, so nothing is rejected at 5%
    assert result.accepted == tuple(range(-1, 4))
    p, _ = oracle_pmax(counts, Fraction(-1, 4), "pairs")
    assert p == Fraction(1, 2)


def test_guards_and_designs():
    with pytest.raises(InputError):
        oracle_pmax(ObservedCounts(1, 0, 0, 0), 0, "cluster")
    with pytest.raises(InputError):
        oracle_pmax(ObservedCounts(1, 0, 0, 0), Fraction(1, 3), "balanced")
