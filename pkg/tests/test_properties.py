from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from exact_ate.balanced import confidence_set
from exact_ate.core import ObservedCounts, candidate_grid, ht_observed
from exact_ate.lattice import RademacherMixSpec, pmf_rademacher_mix
from exact_ate.pairs import PairObservedCounts, confidence_set_pairs

cells = st.integers(min_value=0, max_value=15)
alphas = st.sampled_from(["0.01", "0.05", "0.1", "0.2"])


@settings(max_examples=150, deadline=None)
@given(cells, cells, cells, cells, alphas)
def test_balanced_set_is_a_short_interval_around_the_estimate(a, b, c, d, alpha):
    counts = ObservedCounts(a, b, c, d)
    if counts.n == 0:
        return
    result = confidence_set(counts, alpha)
    assert result.is_contiguous()
    # the estimate is accepted whenever it lies on the grid
    if 2 * counts.signed_sum in candidate_grid(counts):
        assert result.contains(ht_observed(counts))
    assert result.width <= math.sqrt(32 * math.log(2 / float(result.alpha)) / counts.n) + 1e-12
    if counts.n >= 2:
        assert result.ledger.tail_evaluations <= 8 * math.log2(counts.n)


@settings(max_examples=150, deadline=None)
@given(cells, cells, cells, alphas)
def test_pair_set_is_contiguous_and_contains_estimate(plus, zero, minus, alpha):
    counts = PairObservedCounts.from_rows(plus, zero, minus)
    if counts.m == 0:
        return
    result = confidence_set_pairs(counts, alpha)
    assert result.is_contiguous()
    assert 2 * counts.s_obs in result.accepted
    if counts.n >= 2:
        assert result.ledger.tail_evaluations <= 8 * math.log2(counts.n)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 200), st.integers(0, 200))
def test_rademacher_pmf_is_symmetric_and_normalized(a, b):
    pmf = pmf_rademacher_mix(RademacherMixSpec(a, b))
    assert pmf.min_index == -pmf.max_index
    assert abs(pmf.total() - 1) <= 1e-12
    assert np.abs(pmf.mass - pmf.mass[::-1]).max() <= 1e-12
