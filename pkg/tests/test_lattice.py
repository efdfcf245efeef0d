from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest

from exact_ate.core import InputError, ScaledThreshold, TestLedger
from exact_ate.lattice import (
    ExactPMFCache,
    LatticePMF,
    RademacherMixSpec,
    WeightedSumSpec,
    compute_probability_via_fft,
    exact_rademacher_tail,
    pmf_direct_convolution,
    pmf_rademacher_mix,
    pmf_run_step,
    pmf_shift_reverse,
    pmf_shift_update,
    pmf_weighted,
    run_step_kernel,
    shift_reanchor_interval,
    two_sided_tail,
)


def _max_diff(a: LatticePMF, b: LatticePMF) -> float:
    lo, hi = min(a.min_index, b.min_index), max(a.max_index, b.max_index)
    return max(abs(float(a.at(i)) - float(b.at(i))) for i in range(lo, hi + 1))


def _as_fractions(pmf: LatticePMF) -> dict[Fraction, Fraction]:
    return {Fraction(i) * pmf.spacing: pmf.at(i) for i in pmf.indices() if pmf.at(i) != 0}


def test_pmf_a2_b2_fractions():
    want = {Fraction(v): Fraction(m, 16) for v, m in zip(range(-3, 4), (1, 2, 3, 4, 3, 2, 1))}
    assert _as_fractions(pmf_direct_convolution(RademacherMixSpec(2, 2), exact=True)) == want
    fft = pmf_rademacher_mix(RademacherMixSpec(2, 2))
    for value, mass in want.items():
        assert fft.at(int(value / fft.spacing)) == pytest.approx(float(mass), abs=1e-15)


def test_pmf_a2_b1_fractions():
    values = [Fraction(k, 2) for k in (-5, -3, -1, 1, 3, 5)]
    want = dict(zip(values, (Fraction(1, 8), Fraction(1, 8), Fraction(1, 4), Fraction(1, 4), Fraction(1, 8), Fraction(1, 8))))
    assert _as_fractions(pmf_direct_convolution(RademacherMixSpec(2, 1), exact=True)) == want


def test_empty_sum_is_point_mass():
    pmf = pmf_rademacher_mix(RademacherMixSpec(0, 0))
    assert pmf.min_index == 0 and list(pmf.mass) == [1.0]


def test_direct_convolution_examples():
    half = pmf_direct_convolution(RademacherMixSpec(0, 1))
    assert half.at(-1) == half.at(1) == 0.5
    three = pmf_direct_convolution(RademacherMixSpec(3, 0))
    assert [three.at(i) for i in (-6, -2, 2, 6)] == [0.125, 0.375, 0.375, 0.125]


def test_direct_convolution_guard():
    with pytest.raises(InputError):
        pmf_direct_convolution(RademacherMixSpec(4000, 97))


@pytest.mark.parametrize(
    "a,b,thr,want",
    [
        (2, 2, ScaledThreshold(4, 2), Fraction(3, 8)),
        (2, 1, ScaledThreshold(3, 2), Fraction(1, 2)),
        (5, 3, ScaledThreshold(13, 2), Fraction(1, 128)),
    ],
)
def test_tail_examples(a, b, thr, want):
    assert exact_rademacher_tail(a, b, thr) == want
    ledger = TestLedger()
    assert compute_probability_via_fft(a, b, thr, ledger) == pytest.approx(float(want), abs=1e-14)
    assert ledger.tail_evaluations == 1


def test_zero_threshold_is_one_without_a_test():
    ledger = TestLedger()
    assert compute_probability_via_fft(4, 3, ScaledThreshold(0, 2), ledger) == 1.0
    assert ledger.tail_evaluations == 0
    assert two_sided_tail(pmf_rademacher_mix(RademacherMixSpec(1, 1)), ScaledThreshold(0, 1)) == 1.0


def test_threshold_off_support_is_rejected():
    with pytest.raises(InputError, match="off support"):
        compute_probability_via_fft(2, 1, ScaledThreshold(2, 2), TestLedger())
    with pytest.raises(InputError, match="lattice mismatch"):
        two_sided_tail(pmf_rademacher_mix(RademacherMixSpec(2, 1)), ScaledThreshold(1, 4))


def test_fft_matches_direct_on_random_specs():
    rng = random.Random(11)
    for _ in range(40):
        spec = RademacherMixSpec(rng.randint(0, 60), rng.randint(0, 60))
        fft, direct = pmf_rademacher_mix(spec), pmf_direct_convolution(spec)
        assert fft.min_index == direct.min_index
        assert np.abs(fft.mass - direct.mass).max() <= 1e-12
        assert abs(fft.total() - 1) <= 1e-12


def test_weighted_single_eta_at_half():
    pmf = pmf_weighted(WeightedSumSpec(1, 0, 0, Fraction(1, 2)))
    assert pmf.spacing == 1 and pmf.at(-2) == pytest.approx(0.5) and pmf.at(2) == pytest.approx(0.5)
    assert pmf.total() == pytest.approx(1.0)


def test_weighted_point_mass_and_three_types():
    assert list(pmf_weighted(WeightedSumSpec(0, 0, 0, Fraction(1, 3))).mass) == [1.0]
    spec = WeightedSumSpec(1, 1, 1, Fraction(1, 3))
    exact = pmf_direct_convolution(spec, exact=True)
    assert exact.denominator == 27 and exact.total() == 1
    assert _max_diff(pmf_weighted(spec), exact) <= 1e-14
    assert abs(pmf_weighted(spec).mean()) <= 1e-12


@pytest.mark.parametrize("p", [Fraction(1, 3), Fraction(2, 5), Fraction(3, 4), Fraction(1, 7)])
def test_weighted_fft_matches_direct(p):
    rng = random.Random(int(p.denominator * 10 + p.numerator))
    for _ in range(10):
        spec = WeightedSumSpec(rng.randint(0, 12), rng.randint(0, 12), rng.randint(0, 12), p)
        assert _max_diff(pmf_weighted(spec), pmf_direct_convolution(spec)) <= 1e-12


def test_shift_update_single_step():
    p = Fraction(1, 3)
    got = pmf_shift_update(pmf_weighted(WeightedSumSpec(0, 0, 1, p)), p)
    want = pmf_direct_convolution(WeightedSumSpec(0, 1, 0, p), exact=True)
    assert _max_diff(got, want) <= 1e-12


@pytest.mark.parametrize("p", [Fraction(1, 3), Fraction(2, 5), Fraction(1, 2), Fraction(5, 6)])
def test_shift_update_then_reverse_restores(p):
    base = pmf_weighted(WeightedSumSpec(2, 3, 4, p))
    assert _max_diff(pmf_shift_reverse(pmf_shift_update(base, p), p), base) <= 1e-10


def test_shift_update_exact_path_is_exact():
    p = Fraction(2, 5)
    pmf = pmf_direct_convolution(WeightedSumSpec(1, 0, 5, p), exact=True)
    for k in range(1, 6):
        pmf = pmf_shift_update(pmf, p)
        want = pmf_direct_convolution(WeightedSumSpec(1, k, 5 - k, p), exact=True)
        assert _as_fractions(pmf) == _as_fractions(want)


def test_shift_update_needs_a_delta_summand():
    p = Fraction(1, 3)
    exact = pmf_direct_convolution(WeightedSumSpec(2, 1, 0, p), exact=True)
    with pytest.raises(InputError):
        pmf_shift_update(exact, p)


def test_shift_update_rejects_wrong_lattice():
    with pytest.raises(InputError, match="off-lattice"):
        pmf_shift_update(pmf_weighted(WeightedSumSpec(1, 1, 1, Fraction(1, 3))), Fraction(2, 5))


def test_run_step_kernel_at_half():
    atoms, weights = run_step_kernel(Fraction(1, 2))
    law: dict[int, float] = {}
    for x, w in zip(atoms, weights):
        law[x] = law.get(x, 0.0) + w
    assert law == {-2: 0.25, 0: 0.5, 2: 0.25}


@pytest.mark.parametrize("p", [Fraction(1, 3), Fraction(2, 5), Fraction(3, 4)])
def test_run_step_matches_fresh_build(p):
    pmf = pmf_weighted(WeightedSumSpec(2, 0, 1, p))
    for k in range(1, 30):
        pmf = pmf_run_step(pmf, p)
        fresh = pmf_weighted(WeightedSumSpec(2, k, k + 1, p))
        assert fresh.min_index == pmf.min_index
        assert np.abs(fresh.mass - pmf.mass).max() <= 1e-12


def test_reanchor_interval():
    assert shift_reanchor_interval(Fraction(1, 2)) == 64
    assert 1 <= shift_reanchor_interval(Fraction(2, 5)) < shift_reanchor_interval(Fraction(1, 3)) <= 64


def test_exact_cache_matches_direct():
    cache = ExactPMFCache("weighted", Fraction(1, 3))
    for key in [(2, 1, 0), (2, 1, 3), (0, 0, 0), (1, 4, 2)]:
        direct = pmf_direct_convolution(WeightedSumSpec(*key, Fraction(1, 3)), exact=True)
        assert _as_fractions(cache.get(key)) == _as_fractions(direct)
    rcache = ExactPMFCache("rademacher")
    assert _as_fractions(rcache.get((2, 2))) == _as_fractions(pmf_direct_convolution(RademacherMixSpec(2, 2), exact=True))
