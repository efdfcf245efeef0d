from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from exact_ate.core import InputError
from exact_ate.simulate import SimulationConfig, presets, simulate, wald_ci

ALPHA = Fraction(1, 20)


def test_wald_plug_in_example():
    y = np.array([1] * 25 + [0] * 25 + [1] * 25 + [0] * 25)
    z = np.array([1] * 50 + [0] * 50)
    lo, hi = wald_ci(y, z, ALPHA)
    assert lo == pytest.approx(-1.959964 * 0.1, abs=1e-6)
    assert hi == pytest.approx(1.959964 * 0.1, abs=1e-6)


def test_wald_degenerate_cases():
    z = np.array([1, 0, 1, 0])
    assert wald_ci(np.ones(4, dtype=int), z, ALPHA) == (0.0, 0.0)
    assert wald_ci(np.ones(4, dtype=int), np.ones(4, dtype=int), ALPHA) is None
    lo, hi = wald_ci(np.array([1, 1, 1]), np.array([1, 0, 1]), ALPHA, design="matched_pairs")
    assert lo == hi == 1.0


def test_wald_ht_variant():
    y = np.array([1, 0, 1, 1])
    z = np.array([1, 1, 0, 0])
    lo, hi = wald_ci(y, z, ALPHA, variant="ht")
    # HT estimate (1 - 2) * 2 / 4 = -1/2, variance (4 + 8) / 16
    assert (lo + hi) / 2 == pytest.approx(-0.5)
    assert (hi - lo) / 2 == pytest.approx(1.959964 * np.sqrt(12 / 16), abs=1e-6)


def test_config_validation():
    shares = {(1, 1): Fraction(1, 2), (0, 0): Fraction(1, 2)}
    with pytest.raises(InputError):
        SimulationConfig("cluster", 10, shares)
    with pytest.raises(InputError):
        SimulationConfig("balanced_bernoulli", 10, {(1, 1): Fraction(1, 2)})
    with pytest.raises(InputError):
        SimulationConfig("matched_pairs", 11, {(1, 1): Fraction(1)})
    with pytest.raises(InputError):
        SimulationConfig("balanced_bernoulli", 10, shares, p=Fraction(1, 3))
    with pytest.raises(InputError):
        simulate(SimulationConfig("balanced_bernoulli", 5, shares, reps=2))
    with pytest.raises(InputError):
        presets("table9-9", 10)


def test_presets_true_ate():
    assert presets("bernoulli-even", 50).true_ate() == 0
    assert presets("pairs-even", 50).true_ate() == Fraction(19, 25)
    assert presets("pairs-skewed", 200).true_ate() == Fraction(192, 200)


def test_single_rep_is_deterministic():
    cfg = presets("bernoulli-even", 20, reps=1, seed=7)
    a, b = simulate(cfg), simulate(cfg)
    assert a.as_dict() == b.as_dict() and a.reps == 1


def test_reports_identical_across_parallelism():
    base = dict(n=20, reps=24, seed=3)
    serial = simulate(presets("pairs-even", **base))
    parallel = simulate(presets("pairs-even", parallelism=3, **base))
    assert serial.as_dict() == parallel.as_dict()
    assert serial.per_rep == parallel.per_rep


def test_general_design_runs():
    cfg = SimulationConfig("general_bernoulli", 9, {(1, 0): Fraction(1, 3), (0, 0): Fraction(2, 3)}, reps=4, p=Fraction(1, 3))
    report = simulate(cfg)
    assert report.reps == 4 and 0 <= report.coverage <= 1


def test_wald_undefined_is_tallied():
    # with 2 units, both land in the same arm with probability 1/2
    cfg = presets("bernoulli-even", 2, reps=40, seed=1)
    report = simulate(cfg)
    assert report.wald_undefined > 0
    assert report.wald_coverage <= 1 - report.wald_undefined / report.reps
