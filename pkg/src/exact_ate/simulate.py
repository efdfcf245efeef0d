"""Monte Carlo coverage study: exact sets versus Wald intervals.

A fixed finite population is re-randomized ``reps`` times.  Replicate ``r``
draws from its own Philox stream keyed by ``(seed, r)``, so results do not
depend on how replicates are split across workers.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .balanced import confidence_set
from .core import ConfidenceResult, InputError, ObservedCounts, check_alpha, check_probability
from .general import confidence_set_general
from .pairs import PairObservedCounts, confidence_set_pairs

DESIGNS = ("balanced_bernoulli", "matched_pairs", "general_bernoulli")
WALD_VARIANTS = ("neyman", "ht")


@dataclass(frozen=True)
class SimulationConfig:
    """One simulation cell.

    ``setting`` maps a potential-outcome type to its population share: unit
    types ``(Y(1), Y(0))`` for Bernoulli designs, pair types ``(W(1), W(0))``
    for matched pairs.
    """

    design: str
    n: int
    setting: Mapping[tuple[int, int], Fraction]
    alpha: Fraction = Fraction(1, 20)
    reps: int = 1000
    seed: int = 0
    p: Fraction = Fraction(1, 2)
    parallelism: int = 1
    wald: str = "neyman"

    def __post_init__(self) -> None:
        if self.wald not in WALD_VARIANTS:
            raise InputError(f"unknown Wald variant {self.wald!r}; expected one of {WALD_VARIANTS}")
        if self.design not in DESIGNS:
            raise InputError(f"unknown design {self.design!r}; expected one of {DESIGNS}")
        if self.reps < 1:
            raise InputError("reps must be at least 1")
        if self.n < 1:
            raise InputError("n must be positive")
        if self.design == "matched_pairs" and self.n % 2:
            raise InputError("matched pairs need an even number of units")
        if self.design == "balanced_bernoulli" and check_probability(self.p) != Fraction(1, 2):
            raise InputError("balanced design requires p = 1/2")
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        object.__setattr__(self, "p", check_probability(self.p))
        shares = {k: Fraction(v) for k, v in self.setting.items()}
        allowed = (-1, 0, 1) if self.design == "matched_pairs" else (0, 1)
        for key in shares:
            if len(key) != 2 or key[0] not in allowed or key[1] not in allowed:
                raise InputError(f"invalid potential-outcome type {key!r}")
        if sum(shares.values()) != 1 or min(shares.values()) < 0:
            raise InputError("setting proportions must be nonnegative and sum to 1")
        object.__setattr__(self, "setting", shares)

    @property
    def units(self) -> int:
        """Number of randomized units: pairs for matched pairs, individuals otherwise."""
        return self.n // 2 if self.design == "matched_pairs" else self.n

    def type_counts(self) -> dict[tuple[int, int], int]:
        out = {}
        for key, share in self.setting.items():
            c = share * self.units
            if c.denominator != 1:
                raise InputError(
                    f"setting share {share} of type {key} gives {c} units out of {self.units}; "
                    "choose n so every type count is an integer"
                )
            out[key] = int(c)
        return out

    def true_ate(self) -> Fraction:
        # unit types contribute Y(1) - Y(0); pair types contribute W(1) + W(0)
        sign = 1 if self.design == "matched_pairs" else -1
        total = sum(c * (a + sign * b) for (a, b), c in self.type_counts().items())
        return Fraction(total, self.n)


@dataclass
class SimulationReport:
    coverage: float
    median_width: float
    mean_tests: float
    wald_coverage: float
    wald_median_width: float
    wald_undefined: int = 0
    reps: int = 0
    true_ate: float = 0.0
    max_width: float = 0.0
    empty_sets: int = 0
    per_rep: list[tuple[bool, float | None, int, bool, float | None]] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict[str, float | int]:
        return {
            "reps": self.reps,
            "true_ate": self.true_ate,
            "coverage": self.coverage,
            "median_width": self.median_width,
            "max_width": self.max_width,
            "empty_sets": self.empty_sets,
            "mean_tests": self.mean_tests,
            "wald_coverage": self.wald_coverage,
            "wald_median_width": self.wald_median_width,
            "wald_undefined": self.wald_undefined,
        }


def presets(
    name: str, n: int, reps: int = 1000, seed: int = 0, parallelism: int = 1, wald: str = "neyman"
) -> SimulationConfig:
    """Standard coverage-study populations for the balanced-Bernoulli and matched-pairs designs.

    ``bernoulli-even``: half (1,1), half (0,0); ``bernoulli-sparse``: 8% (1,1), 92% (0,0);
    ``pairs-even``: pairs half (1,1), half (1,0), an odd pair going to (1,1);
    ``pairs-skewed``: pairs 92% (1,1), 8% (1,0).
    """
    common = dict(reps=reps, seed=seed, parallelism=parallelism, wald=wald)
    if name == "bernoulli-even":
        shares = {(1, 1): Fraction(1, 2), (0, 0): Fraction(1, 2)}
        return SimulationConfig("balanced_bernoulli", n, shares, **common)
    if name == "bernoulli-sparse":
        shares = {(1, 1): Fraction(2, 25), (0, 0): Fraction(23, 25)}
        return SimulationConfig("balanced_bernoulli", n, shares, **common)
    if name == "pairs-even":
        m = n // 2
        ones = (m + 1) // 2
        shares = {(1, 1): Fraction(ones, m), (1, 0): Fraction(m - ones, m)}
        return SimulationConfig("matched_pairs", n, shares, **common)
    if name == "pairs-skewed":
        shares = {(1, 1): Fraction(23, 25), (1, 0): Fraction(2, 25)}
        return SimulationConfig("matched_pairs", n, shares, **common)
    raise InputError(f"unknown preset {name!r}; expected bernoulli-even, bernoulli-sparse, pairs-even or pairs-skewed")


def wald_ci(
    y: np.ndarray,
    z: np.ndarray,
    alpha: Fraction,
    design: str = "bernoulli",
    variant: str = "neyman",
    p: Fraction = Fraction(1, 2),
) -> tuple[float, float] | None:
    """Normal-approximation interval for the ATE, or None when undefined.

    Bernoulli designs, ``variant="neyman"``: difference in means with
    variance ``p1(1-p1)/n1 + p0(1-p0)/n0``, undefined when an arm is empty.
    ``variant="ht"``: Horvitz-Thompson estimate with the conservative
    variance ``(sum Z Y^2/p^2 + sum (1-Z) Y^2/(1-p)^2) / n^2``.  Matched
    pairs: ``y`` holds the observed within-pair differences and the variance
    is their sample variance over ``m``.
    """
    zq = statistics.NormalDist().inv_cdf(1 - float(alpha) / 2)
    if design != "matched_pairs" and variant == "ht":
        n, pf = len(y), float(p)
        treated, control = y[z == 1], y[z == 0]
        est = (treated.sum() / pf - control.sum() / (1 - pf)) / n
        var = (np.sum(treated**2) / pf**2 + np.sum(control**2) / (1 - pf) ** 2) / n**2
        se = math.sqrt(float(var))
        return (float(est) - zq * se, float(est) + zq * se)
    if design == "matched_pairs":
        m = len(y)
        if m < 2:
            return None
        est = float(np.mean(y))
        se = math.sqrt(float(np.var(y, ddof=1)) / m)
        return (est - zq * se, est + zq * se)
    n1, n0 = int(z.sum()), int(len(z) - z.sum())
    if n1 == 0 or n0 == 0:
        return None
    p1, p0 = float(y[z == 1].mean()), float(y[z == 0].mean())
    est = p1 - p0
    se = math.sqrt(p1 * (1 - p1) / n1 + p0 * (1 - p0) / n0)
    return (est - zq * se, est + zq * se)


def _population(config: SimulationConfig) -> tuple[np.ndarray, np.ndarray]:
    first, second = [], []
    for (a, b), c in sorted(config.type_counts().items()):
        first += [a] * c
        second += [b] * c
    return np.array(first), np.array(second)


def _rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(rep,))))


def _one_rep(config: SimulationConfig, rep: int, pop: tuple[np.ndarray, np.ndarray]) -> tuple[bool, float | None, int, bool, float | None]:
    rng = _rng(config.seed, rep)
    tau = config.true_ate()
    when_treated, when_control = pop
    if config.design == "matched_pairs":
        z = (rng.random(len(when_treated)) < 0.5).astype(int)
        w = np.where(z == 1, when_treated, when_control)
        rows = {(wv, zv): int(np.sum((w == wv) & (z == zv))) for wv in (1, 0, -1) for zv in (1, 0)}
        counts = PairObservedCounts(*(rows[k] for k in sorted(rows, key=lambda k: (-k[0], -k[1]))))
        result: ConfidenceResult = confidence_set_pairs(counts, config.alpha)
        wald = wald_ci(w, z, config.alpha, design="matched_pairs")
    else:
        z = (rng.random(len(when_treated)) < float(config.p)).astype(int)
        y = np.where(z == 1, when_treated, when_control)
        counts = ObservedCounts(
            int(np.sum((y == 1) & (z == 1))),
            int(np.sum((y == 0) & (z == 1))),
            int(np.sum((y == 1) & (z == 0))),
            int(np.sum((y == 0) & (z == 0))),
        )
        if config.design == "balanced_bernoulli":
            result = confidence_set(counts, config.alpha)
        else:
            result = confidence_set_general(counts, config.p, config.alpha)
        wald = wald_ci(y, z, config.alpha, variant=config.wald, p=config.p)
    covered = result.contains(tau)
    width = None if result.empty else float(result.width)
    wald_covered = wald is not None and wald[0] <= float(tau) <= wald[1]
    wald_width = None if wald is None else wald[1] - wald[0]
    return covered, width, result.ledger.tail_evaluations, wald_covered, wald_width


def _run_chunk(args: tuple[SimulationConfig, int, int]) -> list[tuple[bool, float | None, int, bool, float | None]]:
    config, start, stop = args
    pop = _population(config)
    return [_one_rep(config, r, pop) for r in range(start, stop)]


def simulate(config: SimulationConfig) -> SimulationReport:
    """Run all replicates and aggregate coverage, widths and test counts."""
    config.type_counts()  # fail fast on a non-integral setting
    jobs = max(1, config.parallelism)
    if jobs == 1:
        rows = _run_chunk((config, 0, config.reps))
    else:
        size = math.ceil(config.reps / (4 * jobs))
        chunks = [(config, s, min(s + size, config.reps)) for s in range(0, config.reps, size)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = [row for part in pool.map(_run_chunk, chunks) for row in part]
    widths = [w for _, w, _, _, _ in rows if w is not None]
    wald_widths = [w for _, _, _, _, w in rows if w is not None]
    reps = len(rows)
    return SimulationReport(
        coverage=sum(r[0] for r in rows) / reps,
        median_width=float(np.median(widths)) if widths else float("nan"),
        mean_tests=sum(r[2] for r in rows) / reps,
        wald_coverage=sum(r[3] for r in rows) / reps,
        wald_median_width=float(np.median(wald_widths)) if wald_widths else float("nan"),
        wald_undefined=sum(r[4] is None for r in rows),
        reps=reps,
        true_ate=float(config.true_ate()),
        max_width=max(widths, default=0.0),
        empty_sets=reps - len(widths),
        per_rep=rows,
    )
