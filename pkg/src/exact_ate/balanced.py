"""Exact confidence sets for the ATE under the balanced Bernoulli(1/2) design.

For each candidate the largest randomization p-value over compatible
completions is reached at a closed-form count vector, so one candidate costs
at most two tail evaluations, and the staircase shape of ``p_max`` lets the
grid be searched by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import (
    ConfidenceResult,
    InputError,
    ObservedCounts,
    ScaledThreshold,
    TestLedger,
    bisect_confidence_set,
    candidate_grid,
    check_alpha,
    meets_level,
)
from .lattice import compute_probability_via_fft, exact_rademacher_tail


@dataclass(frozen=True)
class RegionParams:
    """Bounds on ``2a + b``, on ``b``, and ``N1star = n11 + n10`` for one candidate."""

    L: int
    U: int
    U_b: int
    N1star: int


@dataclass(frozen=True)
class ABPair:
    """``a = v11`` Rademacher and ``b = v10 + v01`` half-Rademacher summands."""

    a: int
    b: int


def region_params(counts: ObservedCounts, t: int) -> RegionParams:
    """Constraint constants for candidate numerator ``t = n * tau0``."""
    n11, n01, n10, n00 = counts.as_tuple()
    n = counts.n
    return RegionParams(
        L=max(2 * n11 - t, 2 * n10 + t),
        U=min(2 * n - t - 2 * n01, 2 * n + t - 2 * n00),
        U_b=min(2 * n11 + 2 * n00 - t, 2 * n01 + 2 * n10 + t),
        N1star=n11 + n10,
    )


def is_feasible(counts: ObservedCounts, t: int, pair: ABPair, lower_b: int = 0) -> bool:
    """Whether ``(a, b)`` comes from some completion compatible with the data and ``t``."""
    r = region_params(counts, t)
    a, b = pair.a, pair.b
    return (
        r.L <= 2 * a + b <= r.U
        and r.N1star <= a + b <= counts.n
        and 0 <= a <= r.N1star
        and max(abs(t), lower_b) <= b <= r.U_b
        and (b - t) % 2 == 0
    )


def compute_ab(counts: ObservedCounts, t: int, lower_b: int) -> ABPair | None:
    """Lexicographically largest feasible ``(a, b)`` with ``b >= lower_b``, or None."""
    r = region_params(counts, t)
    n = counts.n
    a = min((r.U - lower_b) // 2, n - lower_b, r.N1star, r.U - r.N1star)
    b = min(r.U - 2 * a, n - a, r.U_b)
    if (b - t) % 2:
        b -= 1
    if a + b < r.N1star:
        a, b = a - 1, b + 2
    pair = ABPair(a, b)
    return pair if is_feasible(counts, t, pair, lower_b) else None


def candidate_pairs(counts: ObservedCounts, t: int) -> list[ABPair]:
    """The one or two ``(a, b)`` pairs whose tails decide ``p_max`` at ``t``."""
    if t != 0:
        found = [compute_ab(counts, t, abs(t))]
    else:
        r = region_params(counts, 0)
        a = min(r.U // 2, counts.n, r.N1star, r.U - r.N1star)
        found = []
        # a >= N1star together with a <= N1star pins a; kept as the guard reads
        if a >= r.N1star and 2 * a >= r.L:
            found.append(ABPair(a, 0))
        found.append(compute_ab(counts, 0, 2))
    pairs = [pr for pr in found if pr is not None]
    if not pairs:
        raise RuntimeError(f"no feasible completion for candidate {t}/{counts.n}")
    return pairs


def _threshold(counts: ObservedCounts, t: int) -> ScaledThreshold:
    return ScaledThreshold(abs(2 * counts.signed_sum - t), 2)


def _pmax_with_pairs(
    counts: ObservedCounts, t: int, ledger: TestLedger
) -> tuple[float, ScaledThreshold, list[ABPair]]:
    candidate_grid(counts).check(t)
    thr = _threshold(counts, t)
    ledger.add_pmax()
    if thr.value == 0:
        return 1.0, thr, []
    pairs = candidate_pairs(counts, t)
    p = max(compute_probability_via_fft(pr.a, pr.b, thr, ledger) for pr in pairs)
    return p, thr, pairs


def compute_pmax(counts: ObservedCounts, tau0: int | Fraction, ledger: TestLedger | None = None) -> float:
    """Largest p-value over completions compatible with the data at candidate ``tau0``.

    ``tau0`` is either a grid numerator (int, over ``n``) or an exact Fraction.
    """
    t = _as_numerator(counts, tau0)
    p, _, _ = _pmax_with_pairs(counts, t, ledger if ledger is not None else TestLedger())
    return p


def exact_pmax(counts: ObservedCounts, t: int) -> Fraction:
    """``p_max`` at numerator ``t`` as an exact rational (no ledger)."""
    thr = _threshold(counts, t)
    if thr.value == 0:
        return Fraction(1)
    return max(exact_rademacher_tail(pr.a, pr.b, thr) for pr in candidate_pairs(counts, t))


def _as_numerator(counts: ObservedCounts, tau0: int | Fraction) -> int:
    if isinstance(tau0, Fraction):
        num = tau0 * counts.n
        if num.denominator != 1:
            raise InputError(f"incompatible candidate: {tau0} is not a multiple of 1/{counts.n}")
        return int(num)
    return tau0


def accepts(counts: ObservedCounts, t: int, alpha: Fraction, ledger: TestLedger) -> bool:
    """``p_max(t) >= alpha`` with ties settled in exact arithmetic."""
    p, thr, pairs = _pmax_with_pairs(counts, t, ledger)
    if not pairs:
        return True
    return meets_level(p, alpha, lambda: max(exact_rademacher_tail(pr.a, pr.b, thr) for pr in pairs))


def confidence_set(counts: ObservedCounts, alpha: str | float | Fraction) -> ConfidenceResult:
    """Exact level-``alpha`` confidence set for the ATE, found by bisection on the grid."""
    alpha = check_alpha(alpha)
    grid = candidate_grid(counts)
    ledger = TestLedger()
    t_obs = 2 * counts.signed_sum
    accepted = bisect_confidence_set(
        grid.numerators, t_obs, lambda t: accepts(counts, t, alpha, ledger)
    )
    return ConfidenceResult(tuple(accepted), grid.denominator, alpha, ledger)


def sweep_confidence_set(counts: ObservedCounts, alpha: str | float | Fraction) -> ConfidenceResult:
    """Same set as :func:`confidence_set` but testing every grid point (no monotonicity used)."""
    alpha = check_alpha(alpha)
    grid = candidate_grid(counts)
    ledger = TestLedger()
    accepted = [t for t in grid.numerators if accepts(counts, t, alpha, ledger)]
    return ConfidenceResult(tuple(accepted), grid.denominator, alpha, ledger)
