"""Exact confidence sets under a Bernoulli(p) design with rational ``p = u/q``.

Without the staircase shape of the balanced case every candidate and every
compatible count vector is visited.  For a fixed candidate and ``v11`` the
compatible ``v10`` form a run along which ``v10`` and ``v01`` grow together,
so each PMF after the first in a run is one positive four-atom convolution
away from its predecessor.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .core import (
    TIE_BAND,
    ConfidenceResult,
    InputError,
    ObservedCounts,
    TestLedger,
    candidate_grid,
    check_alpha,
    check_probability,
    scaled_delta,
)
from .lattice import (
    WeightedSumSpec,
    pmf_direct_convolution,
    pmf_run_step,
    pmf_weighted,
    two_sided_tail,
)

REANCHOR_EVERY = 64


@dataclass(frozen=True)
class CountVector:
    """Potential-outcome type counts: ``v_yz`` units with ``(Y(1), Y(0)) = (y, z)``."""

    v11: int
    v10: int
    v01: int
    v00: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.v11, self.v10, self.v01, self.v00)


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def v10_range(counts: ObservedCounts, t: int, v11: int) -> range:
    """Compatible ``v10`` values for candidate numerator ``t`` and a given ``v11``."""
    n11, n01, n10, n00 = counts.as_tuple()
    n = counts.n
    x = v11
    lo = max(n11 - x, n10 + t - x, 0, t, _ceil_div(n11 + n10 - x + t, 2))
    hi = min(n - n01 - x, n + t - n00 - x, n11 + n00, n01 + n10 + t, (n - x + t) // 2)
    return range(lo, hi + 1)


def feasible_v_iter(counts: ObservedCounts, tau0: int | Fraction) -> Iterator[CountVector]:
    """Compatible count vectors, ``v11`` ascending and ``v10`` ascending within each run."""
    t = _as_numerator(counts, tau0)
    n = counts.n
    for v11 in range(counts.n11 + counts.n10 + 1):
        for v10 in v10_range(counts, t, v11):
            v01 = v10 - t
            yield CountVector(v11, v10, v01, n - v11 - v10 - v01)


def _as_numerator(counts: ObservedCounts, tau0: int | Fraction) -> int:
    grid = candidate_grid(counts)
    if isinstance(tau0, Fraction):
        num = tau0 * counts.n
        if num.denominator != 1:
            raise InputError(f"incompatible candidate: {tau0} is not a multiple of 1/{counts.n}")
        tau0 = int(num)
    grid.check(tau0)
    return tau0


def candidate_pvalues(
    counts: ObservedCounts, t: int, p: Fraction, ledger: TestLedger
) -> list[tuple[CountVector, float]]:
    """Float p-value of every compatible vector at numerator ``t``, in enumeration order."""
    thr = scaled_delta(counts, t, p, design="general")
    n = counts.n
    out = []
    for v11 in range(counts.n11 + counts.n10 + 1):
        run = v10_range(counts, t, v11)
        pmf = None
        for step, v10 in enumerate(run):
            v01 = v10 - t
            vec = CountVector(v11, v10, v01, n - v11 - v10 - v01)
            if step % REANCHOR_EVERY == 0:
                pmf = pmf_weighted(WeightedSumSpec(v11, v10, v01, p))
                if step == 0:
                    ledger.add_tail()
                else:
                    ledger.add_update()
            else:
                pmf = pmf_run_step(pmf, p)
                ledger.add_update()
            out.append((vec, two_sided_tail(pmf, thr)))
    return out


def exact_pvalue(counts: ObservedCounts, t: int, p: Fraction, vec: CountVector) -> Fraction:
    thr = scaled_delta(counts, t, p, design="general")
    pmf = pmf_direct_convolution(WeightedSumSpec(vec.v11, vec.v10, vec.v01, p), exact=True)
    return two_sided_tail(pmf, thr)


def _decide(counts: ObservedCounts, t: int, p: Fraction, alpha: Fraction) -> tuple[bool, TestLedger]:
    ledger = TestLedger()
    ledger.add_pmax()
    pvals = candidate_pvalues(counts, t, p, ledger)
    a = float(alpha)
    best = max(pv for _, pv in pvals)
    if best > a + TIE_BAND:
        return True, ledger
    if best < a - TIE_BAND:
        return False, ledger
    near = [vec for vec, pv in pvals if abs(pv - a) <= TIE_BAND]
    return any(exact_pvalue(counts, t, p, vec) >= alpha for vec in near), ledger


def _decide_task(args: tuple) -> tuple[int, bool, dict[str, int]]:
    counts, t, p, alpha = args
    ok, ledger = _decide(counts, t, p, alpha)
    return t, ok, ledger.as_dict()


def confidence_set_general(
    counts: ObservedCounts,
    p: str | float | Fraction,
    alpha: str | float | Fraction,
    jobs: int = 1,
) -> ConfidenceResult:
    """Exact level-``alpha`` confidence set under Bernoulli(p), visiting every candidate.

    ``jobs > 1`` spreads candidates over worker processes; the result and the
    merged ledger do not depend on the worker count.
    """
    alpha = check_alpha(alpha)
    p = check_probability(p)
    grid = candidate_grid(counts)
    tasks = [(counts, t, p, alpha) for t in grid.numerators]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_decide_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_decide_task(task) for task in tasks]
    ledger = TestLedger()
    accepted = []
    for t, ok, counts_used in results:
        ledger.add_tail(counts_used["tail_evaluations"])
        ledger.add_pmax(counts_used["pmax_evaluations"])
        ledger.add_update(counts_used["pmf_updates"])
        if ok:
            accepted.append(t)
    return ConfidenceResult(tuple(accepted), grid.denominator, alpha, ledger)
