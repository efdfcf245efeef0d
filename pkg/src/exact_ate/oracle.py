"""Brute-force reference: every compatible completion, exact rational p-values.

Unit designs enumerate completions by how many units in each observed cell
get a missing outcome of 1, i.e. ``prod(N_yz + 1)`` imputations in total;
each imputation is one counted test.  Matched pairs enumerate every
pair-level count table.  Distinct count vectors share a memoized exact PMF,
so the counting convention does not change the work done.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from typing import Iterator

from .core import (
    ConfidenceResult,
    InputError,
    ObservedCounts,
    ScaledThreshold,
    TestLedger,
    candidate_grid,
    check_alpha,
    check_probability,
    scaled_delta,
)
from .lattice import ExactPMFCache, two_sided_tail
from .pairs import PairCompletionCounts, PairObservedCounts, pair_grid

UNIT_GUARD = 64
PAIR_GUARD = 12
DESIGNS = ("balanced", "general", "pairs")


def unit_completions(counts: ObservedCounts) -> Iterator[tuple[int, int, int, int]]:
    """Count vector ``(v11, v10, v01, v00)`` of every imputation, with repeats.

    ``k11`` treated units with outcome 1 and ``k01`` treated with outcome 0
    get ``Y(0) = 1``; ``k10`` and ``k00`` control units get ``Y(1) = 1``.
    """
    n11, n01, n10, n00 = counts.as_tuple()
    for k11, k01, k10, k00 in product(range(n11 + 1), range(n01 + 1), range(n10 + 1), range(n00 + 1)):
        yield (
            k11 + k10,
            n11 - k11 + k00,
            k01 + n10 - k10,
            n01 - k01 + n00 - k00,
        )


def _compositions(total: int) -> Iterator[tuple[int, int, int]]:
    for a in range(total + 1):
        for b in range(total - a + 1):
            yield (a, b, total - a - b)


def pair_completions(counts: PairObservedCounts) -> Iterator[PairCompletionCounts]:
    """Every pair-level table with the observed row sums."""
    for minus in _compositions(counts.row(-1)):
        for zero in _compositions(counts.row(0)):
            for plus in _compositions(counts.row(1)):
                yield PairCompletionCounts((minus, zero, plus))


class _Oracle:
    def __init__(self, counts, design: str, p: Fraction):
        if design not in DESIGNS:
            raise InputError(f"unknown design {design!r}; expected one of {DESIGNS}")
        self.design = design
        self.counts = counts
        if design == "pairs":
            if not isinstance(counts, PairObservedCounts):
                raise InputError("pairs design needs PairObservedCounts")
            if counts.m > PAIR_GUARD:
                raise InputError(f"oracle limited to m <= {PAIR_GUARD} pairs, got {counts.m}")
            self.grid = pair_grid(counts)
            self.cache = ExactPMFCache("rademacher")
            self.vectors = list(pair_completions(counts))
        else:
            if not isinstance(counts, ObservedCounts):
                raise InputError(f"{design} design needs ObservedCounts")
            if counts.n > UNIT_GUARD:
                raise InputError(f"oracle limited to n <= {UNIT_GUARD} units, got {counts.n}")
            self.grid = candidate_grid(counts)
            if design == "balanced":
                if p != Fraction(1, 2):
                    raise InputError("balanced design requires p = 1/2")
                self.cache = ExactPMFCache("rademacher")
            else:
                self.cache = ExactPMFCache("weighted", p)
            self.vectors = list(unit_completions(counts))
        self.p = p
        self._tails: dict[tuple, Fraction] = {}

    def _tail(self, key: tuple[int, ...], thr: ScaledThreshold) -> Fraction:
        memo = (key, thr.value, thr.scale)
        if memo not in self._tails:
            self._tails[memo] = two_sided_tail(self.cache.get(key), thr)
        return self._tails[memo]

    def pmax(self, t: int) -> tuple[Fraction, int]:
        self.grid.check(t)
        best, used = None, 0
        if self.design == "pairs":
            R = t - self.counts.s_obs
            thr = ScaledThreshold(abs(2 * self.counts.s_obs - t), 2)
            for v in self.vectors:
                if v.imputed_sum() != R:
                    continue
                used += 1
                pv = self._tail((v.m2, v.m1), thr)
                best = pv if best is None or pv > best else best
        else:
            thr = scaled_delta(self.counts, t, self.p, design="balanced" if self.design == "balanced" else "general")
            for v11, v10, v01, _ in self.vectors:
                if v10 - v01 != t:
                    continue
                used += 1
                key = (v11, v10 + v01) if self.design == "balanced" else (v11, v10, v01)
                pv = self._tail(key, thr)
                best = pv if best is None or pv > best else best
        if best is None:
            raise RuntimeError(f"no compatible completion at candidate {t}/{self.grid.denominator}")
        return best, used


def oracle_pmax(
    counts: ObservedCounts | PairObservedCounts,
    tau0: int | Fraction,
    design: str = "balanced",
    p: str | float | Fraction = Fraction(1, 2),
) -> tuple[Fraction, int]:
    """Exact ``p_max`` at ``tau0`` and the number of completions tested."""
    orc = _Oracle(counts, design, check_probability(p))
    if isinstance(tau0, Fraction):
        num = tau0 * orc.grid.denominator
        if num.denominator != 1:
            raise InputError(f"incompatible candidate: {tau0}")
        tau0 = int(num)
    return orc.pmax(tau0)


def oracle_confidence_set(
    counts: ObservedCounts | PairObservedCounts,
    design: str = "balanced",
    p: str | float | Fraction = Fraction(1, 2),
    alpha: str | float | Fraction = Fraction(1, 20),
) -> ConfidenceResult:
    """Accept every candidate whose exact ``p_max`` is at least ``alpha``.

    The ledger's ``tail_evaluations`` is the total number of completions tested.
    """
    alpha = check_alpha(alpha)
    orc = _Oracle(counts, design, check_probability(p))
    ledger = TestLedger()
    accepted = []
    for t in orc.grid.numerators:
        pv, used = orc.pmax(t)
        ledger.add_pmax()
        ledger.add_tail(used)
        if pv >= alpha:
            accepted.append(t)
    return ConfidenceResult(tuple(accepted), orc.grid.denominator, alpha, ledger)
