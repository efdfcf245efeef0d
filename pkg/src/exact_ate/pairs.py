"""Exact confidence sets for the ATE under a matched-pairs design.

Each pair is reduced to its within-pair difference ``W = Y_treated -
Y_control``.  A completion imputes the missing difference ``u`` of every
pair; the randomization law depends on it only through the number of pairs
with ``|W(1) - W(0)| = 2`` (``m2``) and ``= 1`` (``m1``), and the largest
p-value sits at the lexicographically largest attainable ``(m2, m1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .core import (
    CandidateGrid,
    ConfidenceResult,
    InputError,
    ScaledThreshold,
    TestLedger,
    bisect_confidence_set,
    check_alpha,
    meets_level,
)
from .lattice import compute_probability_via_fft, exact_rademacher_tail

BRANCHES = ("m1_zero", "m1_pos")


@dataclass(frozen=True)
class PairObservedCounts:
    """Pairs tallied by observed difference ``w`` and within-pair assignment ``z``.

    Field ``n_<w>_<z>`` counts pairs with ``W_obs = w`` (plus/zero/minus for
    1/0/-1) and ``Z = z``.
    """

    n_plus_1: int
    n_plus_0: int
    n_zero_1: int
    n_zero_0: int
    n_minus_1: int
    n_minus_0: int

    def __post_init__(self) -> None:
        for name, value in zip(self._names(), self.as_tuple()):
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise InputError(f"{name} must be a nonnegative integer, got {value!r}")

    @staticmethod
    def _names() -> tuple[str, ...]:
        return ("n_plus_1", "n_plus_0", "n_zero_1", "n_zero_0", "n_minus_1", "n_minus_0")

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, name) for name in self._names())

    @classmethod
    def from_rows(cls, plus: int, zero: int, minus: int) -> "PairObservedCounts":
        """Counts with every pair filed under ``z = 1``; the inference only uses row sums."""
        return cls(plus, 0, zero, 0, minus, 0)

    def row(self, w: int) -> int:
        """``N_w``: number of pairs with observed difference ``w``."""
        if w == 1:
            return self.n_plus_1 + self.n_plus_0
        if w == 0:
            return self.n_zero_1 + self.n_zero_0
        if w == -1:
            return self.n_minus_1 + self.n_minus_0
        raise InputError(f"w must be -1, 0 or 1, got {w}")

    @property
    def m(self) -> int:
        return sum(self.as_tuple())

    @property
    def n(self) -> int:
        return 2 * self.m

    @property
    def s_obs(self) -> int:
        return self.row(1) - self.row(-1)


@dataclass(frozen=True)
class PairCompletionCounts:
    """``v[(w, u)]``: pairs with observed difference ``w`` imputed with missing difference ``u``."""

    v: tuple[tuple[int, int, int], tuple[int, int, int], tuple[int, int, int]]

    def get(self, w: int, u: int) -> int:
        return self.v[w + 1][u + 1]

    @property
    def m2(self) -> int:
        return self.get(1, -1) + self.get(-1, 1)

    @property
    def m1(self) -> int:
        return self.get(1, 0) + self.get(0, 1) + self.get(0, -1) + self.get(-1, 0)

    def imputed_sum(self) -> int:
        return sum(u * self.get(w, u) for w in (-1, 0, 1) for u in (-1, 0, 1))

    def row(self, w: int) -> int:
        return sum(self.v[w + 1])


@dataclass(frozen=True)
class M2M1:
    m2: int
    m1: int
    witness: PairCompletionCounts | None = None


def pair_reduce(records: Iterable[Sequence[int]]) -> PairObservedCounts:
    """Tally ``(pair_id, y_obs, z_obs)`` unit records into pair counts.

    Units are listed in input order; within a pair, ``z = 1`` means the
    second-listed unit was treated.
    """
    units: dict[object, list[tuple[int, int]]] = {}
    for i, rec in enumerate(records):
        if len(rec) != 3:
            raise InputError(f"record {i}: expected (pair_id, y, z), got {rec!r}")
        pid, y, z = rec
        if y not in (0, 1) or z not in (0, 1):
            raise InputError(f"record {i}: y and z must be 0 or 1, got {rec!r}")
        units.setdefault(pid, []).append((int(y), int(z)))
    if not units:
        raise InputError("no pairs")
    tally = {(w, z): 0 for w in (1, 0, -1) for z in (1, 0)}
    for pid, members in units.items():
        if len(members) != 2 or members[0][1] == members[1][1]:
            raise InputError(f"malformed pair {pid!r}: need two units in opposite arms")
        (y_first, z_first), (y_second, z_second) = members
        if z_second == 1:
            w, z = y_second - y_first, 1
        else:
            w, z = y_first - y_second, 0
        tally[(w, z)] += 1
    return PairObservedCounts(*(tally[key] for key in sorted(tally, key=lambda k: (-k[0], -k[1]))))


def pair_grid(counts: PairObservedCounts) -> CandidateGrid:
    """Numerators ``S_obs - m, ..., S_obs + m`` over ``n = 2m``."""
    if counts.m == 0:
        raise InputError("no pairs")
    return CandidateGrid(start=counts.s_obs - counts.m, denominator=counts.n)


def _max_m1(A: int, B: int, C: int, R: int, i: int, j: int) -> tuple[int, tuple[int, int, int, int]] | None:
    """Largest ``m1`` with ``v[1,-1] = i`` and ``v[-1,1] = j``, plus ``(x, y, c, d)``.

    ``x = v[1,1]``, ``y = v[-1,-1]``, ``c = v[0,1]``, ``d = v[0,-1]``.  With
    ``e = x - y`` fixed the best choice is ``x + y = |e|`` and ``c + d`` as large
    as parity allows, so only ``e`` near zero needs checking.
    """
    r = R + i - j
    lo, hi = max(-(B - j), r - C), min(A - i, r + C)
    if lo > hi:
        return None
    e0 = min(max(0, lo), hi)
    best = None
    for e in (e0 - 1, e0, e0 + 1):
        if not lo <= e <= hi:
            continue
        f = r - e
        cd = C - ((C - f) % 2)
        m1 = A + B - i - j - abs(e) + cd
        if best is None or m1 > best[0]:
            x, y = (e, 0) if e >= 0 else (0, -e)
            c, d = (cd + f) // 2, (cd - f) // 2
            best = (m1, (x, y, c, d))
    return best


def _completion(A: int, B: int, C: int, i: int, j: int, x: int, y: int, c: int, d: int) -> PairCompletionCounts:
    return PairCompletionCounts(
        (
            (y, B - j - y, j),  # w = -1: u = -1, 0, 1
            (d, C - c - d, c),  # w = 0
            (i, A - i - x, x),  # w = 1
        )
    )


def lex_max_m2m1(counts: PairObservedCounts, tau0: int | Fraction, branch: str) -> M2M1 | None:
    """Lexicographically largest ``(m2, m1)`` over completions in the given branch.

    ``branch="m1_zero"`` restricts to ``m1 = 0``; ``"m1_pos"`` to ``m1 >= 1``.
    Returns None when the branch has no compatible completion.
    """
    t = _as_numerator(counts, tau0)
    A, B, C = counts.row(1), counts.row(-1), counts.row(0)
    R = t - counts.s_obs
    if branch == "m1_zero":
        # every pair keeps u = w except the swapped ones; needs i - j = (A - B - R) / 2
        if (A - B - R) % 2:
            return None
        D = (A - B - R) // 2
        j_lo, j_hi = max(0, -D), min(B, A - D)
        if j_lo > j_hi:
            return None
        j = j_hi
        i = j + D
        return M2M1(i + j, 0, _completion(A, B, C, i, j, A - i, B - j, 0, 0))
    if branch != "m1_pos":
        raise InputError(f"unknown branch {branch!r}; expected one of {BRANCHES}")
    for k in range(A + B, -1, -1):
        i_lo = max(0, k - B, -((B + C + R - 2 * k) // 3))
        i_hi = min(A, k, (k + A + C - R) // 3)
        # every i in [i_lo, i_hi] admits a completion; at most one of them forces
        # m1 = 0, so a k is skipped only when its interval is a single point
        best = None
        for i in range(i_lo, i_hi + 1):
            res = _max_m1(A, B, C, R, i, k - i)
            if res is not None and (best is None or res[0] > best[0]):
                best = (res[0], i, res[1])
        if best is None or best[0] < 1:
            continue
        m1, i, (x, y, c, d) = best
        return M2M1(k, m1, _completion(A, B, C, i, k - i, x, y, c, d))
    return None


def _as_numerator(counts: PairObservedCounts, tau0: int | Fraction) -> int:
    grid = pair_grid(counts)
    if isinstance(tau0, Fraction):
        num = tau0 * counts.n
        if num.denominator != 1:
            raise InputError(f"incompatible candidate: {tau0} is not a multiple of 1/{counts.n}")
        tau0 = int(num)
    grid.check(tau0)
    return tau0


def _threshold(counts: PairObservedCounts, t: int) -> ScaledThreshold:
    # Delta = |2 S_obs - t| on the W scale, i.e. Delta / 2 on the S_{a,b} scale
    return ScaledThreshold(abs(2 * counts.s_obs - t), 2)


def _pmax_with_pairs(
    counts: PairObservedCounts, t: int, ledger: TestLedger
) -> tuple[float, ScaledThreshold, list[M2M1]]:
    thr = _threshold(counts, t)
    ledger.add_pmax()
    if thr.value == 0:
        return 1.0, thr, []
    found = [lex_max_m2m1(counts, t, b) for b in BRANCHES]
    found = [f for f in found if f is not None]
    if not found:
        raise RuntimeError(f"both branches infeasible at candidate {t}/{counts.n}")
    p = max(compute_probability_via_fft(f.m2, f.m1, thr, ledger) for f in found)
    return p, thr, found


def compute_pmax_pairs(
    counts: PairObservedCounts, tau0: int | Fraction, ledger: TestLedger | None = None
) -> float:
    """Largest p-value over pair completions compatible with candidate ``tau0``."""
    t = _as_numerator(counts, tau0)
    p, _, _ = _pmax_with_pairs(counts, t, ledger if ledger is not None else TestLedger())
    return p


def exact_pmax_pairs(counts: PairObservedCounts, t: int) -> Fraction:
    t = _as_numerator(counts, t)
    thr = _threshold(counts, t)
    if thr.value == 0:
        return Fraction(1)
    found = [f for f in (lex_max_m2m1(counts, t, b) for b in BRANCHES) if f is not None]
    return max(exact_rademacher_tail(f.m2, f.m1, thr) for f in found)


def accepts_pairs(counts: PairObservedCounts, t: int, alpha: Fraction, ledger: TestLedger) -> bool:
    p, thr, found = _pmax_with_pairs(counts, t, ledger)
    if not found:
        return True
    return meets_level(p, alpha, lambda: max(exact_rademacher_tail(f.m2, f.m1, thr) for f in found))


def confidence_set_pairs(counts: PairObservedCounts, alpha: str | float | Fraction) -> ConfidenceResult:
    """Exact level-``alpha`` confidence set for the ATE by bisection on the pair grid."""
    alpha = check_alpha(alpha)
    grid = pair_grid(counts)
    ledger = TestLedger()
    accepted = bisect_confidence_set(
        grid.numerators, 2 * counts.s_obs, lambda t: accepts_pairs(counts, t, alpha, ledger)
    )
    return ConfidenceResult(tuple(accepted), grid.denominator, alpha, ledger)


def sweep_confidence_set_pairs(counts: PairObservedCounts, alpha: str | float | Fraction) -> ConfidenceResult:
    """Test every grid point; used to cross-check the bisection."""
    alpha = check_alpha(alpha)
    grid = pair_grid(counts)
    ledger = TestLedger()
    accepted = [t for t in grid.numerators if accepts_pairs(counts, t, alpha, ledger)]
    return ConfidenceResult(tuple(accepted), grid.denominator, alpha, ledger)
