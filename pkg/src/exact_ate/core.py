"""Shared domain types, the candidate-ATE grid and exact threshold arithmetic.

Everything here is carried as integers or :class:`fractions.Fraction` so that
acceptance decisions near ``p == alpha`` are never decided by float noise.
"""

from __future__ import annotations

import bisect
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

# Float tails within this band of alpha are re-decided in exact arithmetic.
TIE_BAND = 1e-9


class InputError(ValueError):
    """Raised for malformed observed data or invalid parameters."""


@dataclass(frozen=True)
class ObservedCounts:
    """Observed (outcome, assignment) tallies for a unit-level experiment.

    ``n11`` counts treated units with outcome 1, ``n01`` treated units with
    outcome 0, ``n10`` control units with outcome 1, ``n00`` control units
    with outcome 0.
    """

    n11: int
    n01: int
    n10: int
    n00: int

    def __post_init__(self) -> None:
        for name in ("n11", "n01", "n10", "n00"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise InputError(f"{name} must be a nonnegative integer, got {value!r}")

    @property
    def n(self) -> int:
        return self.n11 + self.n01 + self.n10 + self.n00

    @property
    def n_treated(self) -> int:
        return self.n11 + self.n01

    @property
    def signed_sum(self) -> int:
        """Sum of Y_obs * (2 Z_obs - 1)."""
        return self.n11 - self.n10

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n11, self.n01, self.n10, self.n00)


@dataclass(frozen=True)
class CandidateGrid:
    """The n+1 ATE values compatible with the data, as numerators over ``denominator``."""

    start: int
    denominator: int

    @property
    def numerators(self) -> range:
        return range(self.start, self.start + self.denominator + 1)

    def __len__(self) -> int:
        return self.denominator + 1

    def __contains__(self, numerator: object) -> bool:
        return isinstance(numerator, int) and self.start <= numerator <= self.start + self.denominator

    def value(self, numerator: int) -> Fraction:
        return Fraction(numerator, self.denominator)

    def check(self, numerator: int) -> None:
        if numerator not in self:
            raise InputError(
                f"incompatible candidate: {numerator}/{self.denominator} is not on the grid "
                f"[{self.start}, {self.start + self.denominator}]/{self.denominator}"
            )


@dataclass(frozen=True)
class ScaledThreshold:
    """A nonnegative threshold represented exactly as ``value / scale``."""

    value: int
    scale: int

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise InputError("threshold scale must be positive")

    @property
    def exact(self) -> Fraction:
        return Fraction(self.value, self.scale)


@dataclass
class TestLedger:
    """Counts randomization tests spent during one construction.

    ``tail_evaluations`` counts randomization tests that required a fresh
    distribution (an FFT build); ``pmf_updates`` counts p-values obtained
    from an incrementally updated PMF (general Bernoulli only).
    """

    __test__ = False  # not a pytest class

    tail_evaluations: int = 0
    pmax_evaluations: int = 0
    pmf_updates: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add_tail(self, k: int = 1) -> None:
        with self._lock:
            self.tail_evaluations += k

    def add_pmax(self, k: int = 1) -> None:
        with self._lock:
            self.pmax_evaluations += k

    def add_update(self, k: int = 1) -> None:
        with self._lock:
            self.pmf_updates += k

    def merge(self, other: "TestLedger") -> None:
        with self._lock:
            self.tail_evaluations += other.tail_evaluations
            self.pmax_evaluations += other.pmax_evaluations
            self.pmf_updates += other.pmf_updates

    def as_dict(self) -> dict[str, int]:
        return {
            "tail_evaluations": self.tail_evaluations,
            "pmax_evaluations": self.pmax_evaluations,
            "pmf_updates": self.pmf_updates,
        }


@dataclass(frozen=True)
class ConfidenceResult:
    """Accepted candidate numerators (over ``denominator``) plus the test ledger."""

    accepted: tuple[int, ...]
    denominator: int
    alpha: Fraction
    ledger: TestLedger

    def __post_init__(self) -> None:
        if list(self.accepted) != sorted(set(self.accepted)):
            raise ValueError("accepted numerators must be sorted and unique")

    @property
    def empty(self) -> bool:
        return not self.accepted

    @property
    def interval(self) -> tuple[int, int] | None:
        if not self.accepted:
            return None
        return (self.accepted[0], self.accepted[-1])

    @property
    def interval_values(self) -> tuple[Fraction, Fraction] | None:
        if not self.accepted:
            return None
        return (
            Fraction(self.accepted[0], self.denominator),
            Fraction(self.accepted[-1], self.denominator),
        )

    @property
    def width(self) -> Fraction:
        if not self.accepted:
            return Fraction(0)
        return Fraction(self.accepted[-1] - self.accepted[0], self.denominator)

    def is_contiguous(self) -> bool:
        return not self.accepted or self.accepted[-1] - self.accepted[0] + 1 == len(self.accepted)

    def contains(self, tau: Fraction) -> bool:
        num = tau * self.denominator
        return num.denominator == 1 and int(num) in set(self.accepted)


def parse_fraction(text: str | int | float | Fraction) -> Fraction:
    """Parse ``"1/3"``, ``"0.05"``, a float or a Fraction into an exact Fraction.

    Floats go through their shortest decimal repr, so ``0.05`` becomes 1/20.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise InputError(f"not a number: {text!r}")
    if isinstance(text, float):
        return Fraction(repr(text))
    if isinstance(text, int):
        return Fraction(text)
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"not a number: {text!r}") from exc


def check_alpha(alpha: str | float | Fraction) -> Fraction:
    a = parse_fraction(alpha)
    if not 0 < a < 1:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    return a


def check_probability(p: str | float | Fraction) -> Fraction:
    """Validate a treatment probability; returns the reduced fraction u/q."""
    frac = parse_fraction(p)
    if not 0 < frac < 1:
        raise InputError(f"p must lie strictly between 0 and 1, got {p}")
    return frac


def meets_level(p: float, alpha: Fraction, exact: Callable[[], Fraction]) -> bool:
    """Decide ``p >= alpha``; inside the tie band the exact tail decides."""
    if abs(p - float(alpha)) > TIE_BAND:
        return p > float(alpha)
    return exact() >= alpha


def counts_from_units(records: Iterable[Sequence[int]]) -> ObservedCounts:
    """Tally ``(y_obs, z_obs)`` records into :class:`ObservedCounts`."""
    tally = {(1, 1): 0, (0, 1): 0, (1, 0): 0, (0, 0): 0}
    for i, rec in enumerate(records):
        if len(rec) != 2:
            raise InputError(f"record {i}: expected (y, z), got {rec!r}")
        y, z = int(rec[0]), int(rec[1])
        if (y, z) not in tally or rec[0] not in (0, 1) or rec[1] not in (0, 1):
            raise InputError(f"record {i}: y and z must be 0 or 1, got {rec!r}")
        tally[(y, z)] += 1
    counts = ObservedCounts(tally[(1, 1)], tally[(0, 1)], tally[(1, 0)], tally[(0, 0)])
    if counts.n == 0:
        raise InputError("no units")
    return counts


def candidate_grid(counts: ObservedCounts) -> CandidateGrid:
    """Grid of ATE numerators ``S - n1, ..., S - n1 + n`` over ``n``."""
    if counts.n == 0:
        raise InputError("no units")
    return CandidateGrid(start=counts.signed_sum - counts.n_treated, denominator=counts.n)


def ht_observed(counts: ObservedCounts, p: str | float | Fraction = Fraction(1, 2)) -> Fraction:
    """Horvitz-Thompson statistic ``(1/n)(n11/p - n10/(1-p))`` in exact arithmetic."""
    if counts.n == 0:
        raise InputError("no units")
    p = check_probability(p)
    return (counts.n11 / p - counts.n10 / (1 - p)) / counts.n


def lattice_scale(p: Fraction) -> int:
    """Smallest multiplier ``u (q - u)`` that puts every summand atom on the integers."""
    return p.numerator * (p.denominator - p.numerator)


def scaled_delta(
    counts: ObservedCounts,
    numerator: int,
    p: str | float | Fraction = Fraction(1, 2),
    design: str = "balanced",
) -> ScaledThreshold:
    """Threshold for candidate ``numerator / n`` on the design's working lattice.

    ``design="balanced"`` returns ``(n/2)|T_obs - tau0|`` with scale 2, i.e.
    the integer ``|2(n11 - n10) - n tau0|`` over 2.  ``design="general"``
    returns ``n|T_obs - tau0|`` scaled by ``s = u(q-u)``.
    """
    candidate_grid(counts).check(numerator)
    if design == "balanced":
        if check_probability(p) != Fraction(1, 2):
            raise InputError("balanced design requires p = 1/2")
        return ScaledThreshold(abs(2 * counts.signed_sum - numerator), 2)
    if design == "general":
        p = check_probability(p)
        u, q = p.numerator, p.denominator
        s = lattice_scale(p)
        value = abs(counts.n11 * q * (q - u) - counts.n10 * q * u - s * numerator)
        return ScaledThreshold(value, s)
    raise InputError(f"unknown design {design!r}")


def bisect_confidence_set(
    numerators: Sequence[int],
    t_obs: int,
    accept: Callable[[int], bool],
) -> list[int]:
    """Invert a staircase-shaped acceptance predicate by two binary searches.

    ``numerators`` is the sorted candidate grid and ``t_obs`` the observed
    statistic on the same scale (it may fall outside the grid).  ``accept``
    must be nondecreasing on candidates <= t_obs and nonincreasing on
    candidates >= t_obs; the observed point itself is accepted without a call.
    """
    K = len(numerators)
    memo: dict[int, bool] = {}

    def f(k: int) -> bool:
        if k not in memo:
            memo[k] = True if numerators[k] == t_obs else accept(numerators[k])
        return memo[k]

    def first_true(lo: int, hi: int) -> int | None:
        # virtual sentinels: f(lo - 1) false, f(hi + 1) true
        below, above = lo - 1, hi + 1
        while above - below > 1:
            mid = (below + above) // 2
            if f(mid):
                above = mid
            else:
                below = mid
        return above if above <= hi else None

    def last_true(lo: int, hi: int) -> int | None:
        below, above = lo - 1, hi + 1
        while above - below > 1:
            mid = (below + above) // 2
            if f(mid):
                below = mid
            else:
                above = mid
        return below if below >= lo else None

    if t_obs < numerators[0]:
        k_max = last_true(0, K - 1)
        return [] if k_max is None else list(numerators[: k_max + 1])
    if t_obs > numerators[-1]:
        k_min = first_true(0, K - 1)
        return [] if k_min is None else list(numerators[k_min:])

    k_minus = bisect.bisect_right(numerators, t_obs) - 1
    k_plus = bisect.bisect_left(numerators, t_obs)
    k_min = first_true(0, k_minus)
    k_max = last_true(k_plus, K - 1)
    if k_min is None:
        k_min = k_plus
    if k_max is None:
        k_max = k_minus
    return list(numerators[k_min : k_max + 1])
