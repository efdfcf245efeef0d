"""Exact lattice PMFs of centered randomization statistics.

Two families are covered:

* ``S_{a,b}``: ``a`` Rademacher (+-1) plus ``b`` half-Rademacher (+-1/2)
  summands, stored on the half-integer lattice (index ``r`` is value ``r/2``).
* ``S_v``: the general-Bernoulli sum of ``v11`` eta, ``v10`` epsilon and
  ``v01`` delta summands, stored on the lattice of spacing ``1/s`` with
  ``s = u(q - u)`` for ``p = u/q``.

Float PMFs come from characteristic-function FFTs or from sequential
convolution; an exact path with integer masses over a common denominator
backs the brute-force oracle and tie resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import InputError, ScaledThreshold, TestLedger, check_probability, lattice_scale

DIRECT_GUARD = 4096
_CLAMP_RENORM = 1e-13


@dataclass(frozen=True)
class LatticePMF:
    """Dense PMF over consecutive lattice indices.

    Entry ``i`` of ``mass`` is the probability of the value
    ``(min_index + i) * spacing``.  When ``denominator`` is set the masses
    are exact integers (object dtype) and probabilities are
    ``mass / denominator``.
    """

    spacing: Fraction
    min_index: int
    mass: np.ndarray
    denominator: int | None = None

    @property
    def max_index(self) -> int:
        return self.min_index + len(self.mass) - 1

    @property
    def exact(self) -> bool:
        return self.denominator is not None

    def indices(self) -> np.ndarray:
        return np.arange(self.min_index, self.max_index + 1)

    def probabilities(self) -> np.ndarray:
        if self.denominator is None:
            return self.mass
        return np.array([float(Fraction(int(c), self.denominator)) for c in self.mass])

    def at(self, index: int) -> float | Fraction:
        if not self.min_index <= index <= self.max_index:
            return Fraction(0) if self.exact else 0.0
        m = self.mass[index - self.min_index]
        return Fraction(int(m), self.denominator) if self.exact else float(m)

    def total(self) -> float | Fraction:
        if self.exact:
            return Fraction(int(sum(int(c) for c in self.mass)), self.denominator)
        return float(self.mass.sum())

    def mean(self) -> float:
        return float(np.dot(self.probabilities(), self.indices()) * self.spacing)


@dataclass(frozen=True)
class RademacherMixSpec:
    a: int
    b: int

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0:
            raise InputError("a and b must be nonnegative")


@dataclass(frozen=True)
class WeightedSumSpec:
    """Counts of eta, epsilon and delta summands for treatment probability ``p``."""

    v11: int
    v10: int
    v01: int
    p: Fraction

    def __post_init__(self) -> None:
        if min(self.v11, self.v10, self.v01) < 0:
            raise InputError("summand counts must be nonnegative")
        object.__setattr__(self, "p", check_probability(self.p))

    @property
    def scale(self) -> int:
        return lattice_scale(self.p)

    def summand_types(self) -> list[tuple[int, tuple[int, int], tuple[int, int]]]:
        """``(count, (atom_if_treated, atom_if_control), (w_treated, w_control))``.

        Atoms are scaled by ``s``; weights are over the common denominator ``q``.
        """
        u, q = self.p.numerator, self.p.denominator
        w = (u, q - u)
        return [
            (self.v11, (q * (q - u), -q * u), w),
            (self.v10, ((q - u) * (q - u), -u * (q - u)), w),
            (self.v01, (u * (q - u), -u * u), w),
        ]


def _clean(mass: np.ndarray) -> np.ndarray:
    mass = np.where(mass < 0.0, 0.0, mass)
    deficit = abs(1.0 - mass.sum())
    if deficit > _CLAMP_RENORM:
        mass = mass / mass.sum()
    return mass


def _power(x: np.ndarray, k: int) -> np.ndarray:
    if k == 0:
        return np.ones_like(x)
    return np.power(x, k)


def pmf_rademacher_mix(spec: RademacherMixSpec) -> LatticePMF:
    """PMF of ``S_{a,b}`` via an inverse FFT of its characteristic function.

    psi(theta) = cos(theta)^a cos(theta/2)^b is sampled at theta_j = 4 pi j / N,
    twisted by exp(i 2 pi j M / N) and transformed back, with ``M = 2a + b``
    and ``N`` the smallest power of two >= 2M + 1.
    """
    a, b = spec.a, spec.b
    M = 2 * a + b
    if M == 0:
        return LatticePMF(Fraction(1, 2), 0, np.ones(1))
    N = 1 << (2 * M).bit_length()
    j = np.arange(N)
    theta = 4.0 * np.pi * j / N
    psi = _power(np.cos(theta), a) * _power(np.cos(theta / 2.0), b)
    A = psi * np.exp(2j * np.pi * j * M / N)
    q = (np.fft.fft(A) / N).real[: 2 * M + 1]
    # support points r have the parity of M; the others are structurally zero
    q[1::2] = 0.0
    return LatticePMF(Fraction(1, 2), -M, _clean(q))


def pmf_weighted(spec: WeightedSumSpec) -> LatticePMF:
    """PMF of ``s * S_v`` on the integer lattice, by FFT of the characteristic function."""
    types = spec.summand_types()
    lo = sum(c * min(x) for c, x, _ in types)
    hi = sum(c * max(x) for c, x, _ in types)
    spacing = Fraction(1, spec.scale)
    if hi == lo:
        return LatticePMF(spacing, lo, np.ones(1))
    span = hi - lo
    N = 1 << (span).bit_length()
    theta = 2.0 * np.pi * np.arange(N) / N
    p = float(spec.p)
    log_mod = np.zeros(N)
    phase = -theta * lo
    for count, (x1, x0), _ in types:
        if count == 0:
            continue
        base = p * np.exp(1j * theta * x1) + (1.0 - p) * np.exp(1j * theta * x0)
        log_mod += count * np.log(np.maximum(np.abs(base), 1e-300))
        phase += count * np.angle(base)
    A = np.exp(log_mod) * np.exp(1j * phase)
    mass = (np.fft.fft(A) / N).real[: span + 1]
    return LatticePMF(spacing, lo, _clean(mass))


def _convolve_kernel(pmf: LatticePMF, atoms: Sequence[int], weights: Sequence[float]) -> LatticePMF:
    lo_atom, hi_atom = min(atoms), max(atoms)
    out = np.zeros(len(pmf.mass) + hi_atom - lo_atom)
    size = len(pmf.mass)
    for x, w in zip(atoms, weights):
        off = x - lo_atom
        out[off : off + size] += w * pmf.mass
    return LatticePMF(pmf.spacing, pmf.min_index + lo_atom, out)


def _trim(pmf: LatticePMF) -> LatticePMF:
    nz = np.flatnonzero(pmf.mass)
    if len(nz) == 0:
        return pmf
    return LatticePMF(pmf.spacing, pmf.min_index + int(nz[0]), pmf.mass[nz[0] : nz[-1] + 1], pmf.denominator)


def _check_lattice(pmf: LatticePMF, p: str | float | Fraction) -> tuple[int, int, float]:
    p = check_probability(p)
    if pmf.spacing != Fraction(1, lattice_scale(p)):
        raise InputError(
            f"kernel atom off-lattice: pmf spacing {pmf.spacing} does not match p = {p}"
        )
    return p.numerator, p.denominator, float(p)


def _remove_two_point(pmf: LatticePMF, atoms: tuple[int, int], weights: tuple[int, int], wden: int) -> LatticePMF:
    """Remove one independent two-point summand from ``pmf`` (solve ``Y = X + D`` for ``X``).

    ``atoms`` are ``(high, low)`` with integer weights over ``wden``.  The
    recursion runs from the end whose atom carries the larger weight.  For
    exact PMFs every division is checked to be exact; for float PMFs errors
    grow by at most ``1 / |w_high - w_low|`` per removal.
    """
    (x_hi, x_lo), (w_hi, w_lo) = atoms, weights
    d = x_hi - x_lo
    y = pmf.mass
    size = len(y) - d
    if size <= 0:
        raise InputError("pmf is too narrow to contain the summand being removed")
    if pmf.exact:
        if pmf.denominator % wden:
            raise InputError("pmf does not contain the summand being removed")
        x = np.zeros(size, dtype=object)
        for i in range(size):
            if w_lo >= w_hi:
                num = int(y[i]) - (w_hi * int(x[i - d]) if i >= d else 0)
                k, w = i, w_lo
            else:
                k = size - 1 - i
                num = int(y[k + d]) - (w_lo * int(x[k + d]) if k + d < size else 0)
                w = w_hi
            if num % w or num < 0:
                raise InputError("pmf does not contain the summand being removed")
            x[k] = num // w
        return LatticePMF(pmf.spacing, pmf.min_index - x_lo, x, pmf.denominator // wden)
    fh, fl = w_hi / wden, w_lo / wden
    x = np.zeros(size)
    if fl >= fh:
        # Y[i] = fl X[i] + fh X[i - d], solved upward in blocks of d
        for start in range(0, size, d):
            stop = min(start + d, size)
            prev = x[start - d : stop - d] if start >= d else 0.0
            x[start:stop] = (y[start:stop] - fh * prev) / fl
    else:
        # Y[i + d] = fh X[i] + fl X[i + d], solved downward
        for stop in range(size, 0, -d):
            start = max(stop - d, 0)
            nxt = np.zeros(stop - start)
            avail = min(size, stop + d) - (start + d)
            if avail > 0:
                nxt[:avail] = x[start + d : start + d + avail]
            x[start:stop] = (y[start + d : stop + d] - fl * nxt) / fh
    if x.min(initial=0.0) < -1e-6:
        raise InputError("pmf does not contain the summand being removed")
    return LatticePMF(pmf.spacing, pmf.min_index - x_lo, _clean(x))


def _add_two_point(pmf: LatticePMF, atoms: tuple[int, int], weights: tuple[int, int], wden: int) -> LatticePMF:
    (x_hi, x_lo), (w_hi, w_lo) = atoms, weights
    size = len(pmf.mass)
    if pmf.exact:
        out = np.zeros(size + x_hi - x_lo, dtype=object)
        out[:size] += w_lo * pmf.mass
        out[x_hi - x_lo :] += w_hi * pmf.mass
        return LatticePMF(pmf.spacing, pmf.min_index + x_lo, out, pmf.denominator * wden)
    return _convolve_kernel(pmf, (x_hi, x_lo), (w_hi / wden, w_lo / wden))


def _eps_delta(p: Fraction) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int], int]:
    u, q = p.numerator, p.denominator
    eps = ((q - u) * (q - u), -u * (q - u))
    delta = (u * (q - u), -u * u)
    return eps, delta, (u, q - u), q


def pmf_shift_update(pmf: LatticePMF, p: str | float | Fraction) -> LatticePMF:
    """Turn one delta summand into an epsilon summand.

    Input is the PMF of ``s*S_v``; output is the PMF of ``s*S_{v'}`` with
    ``v' = (v11, v10 + 1, v01 - 1)``.  A unit's epsilon and delta atoms share
    its assignment, so this is a deconvolution by the delta law followed by a
    convolution with the epsilon law, not a single kernel convolution.  At
    ``p = 1/2`` both laws are +-1 and the PMF is returned unchanged.
    """
    _check_lattice(pmf, p)
    p = check_probability(p)
    if p == Fraction(1, 2):
        return pmf
    eps, delta, w, q = _eps_delta(p)
    return _add_two_point(_remove_two_point(pmf, delta, w, q), eps, w, q)


def pmf_shift_reverse(pmf: LatticePMF, p: str | float | Fraction) -> LatticePMF:
    """Inverse of :func:`pmf_shift_update`: ``v' = (v11, v10 - 1, v01 + 1)``."""
    _check_lattice(pmf, p)
    p = check_probability(p)
    if p == Fraction(1, 2):
        return pmf
    eps, delta, w, q = _eps_delta(p)
    return _add_two_point(_remove_two_point(pmf, eps, w, q), delta, w, q)


def shift_reanchor_interval(p: str | float | Fraction, budget: float = 1e-11, cap: int = 64) -> int:
    """Float shift updates allowed between from-scratch rebuilds.

    Each float deconvolution can amplify existing error by ``1/|1 - 2p|``;
    starting from roughly 1e-15 FFT noise this keeps chains within ``budget``.
    """
    p = check_probability(p)
    if p == Fraction(1, 2):
        return cap
    growth = 1.0 / abs(1.0 - 2.0 * float(p))
    steps = int(np.log(budget / 1e-15) / np.log(growth + 1.0))
    return max(1, min(cap, steps))


def run_step_kernel(p: str | float | Fraction) -> tuple[list[int], list[float]]:
    """Atoms (scaled by ``s``) and weights of ``eps + delta`` for two distinct units."""
    p = check_probability(p)
    u, q, pf = p.numerator, p.denominator, float(p)
    atoms = [q * (q - u), q * (q - 2 * u), 0, -q * u]
    weights = [pf * pf, pf * (1 - pf), pf * (1 - pf), (1 - pf) ** 2]
    return atoms, weights


def pmf_run_step(pmf: LatticePMF, p: str | float | Fraction) -> LatticePMF:
    """Add one epsilon and one delta summand (``v10 += 1, v01 += 1``).

    This is the step taken inside a fixed-candidate run, where ``v10 - v01``
    is pinned by the candidate ATE.  Two null-effect units become one
    epsilon and one delta unit, so it is a plain positive convolution.
    """
    _check_lattice(pmf, p)
    atoms, weights = run_step_kernel(p)
    return _convolve_kernel(pmf, atoms, weights)


def _summands(spec: RademacherMixSpec | WeightedSumSpec) -> tuple[Fraction, list, int]:
    """Normalize a spec to ``(spacing, [(count, atoms, int_weights)], weight_denominator)``."""
    if isinstance(spec, RademacherMixSpec):
        return Fraction(1, 2), [(spec.a, (2, -2), (1, 1)), (spec.b, (1, -1), (1, 1))], 2
    return Fraction(1, spec.scale), spec.summand_types(), spec.p.denominator


def pmf_direct_convolution(
    spec: RademacherMixSpec | WeightedSumSpec, exact: bool = False
) -> LatticePMF:
    """Sequential convolution, one summand at a time.

    With ``exact=True`` the masses are integer counts over
    ``denominator = (weight denominator) ** (number of summands)``.
    """
    spacing, types, wden = _summands(spec)
    total = sum(c for c, _, _ in types)
    if total > DIRECT_GUARD:
        raise InputError(f"direct convolution limited to {DIRECT_GUARD} summands, got {total}")
    if exact:
        mass = np.array([1], dtype=object)
    else:
        mass = np.ones(1)
    lo = 0
    for count, (x1, x0), (w1, w0) in types:
        xlo, xhi = min(x1, x0), max(x1, x0)
        wl, wh = (w1, w0) if x1 < x0 else (w0, w1)
        if not exact:
            wl, wh = wl / wden, wh / wden
        for _ in range(count):
            size = len(mass)
            out = np.zeros(size + xhi - xlo, dtype=object if exact else float)
            out[:size] += wl * mass
            out[xhi - xlo : xhi - xlo + size] += wh * mass
            mass = out
            lo += xlo
    if exact:
        return _trim(LatticePMF(spacing, lo, mass, wden**total))
    return LatticePMF(spacing, lo, mass)


def two_sided_tail(pmf: LatticePMF, threshold: ScaledThreshold) -> float | Fraction:
    """``Pr(|X| >= threshold)`` summed exactly over the lattice.

    Returns a Fraction for exact PMFs and a float otherwise.  The threshold
    must sit on the PMF's lattice.
    """
    if threshold.value <= 0:
        return Fraction(1) if pmf.exact else 1.0
    idx = threshold.exact / pmf.spacing
    if idx.denominator != 1:
        raise InputError(
            f"lattice mismatch: threshold {threshold.exact} is not a multiple of {pmf.spacing}"
        )
    k = int(idx)
    # entries with index <= -k and >= k
    upper = max(k - pmf.min_index, 0)
    lower_end = min(-k - pmf.min_index + 1, len(pmf.mass))
    hi_part = pmf.mass[upper:] if upper < len(pmf.mass) else pmf.mass[:0]
    lo_part = pmf.mass[: max(lower_end, 0)]
    if pmf.exact:
        num = sum(int(c) for c in hi_part) + sum(int(c) for c in lo_part)
        return Fraction(num, pmf.denominator)
    return float(min(hi_part.sum() + lo_part.sum(), 1.0))


def compute_probability_via_fft(
    a: int, b: int, threshold: ScaledThreshold, ledger: TestLedger | None = None
) -> float:
    """Two-sided tail of ``S_{a,b}`` at ``threshold``; one randomization test."""
    if a < 0 or b < 0:
        raise InputError("a and b must be nonnegative")
    if threshold.value <= 0:
        return 1.0
    two_delta = Fraction(2 * threshold.value, threshold.scale)
    if two_delta.denominator != 1 or (int(two_delta) - b) % 2:
        raise InputError(
            f"threshold off support: {threshold.exact} is not in the support of S_({a},{b})"
        )
    if ledger is not None:
        ledger.add_tail()
    return two_sided_tail(pmf_rademacher_mix(RademacherMixSpec(a, b)), threshold)


def exact_rademacher_tail(a: int, b: int, threshold: ScaledThreshold) -> Fraction:
    """Exact rational tail of ``S_{a,b}``; used to settle ties with alpha."""
    return two_sided_tail(pmf_direct_convolution(RademacherMixSpec(a, b), exact=True), threshold)


class ExactPMFCache:
    """Memoized exact PMFs for many nearby specs, each built from a neighbour.

    Specs are keyed by their summand counts; a missing entry is derived from
    the entry with one fewer summand of the last nonzero type, so building
    all PMFs up to size n costs one convolution step each.
    """

    def __init__(self, kind: str, p: Fraction = Fraction(1, 2)):
        self.kind = kind
        self.p = check_probability(p)
        self._cache: dict[tuple[int, ...], LatticePMF] = {}

    def _types(self, key: tuple[int, ...]):
        if self.kind == "rademacher":
            return _summands(RademacherMixSpec(*key))
        return _summands(WeightedSumSpec(*key, p=self.p))

    def get(self, key: tuple[int, ...]) -> LatticePMF:
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        chain = []
        cur = key
        while cur not in self._cache and any(cur):
            chain.append(cur)
            last = max(i for i, c in enumerate(cur) if c)
            cur = cur[:last] + (cur[last] - 1,) + cur[last + 1 :]
        if cur not in self._cache:
            spacing, _, _ = self._types(cur)
            self._cache[cur] = LatticePMF(spacing, 0, np.array([1], dtype=object), 1)
        for k in reversed(chain):
            parent = self._cache[cur]
            spacing, types, wden = self._types(k)
            last = max(i for i, c in enumerate(k) if c)
            _, (x1, x0), (w1, w0) = types[last]
            xlo, xhi = min(x1, x0), max(x1, x0)
            wl, wh = (w1, w0) if x1 < x0 else (w0, w1)
            size = len(parent.mass)
            out = np.zeros(size + xhi - xlo, dtype=object)
            out[:size] += wl * parent.mass
            out[xhi - xlo : xhi - xlo + size] += wh * parent.mass
            self._cache[k] = LatticePMF(spacing, parent.min_index + xlo, out, parent.denominator * wden)
            cur = k
        return self._cache[key]
