"""Infinite spectra given block by block, with closed forms where they exist.

The central objects are the harmonic sequence ``1, 1/2, 1/3, ...`` and the
dyadic block operator ``B`` whose eigenvalue ``2**-m`` has multiplicity
``2**m`` for every ``m`` in ``I = union_n [4**n, 2 * 4**n)``.  Both admit
closed forms for partial sums and power traces, which is what makes indices
like ``N ~ 2**(2**17)`` reachable: such integers are handled exactly but the
spectrum is never walked entry by entry.

Dixmier traces are not constructed.  They are bracketed by the values of the
log-average ``x_N = (mu(0) + ... + mu(N)) / log(N + 2)`` along a subsequence,
see :func:`dixmier_envelope`.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, NamedTuple

import mpmath

from ._numeric import (
    Estimate,
    log2_floor,
    log_bigint,
    to_fraction,
    to_mpf,
    workprec,
)
from .spectra import Spectrum

# Maximum number of blocks a generic (non-closed-form) walk may visit.
WORK_BUDGET = 1_000_000

# Absolute tail budget for power traces of B.
TRACE_BUDGET = mpmath.mpf(2) ** -64


class WorkBudgetExceeded(RuntimeError):
    pass


def mpf_to_fraction(x) -> Fraction:
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    man, exp = mpmath.mpf(x).man_exp
    return Fraction(man) * Fraction(2) ** exp


def _lt(x, y) -> bool:
    """Compare mixed Fraction / mpf values, exactly when both are rational."""
    if isinstance(x, (Fraction, int)) and isinstance(y, (Fraction, int)):
        return x < y
    return mpf_to_fraction(x) < mpf_to_fraction(y)


def _add(x, y):
    if isinstance(x, (Fraction, int)) and isinstance(y, (Fraction, int)):
        return x + y
    with workprec():
        return to_mpf(x) + to_mpf(y)


def _mul(x, y):
    if isinstance(x, (Fraction, int)) and isinstance(y, (Fraction, int)):
        return Fraction(x) * y
    with workprec():
        return to_mpf(x) * to_mpf(y)


class LazySpectrum:
    """Singular values listed as ``(eigenvalue, multiplicity)`` blocks.

    Subclasses provide :meth:`blocks`; the generic methods below walk it under
    :data:`WORK_BUDGET` and are overridden by closed forms where possible.
    Indices are zero-based and partial sums are inclusive.
    """

    #: known bound on sup_k (k + 1) mu(k), or None
    weak_l1_bound = None
    #: number of nonzero singular values, None if infinite
    rank: int | None = None

    def blocks(self) -> Iterator[tuple[object, int]]:
        raise NotImplementedError

    def _walk(self):
        for count, blk in enumerate(self.blocks()):
            if count >= WORK_BUDGET:
                raise WorkBudgetExceeded(
                    f"{type(self).__name__}: more than {WORK_BUDGET} blocks needed"
                )
            yield blk

    def mu_at(self, k: int):
        if k < 0:
            raise ValueError("index must be nonnegative")
        seen = 0
        for value, mult in self._walk():
            seen += mult
            if k < seen:
                return value
        return Fraction(0)

    def partial_sum(self, n: int):
        """``mu(0) + ... + mu(n)``; zero for ``n < 0``."""
        total = Fraction(0)
        remaining = n + 1
        for value, mult in self._walk():
            if remaining <= 0:
                break
            take = min(mult, remaining)
            total = _add(total, _mul(value, take))
            remaining -= take
        return total

    def spectral_count(self, threshold) -> int:
        """Number of singular values strictly greater than ``threshold``."""
        if not threshold > 0:
            raise ValueError("threshold must be positive")
        count = 0
        for value, mult in self._walk():
            if not _lt(threshold, value):
                break
            count += mult
        return count

    def trace(self):
        """Sum of all singular values, or None when it diverges."""
        if self.rank is None:
            return None
        return self.partial_sum(self.rank - 1)

    def tail_mass(self, n: int):
        """``sum_{k >= n} mu(k)``; requires a finite trace."""
        t = self.trace()
        if t is None:
            raise ValueError(f"{type(self).__name__} is not trace class")
        return _add(t, _mul(-1, self.partial_sum(n - 1)))

    def power_trace(self, p) -> Estimate:
        if self.rank is None:
            raise NotImplementedError(f"no power-trace closed form for {type(self).__name__}")
        with workprec():
            pm = to_mpf(p)
            terms = [mult * mpmath.power(to_mpf(v), pm) for v, mult in self.blocks()]
            total = mpmath.fsum(terms)
            return Estimate(total, total * mpmath.mpf(2) ** (8 - mpmath.mp.prec))

    def boundaries(self, max_bits: int) -> Iterator[tuple[int, object]]:
        """Yield ``(N, partial_sum(N))`` at the last index of each block with ``N < 2**max_bits``."""
        limit = 1 << max_bits
        seen = 0
        total = Fraction(0)
        for value, mult in self._walk():
            seen += mult
            total = _add(total, _mul(value, mult))
            if seen - 1 >= limit:
                return
            yield seen - 1, total


# ---------------------------------------------------------------------------
# concrete spectra


class Finite(LazySpectrum):
    """A finite-rank spectrum; values may be rationals or mpmath reals."""

    def __init__(self, values):
        vals = [v if isinstance(v, mpmath.mpf) else to_fraction(v) for v in values]
        vals.sort(key=mpf_to_fraction, reverse=True)
        if any(_lt(v, 0) for v in vals):
            raise ValueError("negative singular value")
        self.values = [v for v in vals if v != 0]
        self.rank = len(self.values)
        self.weak_l1_bound = max(
            (_mul(k + 1, v) for k, v in enumerate(self.values)),
            key=mpf_to_fraction,
            default=Fraction(0),
        )

    @classmethod
    def from_spectrum(cls, s: Spectrum) -> "Finite":
        return cls(s.values)

    def blocks(self):
        vals = self.values
        k = 0
        while k < len(vals):
            j = k
            while j < len(vals) and vals[j] == vals[k]:
                j += 1
            yield vals[k], j - k
            k = j

    def mu_at(self, k):
        if k < 0:
            raise ValueError("index must be nonnegative")
        return self.values[k] if k < len(self.values) else Fraction(0)

    def partial_sum(self, n):
        total = Fraction(0)
        for v in self.values[: max(0, min(n + 1, len(self.values)))]:
            total = _add(total, v)
        return total

    def power_trace(self, p) -> Estimate:
        if all(isinstance(v, Fraction) for v in self.values):
            from .spectra import power_sum

            return power_sum(Spectrum(tuple(self.values)), p)
        return super().power_trace(p)

    def __repr__(self):
        return f"Finite({[str(v) for v in self.values]})"


class Harmonic(LazySpectrum):
    """``mu(k) = 1 / (k + 1)``."""

    weak_l1_bound = Fraction(1)
    rank = None
    exact_cutoff = 64

    def blocks(self):
        k = 1
        while True:
            yield Fraction(1, k), 1
            k += 1

    def mu_at(self, k):
        if k < 0:
            raise ValueError("index must be nonnegative")
        return Fraction(1, k + 1)

    def partial_sum(self, n):
        if n < 0:
            return Fraction(0)
        if n < self.exact_cutoff:
            return sum((Fraction(1, j) for j in range(1, n + 2)), Fraction(0))
        with workprec():
            return mpmath.harmonic(mpmath.mpf(n + 1))

    def spectral_count(self, threshold):
        t = mpf_to_fraction(threshold)
        if t <= 0:
            raise ValueError("threshold must be positive")
        # k + 1 < 1/t
        inv = 1 / t
        return max(0, math.ceil(inv) - 1)

    def power_trace(self, p) -> Estimate:
        s = to_mpf(p) - 1
        if not s > 0:
            raise ValueError("harmonic power trace needs exponent > 1")
        return zeta_shifted(s)

    def __repr__(self):
        return "Harmonic()"


class Geometric(LazySpectrum):
    """``mu(k) = scale * ratio**k`` with rational ``0 < ratio < 1``."""

    rank = None

    def __init__(self, ratio, scale=1):
        self.ratio = to_fraction(ratio)
        self.scale = to_fraction(scale)
        if not 0 < self.ratio < 1 or self.scale <= 0:
            raise ValueError("need 0 < ratio < 1 and scale > 0")
        r = self.ratio
        # (k + 1) r^k increases while (k + 2) r > k + 1
        k = 0
        while (k + 2) * r > k + 1:
            k += 1
        self.weak_l1_bound = self.scale * (k + 1) * r**k

    def blocks(self):
        v = self.scale
        while True:
            yield v, 1
            v *= self.ratio

    def mu_at(self, k):
        return self.scale * self.ratio**k

    def partial_sum(self, n):
        if n < 0:
            return Fraction(0)
        r = self.ratio
        return self.scale * (1 - r ** (n + 1)) / (1 - r)

    def trace(self):
        return self.scale / (1 - self.ratio)

    def tail_mass(self, n: int) -> Fraction:
        """``sum_{k >= n} mu(k)``."""
        return self.scale * self.ratio**n / (1 - self.ratio)

    def power_trace(self, p) -> Estimate:
        p_int = p if isinstance(p, int) else None
        if isinstance(p, Fraction) and p.denominator == 1:
            p_int = p.numerator
        if p_int is not None:
            return Estimate(self.scale**p_int / (1 - self.ratio**p_int), 0)
        with workprec():
            pm = to_mpf(p)
            val = mpmath.power(to_mpf(self.scale), pm) / (
                1 - mpmath.power(to_mpf(self.ratio), pm)
            )
            return Estimate(val, abs(val) * mpmath.mpf(2) ** (8 - mpmath.mp.prec))

    def __repr__(self):
        return f"Geometric(ratio={self.ratio}, scale={self.scale})"


class DyadicB(LazySpectrum):
    """The dyadic block operator: eigenvalue ``2**-m`` with multiplicity ``2**m``, ``m`` in ``I``.

    ``I`` is the union of ``[4**n, 2 * 4**n)`` over ``n >= 0``, i.e. the
    positive integers with an even ``floor(log2 m)``.  Each block carries mass
    exactly one.
    """

    rank = None
    # mu(k) <= 2 / (k + 1)
    weak_l1_bound = Fraction(2)

    @staticmethod
    def in_I(m: int) -> bool:
        return m >= 1 and (m.bit_length() - 1) % 2 == 0

    @staticmethod
    def members() -> Iterator[int]:
        n = 0
        while True:
            lo = 4**n
            yield from range(lo, 2 * lo)
            n += 1

    @staticmethod
    def _intervals_upto(m: int):
        n = 0
        while 4**n <= m:
            lo = 4**n
            yield lo, min(m, 2 * lo - 1)
            n += 1

    def count_members(self, m: int) -> int:
        """``card(I ∩ [0, m])``."""
        return sum(hi - lo + 1 for lo, hi in self._intervals_upto(m) if hi >= lo)

    def cumulative_count(self, m: int) -> int:
        """Number of singular values in the blocks with index ``<= m``."""
        return sum((1 << (hi + 1)) - (1 << lo) for lo, hi in self._intervals_upto(m) if hi >= lo)

    def boundary_partial_sum(self, m: int) -> Fraction:
        """Partial sum through the last entry of block ``m`` (a member of ``I``)."""
        return Fraction(self.count_members(m))

    def blocks(self):
        for m in self.members():
            yield Fraction(1, 1 << m), 1 << m

    def _block_of(self, k: int) -> int:
        """Smallest ``m`` in ``I`` whose block contains index ``k``."""
        lo, hi = 1, max(2, k.bit_length() + 1)
        while self.cumulative_count(hi) <= k:
            hi *= 2
        while lo < hi:
            mid = (lo + hi) // 2
            if self.cumulative_count(mid) > k:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def mu_at(self, k):
        if k < 0:
            raise ValueError("index must be nonnegative")
        return Fraction(1, 1 << self._block_of(k))

    def partial_sum(self, n):
        if n < 0:
            return Fraction(0)
        m = self._block_of(n)
        before = self.cumulative_count(m - 1)
        return Fraction(self.count_members(m - 1)) + Fraction(n + 1 - before, 1 << m)

    def spectral_count(self, threshold):
        t = mpf_to_fraction(threshold)
        if t <= 0:
            raise ValueError("threshold must be positive")
        # 2^-m > t  <=>  2^m < 1/t
        inv = 1 / t
        e = log2_floor(inv)
        m_max = e - 1 if Fraction(2) ** e == inv else e
        return self.cumulative_count(m_max) if m_max >= 1 else 0

    def power_trace(self, p) -> Estimate:
        """``Tr(B**p) = sum_{m in I} 2**(-m s)`` with ``s = p - 1``.

        Each interval of ``I`` is a geometric sum; summation stops once the
        remaining tail ``r**a / (1 - r)`` is below :data:`TRACE_BUDGET`.  For
        integer ``s`` the truncated sum is an exact rational.
        """
        if isinstance(p, (int, Fraction)) and Fraction(p).denominator == 1:
            s = int(p) - 1
            if s <= 0:
                raise ValueError("need exponent > 1")
            r = Fraction(1, 1 << s)
            total, n = Fraction(0), 0
            while True:
                lo = 4**n
                total += (r**lo - r ** (2 * lo)) / (1 - r)
                tail = r ** (4 * lo) / (1 - r)
                if tail < mpf_to_fraction(TRACE_BUDGET):
                    return Estimate(total, to_mpf(tail))
                n += 1
        with workprec():
            s = to_mpf(p) - 1
            if not s > 0:
                raise ValueError("need exponent > 1")
            ls = s * mpmath.ln2
            one_minus_r = -mpmath.expm1(-ls)
            terms, n = [], 0
            while True:
                lo = 4**n
                terms.append((mpmath.exp(-ls * lo) - mpmath.exp(-ls * 2 * lo)) / one_minus_r)
                tail = mpmath.exp(-ls * 4 * lo) / one_minus_r
                if tail < TRACE_BUDGET:
                    break
                n += 1
            total = mpmath.fsum(terms)
            rounding = total * len(terms) * mpmath.mpf(2) ** (10 - mpmath.mp.prec)
            return Estimate(total, tail + rounding)

    def boundaries(self, max_bits):
        limit = 1 << max_bits
        count, members = 0, 0
        for m in self.members():
            count += 1 << m
            members += 1
            if count - 1 >= limit:
                return
            yield count - 1, Fraction(members)

    def __repr__(self):
        return "DyadicB()"


class Scaled(LazySpectrum):
    def __init__(self, base: LazySpectrum, factor):
        self.base = base
        self.factor = factor if isinstance(factor, mpmath.mpf) else to_fraction(factor)
        if not self.factor > 0:
            raise ValueError("scale factor must be positive")
        self.rank = base.rank
        wb = base.weak_l1_bound
        self.weak_l1_bound = None if wb is None else _mul(self.factor, wb)

    def blocks(self):
        for v, mult in self.base.blocks():
            yield _mul(self.factor, v), mult

    def mu_at(self, k):
        return _mul(self.factor, self.base.mu_at(k))

    def partial_sum(self, n):
        return _mul(self.factor, self.base.partial_sum(n))

    def spectral_count(self, threshold):
        if isinstance(self.factor, Fraction):
            return self.base.spectral_count(mpf_to_fraction(threshold) / self.factor)
        with workprec():
            return self.base.spectral_count(to_mpf(threshold) / self.factor)

    def trace(self):
        t = self.base.trace()
        return None if t is None else _mul(self.factor, t)

    def power_trace(self, p) -> Estimate:
        inner = self.base.power_trace(p)
        if isinstance(self.factor, Fraction) and inner.exact and _is_int(p):
            return Estimate(self.factor ** int(p) * inner.value, 0)
        with workprec():
            f = mpmath.power(to_mpf(self.factor), to_mpf(p))
            value = f * to_mpf(inner.value)
            err = f * to_mpf(inner.error) + abs(value) * mpmath.mpf(2) ** (8 - mpmath.mp.prec)
            return Estimate(value, err)

    def boundaries(self, max_bits):
        for n, ps in self.base.boundaries(max_bits):
            yield n, _mul(self.factor, ps)

    def tail_mass(self, n):
        return _mul(self.factor, self.base.tail_mass(n))

    def __repr__(self):
        return f"Scaled({self.base!r}, {self.factor})"


def _is_int(p) -> bool:
    return isinstance(p, int) or (isinstance(p, Fraction) and p.denominator == 1)


class DirectSum(LazySpectrum):
    """Direct sum of spectra: the merged, re-sorted union of the parts.

    With at most one infinite part, prefix sums use the split formula
    ``sum of top n+1 = max_t (top-t of the finite parts + top-(n+1-t) of the infinite part)``
    and so never walk the infinite part.
    """

    def __init__(self, parts):
        self.parts = list(parts)
        if not self.parts:
            raise ValueError("empty direct sum")
        finite_vals = []
        self.infinite = []
        for part in self.parts:
            if part.rank is None:
                self.infinite.append(part)
            else:
                finite_vals.extend(v for v, mult in part.blocks() for _ in range(mult))
        self.finite = Finite(finite_vals)
        ranks = [p.rank for p in self.parts]
        self.rank = None if None in ranks else sum(ranks)
        bounds = [p.weak_l1_bound for p in self.infinite] + [self.finite.weak_l1_bound]
        # counting functions add, so weak-l1 quasi-norms are subadditive
        self.weak_l1_bound = None if None in bounds else _sum(bounds)

    def blocks(self):
        streams = [self.finite.blocks()] + [p.blocks() for p in self.infinite]
        merged = heapq.merge(*streams, key=lambda b: mpf_to_fraction(b[0]), reverse=True)
        current, mult = None, 0
        for value, m in merged:
            if current is not None and value == current:
                mult += m
                continue
            if current is not None:
                yield current, mult
            current, mult = value, m
        if current is not None:
            yield current, mult

    def partial_sum(self, n):
        if n < 0:
            return Fraction(0)
        if len(self.infinite) > 1:
            return super().partial_sum(n)
        if not self.infinite:
            return self.finite.partial_sum(n)
        inf = self.infinite[0]
        best = None
        top = Fraction(0)
        for t in range(0, min(self.finite.rank, n + 1) + 1):
            if t:
                top = _add(top, self.finite.values[t - 1])
            cand = _add(top, inf.partial_sum(n - t))
            if best is None or _lt(best, cand):
                best = cand
        return best

    def mu_at(self, k):
        if len(self.infinite) > 1:
            return super().mu_at(k)
        hi, lo = self.partial_sum(k), self.partial_sum(k - 1)
        if isinstance(hi, Fraction) and isinstance(lo, Fraction):
            return hi - lo
        with workprec():
            return to_mpf(hi) - to_mpf(lo)

    def spectral_count(self, threshold):
        return sum(p.spectral_count(threshold) for p in self.parts)

    def trace(self):
        ts = [p.trace() for p in self.parts]
        return None if None in ts else _sum(ts)

    def power_trace(self, p) -> Estimate:
        ests = [part.power_trace(p) for part in self.parts]
        if all(e.exact for e in ests):
            return Estimate(sum((e.value for e in ests), Fraction(0)), 0)
        with workprec():
            return Estimate(
                mpmath.fsum(to_mpf(e.value) for e in ests),
                mpmath.fsum(to_mpf(e.error) for e in ests),
            )

    def __repr__(self):
        return f"DirectSum({self.parts!r})"


def _sum(values):
    total = Fraction(0)
    for v in values:
        total = _add(total, v)
    return total


def harmonic() -> Harmonic:
    return Harmonic()


def dyadic_B() -> DyadicB:
    return DyadicB()


def mu_at(spec: LazySpectrum, k: int):
    return spec.mu_at(k)


def spectral_count(spec: LazySpectrum, threshold) -> int:
    return spec.spectral_count(threshold)


def dyadic_count(n: int) -> int:
    """``N_n``: number of singular values of ``B`` above ``2**-(2**(2n+1))``."""
    return sum((1 << (2 * 4**j)) - (1 << 4**j) for j in range(n + 1))


# ---------------------------------------------------------------------------
# log-averages and envelopes


def log_average(spec: LazySpectrum, N: int):
    """``x_N = (mu(0) + ... + mu(N)) / log(N + 2)``."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    ps = spec.partial_sum(N)
    with workprec():
        return to_mpf(ps) / log_bigint(N + 2)


def harmonic_ratio(N: int):
    """``H_{N+1} / log(N + 2)``: the largest possible ``x_N`` for weak-l1 quasi-norm one."""
    return log_average(Harmonic(), N)


def scale_gap(spec: LazySpectrum, N: int, k: int = 2):
    """``|x_N - x_{kN}|``, which tends to zero for every weak-l1 spectrum."""
    with workprec():
        return abs(log_average(spec, N) - log_average(spec, k * N))


def scale_gap_bound(weak_bound, N: int, k: int = 2):
    """Upper bound for :func:`scale_gap` when ``mu(j) <= weak_bound / (j + 1)``.

    Going from ``N`` to ``kN`` adds mass at most ``c * log k`` and moves the
    normaliser by at most ``log k``, which gives
    ``|x_N - x_{kN}| <= c * log(k) * max(1, H_{N+1} / log(N + 2)) / log(N + 2)``.
    """
    with workprec():
        c = to_mpf(weak_bound)
        L = log_bigint(N + 2)
        return c * mpmath.log(k) * max(mpmath.mpf(1), harmonic_ratio(N)) / L


@dataclass
class TraceEnvelope:
    """Computed bracket for the accumulation points of ``x_N``.

    ``lower`` and ``upper`` are values of ``x_N`` actually attained inside the
    tail window, at ``lower_at`` and ``upper_at``.  They are evidence about
    ``liminf`` / ``limsup`` and never claimed to be those limits.
    """

    lower: object
    upper: object
    lower_at: int
    upper_at: int
    strategy: str
    points: list = field(default_factory=list)  # (N, x_N) pairs in order
    window_start: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def spread(self):
        return self.upper - self.lower


def _default_strategy(spec: LazySpectrum) -> str:
    if isinstance(spec, DyadicB) or (isinstance(spec, Scaled) and isinstance(spec.base, DyadicB)):
        return "blocks"
    if spec.rank is not None:
        return "dyadic"
    return "dyadic"


def _prefix_weak_bound(spec: LazySpectrum, limit: int = 4096):
    best, seen = Fraction(0), 0
    for value, mult in spec.blocks():
        seen += mult
        cand = _mul(seen, value)
        if _lt(best, cand):
            best = cand
        limit -= 1
        if limit <= 0:
            break
    return best


def dixmier_envelope(
    spec: LazySpectrum,
    strategy: str = "auto",
    max_bits: int = 512,
    min_bits: int = 4,
    tail_fraction: float = 0.5,
    tolerance: float = 1e-2,
) -> TraceEnvelope:
    """Evaluate ``x_N`` along a subsequence and bracket its tail.

    ``strategy`` is ``"blocks"`` (the last index of every block with
    ``N < 2**max_bits``), ``"dyadic"`` (``N = 2**j`` for
    ``min_bits <= j <= max_bits``) or ``"auto"``: blocks for the dyadic
    operator, dyadic otherwise.

    Diagnostics report whether the tail window has settled (spread below
    ``tolerance``), whether the running maximum kept increasing, and whether
    every endpoint obeys the finite-``N`` form of ``Tr_w(A) <= ||A||_{1,inf}``,
    namely ``x_N <= ||A||_{1,inf} * H_{N+1} / log(N + 2)``.
    """
    if strategy == "auto":
        strategy = _default_strategy(spec)
    bound = spec.weak_l1_bound
    bound_source = "metadata"
    if bound is None:
        bound = _prefix_weak_bound(spec)
        bound_source = "prefix"

    points = []
    with workprec():
        if strategy == "blocks":
            for N, ps in spec.boundaries(max_bits):
                if N >= (1 << min_bits) - 1 or not points:
                    points.append((N, to_mpf(ps) / log_bigint(N + 2)))
        elif strategy == "dyadic":
            for j in range(min_bits, max_bits + 1):
                N = 1 << j
                points.append((N, log_average(spec, N)))
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
    if not points:
        raise ValueError("no evaluation points for this strategy")

    start = min(len(points) - 1, int(len(points) * (1 - tail_fraction)))
    window = points[start:]
    lo_N, lo = min(window, key=lambda t: t[1])
    hi_N, hi = max(window, key=lambda t: t[1])

    running, increasing = None, True
    for _, x in points:
        if running is not None and x < running:
            increasing = False
        running = x if running is None else max(running, x)

    def within_bound(N, x):
        with workprec():
            limit = to_mpf(bound) * harmonic_ratio(N)
            return x <= limit * (1 + mpmath.mpf(2) ** (16 - mpmath.mp.prec))

    diagnostics = {
        "converged": bool(hi - lo <= tolerance),
        "spread": hi - lo,
        "tolerance": tolerance,
        "weak_l1_bound": bound,
        "bound_source": bound_source,
        "bound_respected": bool(within_bound(lo_N, lo) and within_bound(hi_N, hi)),
        "monotone_increasing": increasing,
        "evaluations": len(points),
    }
    return TraceEnvelope(lo, hi, lo_N, hi_N, strategy, points, start, diagnostics)


# ---------------------------------------------------------------------------
# zeta, power traces and summation identities


def zeta_shifted(s, terms: int = 12, cutoff: int = 20) -> Estimate:
    """``zeta(1 + s)`` for real ``s > 0`` by Euler-Maclaurin summation.

    With ``sigma = 1 + s``::

        zeta(sigma) = sum_{n < M} n**-sigma + M**(1-sigma)/s + M**-sigma/2
                      + sum_{k=1}^{K} B_{2k}/(2k)! * sigma(sigma+1)...(sigma+2k-2) * M**(1-sigma-2k)

    Since ``x**-sigma`` is completely monotone the remainder has the sign of,
    and is no larger than, the first omitted correction; that term plus a
    rounding allowance is the reported error.
    """
    with workprec():
        s = to_mpf(s)
        if not s > 0:
            raise ValueError("zeta_shifted needs s > 0")
        sigma = 1 + s
        M = cutoff
        head = mpmath.fsum(mpmath.power(n, -sigma) for n in range(1, M))
        tail = mpmath.power(M, -s) / s + mpmath.power(M, -sigma) / 2
        rising = sigma  # sigma (sigma+1) ... (sigma + 2k - 2)
        corr = []
        for k in range(1, terms + 2):
            if k > 1:
                rising *= (sigma + 2 * k - 3) * (sigma + 2 * k - 2)
            t = mpmath.bernoulli(2 * k) / mpmath.factorial(2 * k) * rising * mpmath.power(M, 1 - sigma - 2 * k)
            corr.append(t)
        value = head + tail + mpmath.fsum(corr[:terms])
        error = abs(corr[terms]) + abs(value) * mpmath.mpf(2) ** (12 - mpmath.mp.prec)
        return Estimate(value, error)


def power_trace_lazy(spec: LazySpectrum, one_plus_s) -> Estimate:
    """``Tr(A**(1+s))`` for ``s > 0`` with an error bound."""
    if not to_mpf(one_plus_s) > 1:
        raise ValueError("exponent must exceed 1")
    return spec.power_trace(one_plus_s)


class DilationCheck(NamedTuple):
    lhs: object
    rhs: object
    discrepancy: object


def _ratio(s):
    """``2**-s`` exactly when ``s`` is an integer, else as an mpf."""
    if isinstance(s, (int, Fraction)) and Fraction(s).denominator == 1:
        return Fraction(1, 1 << int(s)), True
    if isinstance(s, float) and s.is_integer() and s < 4096:
        return Fraction(1, 1 << int(s)), True
    with workprec():
        return mpmath.power(2, -to_mpf(s)), False


def dilation_sum_check(x, s) -> DilationCheck:
    """Both sides of the double-prefix-sum identity for finitely supported ``x``::

        sum_m (sum_{k<=m} sum_{l<=k} x_l) r**m  ==  (1 - r)**-2 * sum_l x_l r**l,   r = 2**-s

    The left side is summed directly over the support and then closed off
    with the exact geometric tail (beyond the support the double prefix sum
    grows linearly).  Exact for integer ``s`` and rational ``x``.
    """
    if not to_mpf(s) > 0:
        raise ValueError("s must be positive")
    r, exact = _ratio(s)
    xs = [to_fraction(v) for v in x] if exact else [to_mpf(to_fraction(v)) for v in x]
    zero = Fraction(0) if exact else mpmath.mpf(0)
    with workprec():
        if not xs:
            return DilationCheck(zero, zero, zero)
        L = len(xs)
        lhs, prefix, double, power = zero, zero, zero, (Fraction(1) if exact else mpmath.mpf(1))
        for m in range(L):
            prefix += xs[m]
            double += prefix
            lhs += double * power
            power *= r
        # here power == r**L, double == Q_{L-1}, prefix == total mass
        one = 1 - r
        lhs += double * power / one + prefix * power / (one * one)
        rhs = zero
        power = Fraction(1) if exact else mpmath.mpf(1)
        for v in xs:
            rhs += v * power
            power *= r
        rhs = rhs / (one * one)
        return DilationCheck(lhs, rhs, lhs - rhs)


def weighted_square_sum(s):
    """``sum_{m >= 0} (m + 1)**2 * 2**(-m s) = (1 + 2**-s) / (1 - 2**-s)**3``."""
    if not to_mpf(s) > 0:
        raise ValueError("s must be positive")
    r, exact = _ratio(s)
    with workprec():
        return (1 + r) / (1 - r) ** 3


# ---------------------------------------------------------------------------
# Fubini check for A0 ⊗ C


@dataclass
class FubiniReport:
    trace_C: Fraction
    checked: int
    sup_weighted: Fraction  # max over checked k of (k + 1) mu(k, A0 ⊗ C)
    bound_holds: bool
    samples: list  # (N, x_N(A0 ⊗ C), |x_N - Tr C|)
    decaying: bool


def harmonic_tensor_indices(c: Spectrum, rows: int) -> Iterator[tuple[int, int]]:
    """Indices ``(j, i)`` of the entries ``c[j] / (i + 1)``, ``i < rows``, in nonincreasing order.

    One heap slot per entry of ``c``.  Ordering uses integer cross
    multiplication, so it is exact.
    """
    den = math.lcm(*(v.denominator for v in c.values)) if c.values else 1
    nums = [int(v * den) for v in c.values]
    # key for a_j / (i + 1): compare a/(i+1) > a'/(i'+1) <=> a (i'+1) > a' (i+1)
    heap = [(_Key(a, 1), j, 0) for j, a in enumerate(nums) if a > 0]
    heapq.heapify(heap)
    while heap:
        key, j, i = heap[0]
        yield j, i
        if i + 1 < rows:
            heapq.heapreplace(heap, (_Key(nums[j], i + 2), j, i + 1))
        else:
            heapq.heappop(heap)


class _Key:
    """Heap key ordering ``num / den`` descending, by integer cross multiplication."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        self.num, self.den = num, den

    def __lt__(self, other):
        return self.num * other.den > other.num * self.den

    def __eq__(self, other):
        return self.num * other.den == other.num * self.den


def fubini_check(
    c: Spectrum,
    n_max: int = 1 << 20,
    check_max: int = 1 << 18,
    min_bits: int = 4,
) -> FubiniReport:
    """Check ``(k+1) mu(k, A0 ⊗ C) <= ||C||_1`` and track ``|x_N(A0 ⊗ C) - Tr C|``.

    ``A0`` is truncated to ``n_max * len(C) + 1`` entries, which leaves the
    first ``n_max + 1`` singular values of ``A0 ⊗ C`` unchanged.  The weak-l1
    inequality is checked exactly for ``k < check_max``; ``x_N`` is sampled at
    ``N = 2**j`` and computed from the per-row counts via harmonic numbers.
    """
    c = c.trim()
    if not c.values:
        raise ValueError("C must be nonzero")
    trace = c.trace
    den = math.lcm(*(v.denominator for v in c.values))
    nums = [int(v * den) for v in c.values]
    total_num = sum(nums)
    rows = n_max * len(c) + 1

    counts = [0] * len(c)
    best = Fraction(0)
    best_num, best_den = 0, 1
    holds = True
    checkpoints = {1 << j for j in range(min_bits, n_max.bit_length()) if (1 << j) <= n_max}
    samples = []
    k = 0
    for j, i in harmonic_tensor_indices(c, rows):
        if k < check_max:
            # (k + 1) * nums[j] / (den * (i + 1)) <= total_num / den
            lhs = (k + 1) * nums[j]
            rhs = total_num * (i + 1)
            if lhs > rhs:
                holds = False
            if lhs * best_den > best_num * (i + 1):
                best_num, best_den = lhs, i + 1
        counts[j] += 1
        if k in checkpoints:
            with workprec():
                ps = mpmath.fsum(
                    to_mpf(v) * mpmath.harmonic(cnt) for v, cnt in zip(c.values, counts)
                )
                x = ps / log_bigint(k + 2)
            samples.append((k, x, abs(x - to_mpf(trace))))
        k += 1
        if k > n_max:
            break
    best = Fraction(best_num, den * best_den)
    errs = [e for _, _, e in samples]
    decaying = len(errs) < 2 or errs[-1] <= max(errs[: len(errs) // 2 + 1])
    return FubiniReport(trace, min(k, check_max), best, holds, samples, decaying)


# ---------------------------------------------------------------------------
# descriptors


def parse_lazy(document) -> LazySpectrum:
    """Build a lazy spectrum from its JSON descriptor.

    Accepted types: ``harmonic``, ``dyadic-B``, ``geometric``
    (``ratio``, optional ``scale``), ``scaled`` (``factor``, ``base``),
    ``direct-sum`` (``parts``) and ``finite`` (``values``).
    """
    import json

    from .spectra import parse_spectrum

    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    if not isinstance(document, dict) or "type" not in document:
        raise ValueError("lazy spectrum descriptor must be an object with a 'type'")
    kind = document["type"]
    if kind == "harmonic":
        return Harmonic()
    if kind == "dyadic-B":
        return DyadicB()
    if kind == "geometric":
        return Geometric(document["ratio"], document.get("scale", 1))
    if kind == "scaled":
        return Scaled(parse_lazy(document["base"]), to_fraction(document["factor"]))
    if kind == "direct-sum":
        return DirectSum(parse_lazy(p) for p in document["parts"])
    if kind == "finite":
        return Finite.from_spectrum(parse_spectrum(document))
    raise ValueError(f"unknown lazy spectrum type {kind!r}")
