"""Exact singular-value sequences of finite-rank operators.

A :class:`Spectrum` is the nonincreasing list ``mu(0) >= mu(1) >= ... >= 0``
stored as :class:`fractions.Fraction`.  Everything that decides a
submajorization is exact; only non-integer powers go through mpmath, and
those return an :class:`~catalens._numeric.Estimate` with an error bound.

Partial sums use the inclusive convention ``partial_sum(s, n) = mu(0) + ... + mu(n)``.
The log-averaged sums in :mod:`catalens.asymptotics` use the same convention.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple

import mpmath

from ._numeric import Estimate, render_rational, to_fraction, to_mpf, workprec

# Relative error budget per term for non-integer powers.
TERM_BUDGET = mpmath.mpf(2) ** -50


class SpectrumFormatError(ValueError):
    """Malformed spectrum document; ``position`` is the offending entry index."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"entry {position}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Spectrum:
    values: tuple[Fraction, ...] = ()

    def __post_init__(self):
        vals = tuple(to_fraction(v) for v in self.values)
        for k, v in enumerate(vals):
            if v < 0:
                raise ValueError(f"negative singular value {v} at {k}")
            if k and vals[k - 1] < v:
                raise ValueError(f"values not nonincreasing at {k}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def __repr__(self) -> str:
        return "Spectrum(" + ", ".join(render_rational(v) for v in self.values) + ")"

    def scale(self, factor) -> "Spectrum":
        factor = to_fraction(factor)
        if factor < 0:
            raise ValueError("negative scaling factor")
        return Spectrum(tuple(factor * v for v in self.values))

    def trim(self) -> "Spectrum":
        """Drop trailing zeros."""
        vals = list(self.values)
        while vals and vals[-1] == 0:
            vals.pop()
        return Spectrum(tuple(vals))

    def pad(self, length: int) -> "Spectrum":
        extra = max(0, length - len(self.values))
        return Spectrum(self.values + (Fraction(0),) * extra)

    @property
    def trace(self) -> Fraction:
        return sum(self.values, Fraction(0))

    @property
    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)


def rearrange(x: Iterable) -> Spectrum:
    """Decreasing rearrangement of ``|x|``."""
    vals = []
    for k, v in enumerate(x):
        try:
            vals.append(abs(to_fraction(v)))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"entry {k}: {exc}") from exc
    vals.sort(reverse=True)
    return Spectrum(tuple(vals))


def partial_sum(s: Spectrum, n: int) -> Fraction:
    if n < 0:
        raise ValueError("partial_sum index must be nonnegative")
    return sum(s.values[: n + 1], Fraction(0))


def prefix_sums(s: Spectrum, length: int | None = None) -> list[Fraction]:
    """``[partial_sum(s, 0), ..., partial_sum(s, length - 1)]``, zero-padded."""
    if length is None:
        length = len(s)
    out, acc = [], Fraction(0)
    for k in range(length):
        if k < len(s):
            acc += s.values[k]
        out.append(acc)
    return out


class Submajorization(NamedTuple):
    """Outcome of ``b <<  a``; falsy when some prefix of ``b`` exceeds ``a``."""

    holds: bool
    index: int | None = None
    excess: Fraction | None = None

    def __bool__(self) -> bool:
        return self.holds


def submajorizes(a: Spectrum, b: Spectrum) -> Submajorization:
    """Check whether ``b`` is submajorized by ``a`` (``b ≺≺ a``).

    Shorter spectra are padded with zeros.  On failure, ``index`` is the least
    ``n`` with ``partial_sum(b, n) > partial_sum(a, n)`` and ``excess`` is the
    (positive) difference there.
    """
    sa = sb = Fraction(0)
    for n in range(max(len(a), len(b))):
        if n < len(a):
            sa += a.values[n]
        if n < len(b):
            sb += b.values[n]
        if sb > sa:
            return Submajorization(False, n, sb - sa)
    return Submajorization(True)


def iter_tensor(a: Spectrum, b: Spectrum) -> Iterator[Fraction]:
    """Yield the entries of ``mu(a) ⊗ mu(b)`` in nonincreasing order.

    Best-first search over the index grid: popping ``(i, j)`` pushes its two
    successors ``(i+1, j)`` and ``(i, j+1)``; a seen-set stops duplicates.
    The first ``k`` entries cost ``O(k log k)``.
    """
    if not a.values or not b.values:
        return
    av, bv = a.values, b.values
    heap = [(-(av[0] * bv[0]), 0, 0)]
    seen = {(0, 0)}
    while heap:
        neg, i, j = heapq.heappop(heap)
        yield -neg
        for ni, nj in ((i + 1, j), (i, j + 1)):
            if ni < len(av) and nj < len(bv) and (ni, nj) not in seen:
                seen.add((ni, nj))
                heapq.heappush(heap, (-(av[ni] * bv[nj]), ni, nj))


def tensor(a: Spectrum, b: Spectrum, length: int | None = None) -> Spectrum:
    """Singular values of ``A ⊗ B``; optionally only the top ``length`` of them.

    Asking for more entries than ``len(a) * len(b)`` raises ``ValueError``.
    """
    total = len(a) * len(b)
    if length is None:
        length = total
    if length < 0 or length > total:
        raise ValueError(f"requested {length} tensor entries but only {total} exist")
    return Spectrum(tuple(itertools.islice(iter_tensor(a, b), length)))


def tensor_materialized(a: Spectrum, b: Spectrum) -> Spectrum:
    """Reference tensor: all products, then a full sort."""
    return rearrange(x * y for x in a.values for y in b.values)


def direct_sum(a: Spectrum, b: Spectrum) -> Spectrum:
    return Spectrum(tuple(heapq.merge(a.values, b.values, reverse=True)))


def _integer_power(p) -> int | None:
    if isinstance(p, int) and not isinstance(p, bool):
        return p
    if isinstance(p, Fraction) and p.denominator == 1:
        return p.numerator
    if isinstance(p, float) and p.is_integer():
        return int(p)
    return None


def power_sum(s: Spectrum, p) -> Estimate:
    """``Tr(|S|^p) = sum_k mu(k)^p`` for ``p >= 1``.

    Exact for integer ``p``.  Otherwise each term is evaluated in mpmath and
    charged a relative error of ``2**-50``; terms are summed in descending
    order and the reported bound is the sum of the per-term charges.
    """
    p_int = _integer_power(p)
    if p_int is not None:
        if p_int < 1:
            raise ValueError(f"power must be >= 1, got {p}")
        return Estimate(sum((v ** p_int for v in s.values), Fraction(0)), 0)
    pm = to_mpf(to_fraction(p)) if not isinstance(p, mpmath.mpf) else p
    if not mpmath.isfinite(pm) or pm < 1:
        raise ValueError(f"power must be a finite real >= 1, got {p}")
    with workprec():
        terms = [mpmath.power(to_mpf(v), pm) for v in s.values if v]
        total = mpmath.fsum(terms)
        return Estimate(total, total * TERM_BUDGET)


def lp_norm(s: Spectrum, p) -> Estimate:
    """Schatten ``p``-norm; ``p = math.inf`` gives the largest singular value."""
    if p == math.inf or p == "inf":
        return Estimate(s.values[0] if s.values else Fraction(0), 0)
    p_int = _integer_power(p)
    ps = power_sum(s, p)
    if p_int == 1:
        return ps
    with workprec():
        pm = mpmath.mpf(p_int) if p_int is not None else to_mpf(to_fraction(p))
        total = to_mpf(ps.value)
        value = mpmath.root(total, pm) if p_int is not None else mpmath.power(total, 1 / pm)
        if total == 0:
            return Estimate(value, 0)
        rel = to_mpf(ps.error) / total
        # (1 + r)^(1/p) - 1 <= r / p, plus one rounding of the root
        return Estimate(value, value * (rel / pm + mpmath.mpf(2) ** -80))


def weak_l1_quasinorm(s: Spectrum) -> Fraction:
    """``sup_k (k + 1) * mu(k)``."""
    return max(((k + 1) * v for k, v in enumerate(s.values)), default=Fraction(0))


def parse_spectrum(document) -> Spectrum:
    """Parse the JSON spectrum format ``{"type": "finite", "values": [...]}``.

    ``document`` may be a JSON string or an already-decoded mapping.  Entries
    are strings (``"n/d"`` or decimals) or JSON numbers; they need not be sorted.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpectrumFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SpectrumFormatError("spectrum document must be a JSON object")
    kind = document.get("type", "finite")
    if kind != "finite":
        raise SpectrumFormatError(f"expected a finite spectrum, got type {kind!r}")
    if "values" not in document or not isinstance(document["values"], list):
        raise SpectrumFormatError("missing 'values' array")
    vals = []
    for k, raw in enumerate(document["values"]):
        if isinstance(raw, bool) or not isinstance(raw, (str, int, float)):
            raise SpectrumFormatError(f"not a number: {raw!r}", k)
        try:
            v = to_fraction(raw)
        except (ValueError, TypeError) as exc:
            raise SpectrumFormatError(str(exc), k) from exc
        if v < 0:
            raise SpectrumFormatError(f"negative value {raw!r}", k)
        vals.append(v)
    return rearrange(vals)


def spectrum_to_json(s: Spectrum) -> dict:
    return {"type": "finite", "values": [render_rational(v) for v in s.values]}


def spectrum_to_csv(s: Spectrum) -> str:
    return "".join(render_rational(v) + "\n" for v in s.values)
