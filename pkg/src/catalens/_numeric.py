"""Shared numeric helpers: exact rational coercion, error-tracked reals, big-int logs."""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction
from numbers import Rational
from typing import NamedTuple, Union

import mpmath

# Working precision (bits) for every mpmath evaluation in the package.
DEFAULT_PREC = 96

Real = Union[Fraction, int, float, mpmath.mpf]


def set_precision(bits: int) -> None:
    """Set the working precision used by all high-precision evaluations."""
    global DEFAULT_PREC
    if bits < 53:
        raise ValueError(f"precision must be at least 53 bits, got {bits}")
    DEFAULT_PREC = int(bits)


def workprec():
    return mpmath.workprec(DEFAULT_PREC)


class Estimate(NamedTuple):
    """A real value together with a rigorous absolute error bound.

    ``value`` is a :class:`~fractions.Fraction` when the quantity was computed
    exactly (then ``error == 0``) and an ``mpmath.mpf`` otherwise.
    """

    value: object
    error: object = 0

    @property
    def exact(self) -> bool:
        return isinstance(self.value, (Fraction, int)) and self.error == 0

    def lower(self):
        return to_mpf(self.value) - to_mpf(self.error)

    def upper(self):
        return to_mpf(self.value) + to_mpf(self.error)

    def __float__(self) -> float:
        return float(self.value)


def to_fraction(x) -> Fraction:
    """Convert a number or numeric string to an exact rational.

    Floats go through their shortest ``repr`` so that ``0.4`` becomes ``2/5``
    rather than the binary expansion of the double nearest to it.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    if isinstance(x, Decimal):
        if not x.is_finite():
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(x)
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, str):
        text = x.strip()
        try:
            value = Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed number {x!r}") from exc
        return value
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def to_mpf(x):
    if isinstance(x, Fraction):
        with workprec():
            return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, Estimate):
        return to_mpf(x.value)
    return mpmath.mpf(x)


def render_rational(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def log_bigint(n: int):
    """Natural log of a positive integer of any size.

    The integer is split as ``m * 2**shift`` with a 64-bit-plus mantissa ``m``;
    the dropped low bits perturb the log by less than ``2**-63``, so the total
    error stays below ``2**-40`` at the default working precision.
    """
    if n <= 0:
        raise ValueError("log of a non-positive integer")
    shift = max(0, n.bit_length() - 72)
    m = n >> shift
    with workprec():
        return mpmath.log(m) + shift * mpmath.ln2


def log2_floor(x: Fraction) -> int:
    """Largest integer e with 2**e <= x, for positive rational x."""
    if x <= 0:
        raise ValueError("log2 of a non-positive number")
    num, den = x.numerator, x.denominator
    e = num.bit_length() - den.bit_length()
    # adjust by at most one in either direction
    if e >= 0:
        if num < den << e:
            e -= 1
    else:
        if num << -e < den:
            e -= 1
    return e


def log_grid(lo: float, hi: float, count: int) -> list[float]:
    """``count`` points spaced evenly in log scale between ``lo`` and ``hi``."""
    if count < 1 or lo <= 0 or hi < lo:
        raise ValueError(f"bad grid lo={lo} hi={hi} count={count}")
    if count == 1:
        return [float(lo)]
    a, b = math.log(lo), math.log(hi)
    pts = [math.exp(a + (b - a) * i / (count - 1)) for i in range(count)]
    pts[0], pts[-1] = float(lo), float(hi)
    return pts
