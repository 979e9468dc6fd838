"""A weak-trace-class pair with power-trace monotonicity but no catalysis.

Take the dyadic operator ``B`` and ``A = alpha * A0 ⊕ ||B||_{1+delta} * p``
with ``A0`` harmonic and ``p`` a rank-one projection.  For
``5 / (9 log 2) < alpha < 2 / (3 log 2)``:

* ``Tr(B**(1+s)) <= Tr(A**(1+s))`` for every ``s > 0``: near zero because
  ``s Tr(B**(1+s))`` stays below ``5 / (9 log 2)`` while
  ``s Tr((alpha A0)**(1+s)) -> alpha``; for larger ``s`` by monotonicity of
  Schatten norms and the rank-one summand.
* the log-averages of ``B`` climb to ``2 / (3 log 2) > alpha`` along
  ``N_n``, whereas those of ``A`` tend to ``alpha``, so some Dixmier trace
  separates them and ``B`` is outside the closure of the catalysable set.

Everything here is a finite computation: sweeps over grids of ``s``, exact
big-integer indices ``N_n``, and exact rational identities for the density
profile that bounds ``limsup s Tr(B**(1+s))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from scipy import integrate

from ._numeric import Estimate, log_bigint, log_grid, to_mpf, workprec
from .asymptotics import (
    DirectSum,
    DyadicB,
    Finite,
    Harmonic,
    LazySpectrum,
    Scaled,
    dyadic_count,
    zeta_shifted,
)

# N_n is materialised as an exact integer while it has at most this many bits.
MATERIALIZE_BITS = 1 << 20


def upper_constant():
    """``5 / (9 log 2)``, the bound on ``limsup s Tr(B**(1+s))``."""
    with workprec():
        return mpmath.mpf(5) / (9 * mpmath.ln2)


def lower_constant():
    """``2 / (3 log 2)``, the limit of the log-averages of ``B`` along ``N_n``."""
    with workprec():
        return mpmath.mpf(2) / (3 * mpmath.ln2)


def default_s_grid(count: int = 241) -> list[float]:
    """Log-spaced ``s`` in ``[2**-30, 1]``, eight points per octave by default."""
    return log_grid(2.0**-30, 1.0, count)


# ---------------------------------------------------------------------------
# upper bound: s Tr(B^(1+s))


@dataclass
class SweepResult:
    points: list  # (s, s * Tr(B^(1+s)), error)
    max_value: object
    argmax: float
    bound: object  # 5 / (9 log 2)

    @property
    def margin(self):
        return self.bound - self.max_value


def scaled_trace_B(s) -> Estimate:
    """``s * Tr(B**(1+s))`` with error bound."""
    with workprec():
        s = to_mpf(s)
        est = DyadicB().power_trace(1 + s)
        return Estimate(s * to_mpf(est.value), s * to_mpf(est.error))


def upper_bound_sweep(s_grid=None) -> SweepResult:
    s_grid = sorted(default_s_grid() if s_grid is None else s_grid)
    if not s_grid or s_grid[0] <= 0:
        raise ValueError("s grid must be nonempty and positive")
    points = []
    for s in s_grid:
        est = scaled_trace_B(s)
        points.append((s, est.value, est.error))
    s_max, v_max, _ = max(points, key=lambda t: t[1])
    return SweepResult(points, v_max, s_max, upper_constant())


# ---------------------------------------------------------------------------
# lower bound: x_{N_n}(B)


@dataclass
class LowerBoundRow:
    n: int
    N: int | None  # exact N_n, None when too large to materialise
    N_bits: int
    numerator: Fraction  # mu(0) + ... + mu(N_n - 1) = (2/3) 2^(2n+1) - 1/3
    log_N: object  # log(N_n + 2)
    log_error: object
    x: object  # numerator / log(N_n + 2)
    x_exact_log: object  # numerator / log(2^(2^(2n+1)))
    closed_form: object  # (2/3)/log 2 - 1/(3 2^(2n+1) log 2)


def lower_bound_sequence(n_max: int = 8) -> list[LowerBoundRow]:
    """Log-averages of ``B`` at ``N_n = #{k : mu(k, B) > 2**-(2**(2n+1))}``.

    The first ``N_n`` singular values are the full blocks with
    ``m < 2**(2n+1)``, each of mass one, so their sum is
    ``card(I ∩ [0, 2**(2n+1)]) = (2/3) 2**(2n+1) - 1/3`` exactly.  Values are
    reported both with the ``log(N + 2)`` normaliser and with
    ``log(2**(2**(2n+1)))``; the latter equals the closed form identically.
    """
    if not 0 <= n_max <= 16:
        raise ValueError("n_max must lie in [0, 16]")
    rows = []
    with workprec():
        ln2 = mpmath.ln2
        for n in range(n_max + 1):
            E = 2 ** (2 * n + 1)
            numerator = Fraction(2, 3) * E - Fraction(1, 3)
            if E <= MATERIALIZE_BITS:
                N = dyadic_count(n)
                log_N = log_bigint(N + 2)
                log_err = mpmath.mpf(2) ** -60
            else:
                # N_n + 2 = 2^E (1 - eta) with 0 < eta < 2^(1 - 4^n)
                N = None
                log_N = E * ln2
                log_err = mpmath.mpf(2) ** (2 - 4**n)
            num = to_mpf(numerator)
            rows.append(
                LowerBoundRow(
                    n=n,
                    N=N,
                    N_bits=E,
                    numerator=numerator,
                    log_N=log_N,
                    log_error=log_err,
                    x=num / log_N,
                    x_exact_log=num / (E * ln2),
                    closed_form=mpmath.mpf(2) / (3 * ln2) - 1 / (3 * E * ln2),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# alpha, delta and the operator A


def choose_alpha(alpha=None):
    """Midpoint of ``(5/(9 log 2), 2/(3 log 2))`` unless ``alpha`` is given inside it."""
    lo, hi = upper_constant(), lower_constant()
    if alpha is None:
        with workprec():
            return (lo + hi) / 2
    a = to_mpf(alpha)
    if not lo < a < hi:
        raise ValueError(
            f"alpha={mpmath.nstr(a, 12)} outside ({mpmath.nstr(lo, 12)}, {mpmath.nstr(hi, 12)})"
        )
    return a


@dataclass
class DeltaRow:
    s: float
    harmonic_side: object  # alpha^(1+s) zeta(1+s)
    B_side: object  # Tr(B^(1+s))
    margin: object
    error: object

    @property
    def certified(self) -> bool:
        return self.margin > self.error


@dataclass
class DeltaResult:
    delta: float
    table: list
    label: str = "grid evidence: certified at grid points only"


def harmonic_side(alpha, s) -> Estimate:
    """``Tr((alpha A0)**(1+s)) = alpha**(1+s) zeta(1+s)``."""
    with workprec():
        s = to_mpf(s)
        z = zeta_shifted(s)
        f = mpmath.power(to_mpf(alpha), 1 + s)
        value = f * to_mpf(z.value)
        return Estimate(value, f * to_mpf(z.error) + abs(value) * mpmath.mpf(2) ** (8 - mpmath.mp.prec))


def find_delta(alpha, s_grid=None) -> DeltaResult:
    """Largest grid ``delta`` with ``Tr(B**(1+s)) <= alpha**(1+s) zeta(1+s)`` at every grid ``s <= delta``."""
    s_grid = sorted(default_s_grid() if s_grid is None else s_grid)
    table = []
    for s in s_grid:
        h = harmonic_side(alpha, s)
        with workprec():
            tb = DyadicB().power_trace(1 + to_mpf(s))
            table.append(
                DeltaRow(
                    s,
                    h.value,
                    tb.value,
                    h.value - to_mpf(tb.value),
                    to_mpf(h.error) + to_mpf(tb.error),
                )
            )
    # delta is the end of the certified initial run
    run = 0
    for row in table:
        if not row.certified:
            break
        run += 1
    if run == 0:
        raise RuntimeError(
            "no grid point certifies Tr(B^(1+s)) <= Tr((alpha A0)^(1+s)); "
            "the margin should be close to alpha - 0.80 > 0 for small s"
        )
    return DeltaResult(table[run - 1].s, table)


@dataclass
class CounterexampleParams:
    alpha: object
    delta: float
    norm_B: Estimate  # ||B||_{1+delta}
    rank_one: object  # coefficient of p in A: upper end of norm_B
    delta_table: list = field(default_factory=list)

    def __post_init__(self):
        lo, hi = upper_constant(), lower_constant()
        if not lo < to_mpf(self.alpha) < hi:
            raise ValueError("alpha outside the admissible bracket")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


def schatten_norm_B(p) -> Estimate:
    """``||B||_p = Tr(B**p)**(1/p)`` with error bound, ``p > 1``."""
    with workprec():
        p = to_mpf(p)
        tr = DyadicB().power_trace(p)
        v, e = to_mpf(tr.value), to_mpf(tr.error)
        value = mpmath.power(v, 1 / p)
        upper = mpmath.power(v + e, 1 / p)
        return Estimate(value, (upper - value) + abs(value) * mpmath.mpf(2) ** (8 - mpmath.mp.prec))


def make_params(alpha=None, s_grid=None) -> CounterexampleParams:
    alpha = choose_alpha(alpha)
    dres = find_delta(alpha, s_grid)
    nb = schatten_norm_B(1 + dres.delta)
    with workprec():
        rank_one = to_mpf(nb.value) + to_mpf(nb.error)
    return CounterexampleParams(alpha, dres.delta, nb, rank_one, dres.table)


def build_A(params: CounterexampleParams) -> LazySpectrum:
    """``alpha * A0 ⊕ c * p`` with ``c`` the upper end of ``||B||_{1+delta}``."""
    return DirectSum([Scaled(Harmonic(), params.alpha), Finite([params.rank_one])])


# ---------------------------------------------------------------------------
# PM verification


@dataclass
class PMRow:
    s: float
    branch: str  # "traces-A-B" (s <= delta) or "interpolation" (s > delta)
    margins: dict  # name -> (margin, error)

    @property
    def ok(self) -> bool:
        return all(m >= e for m, e in self.margins.values())


@dataclass
class PMVerification:
    rows: list
    delta: float
    label: str = "grid evidence: checked at grid points only"

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r.ok]


def default_pm_grid(delta: float) -> list[float]:
    pts = set(log_grid(2.0**-30, 64.0, 301))
    pts.update([delta / 2, delta, 2 * delta, 10.0])
    return sorted(pts)


def pm_verification(params: CounterexampleParams, s_grid=None) -> PMVerification:
    """Check ``Tr(B**(1+s)) <= Tr(A**(1+s))`` on a grid, by the argument for each regime.

    For ``s <= delta`` the harmonic part alone must dominate.  For ``s > delta``
    two steps are checked: ``Tr(B**(1+s)) <= ||B||_{1+delta}**(1+s)`` and
    ``||B||_{1+delta}**(1+s) <= Tr(A**(1+s))``.  Every margin must exceed its
    error bound; the direct margin ``Tr(A**(1+s)) - Tr(B**(1+s))`` is always
    recorded as well.
    """
    s_grid = sorted(default_pm_grid(params.delta) if s_grid is None else s_grid)
    A = build_A(params)
    rows = []
    for s in s_grid:
        with workprec():
            sm = to_mpf(s)
            tb = DyadicB().power_trace(1 + sm)
            ta = A.power_trace(1 + sm)
            tbv, tbe = to_mpf(tb.value), to_mpf(tb.error)
            margins = {"direct": (to_mpf(ta.value) - tbv, to_mpf(ta.error) + tbe)}
            if s <= params.delta:
                h = harmonic_side(params.alpha, sm)
                margins["traces-A-B"] = (h.value - tbv, to_mpf(h.error) + tbe)
                branch = "traces-A-B"
            else:
                # the rank-one coefficient is the rounded-up norm, so its power is a valid upper bound
                nb_pow = mpmath.power(to_mpf(params.rank_one), 1 + sm)
                rnd = nb_pow * mpmath.mpf(2) ** (8 - mpmath.mp.prec)
                margins["interpolation"] = (nb_pow - tbv, tbe + rnd)
                margins["rank-one"] = (to_mpf(ta.value) - nb_pow, to_mpf(ta.error) + rnd)
                branch = "interpolation"
        rows.append(PMRow(s, branch, margins))
    return PMVerification(rows, params.delta)


# ---------------------------------------------------------------------------
# Dixmier gap


@dataclass
class GapRow:
    n: int
    N_bits: int
    x_B: object  # x_{N_n}(B)
    x_A: object  # x_{N_n}(A) at the same index
    gap: object  # x_B - alpha, alpha being every Dixmier trace of A
    matched_gap: object  # x_B - x_A


@dataclass
class GapReport:
    alpha: object
    margin: float
    rows: list
    witnessed_from: int | None  # least n from which gap >= margin persists

    @property
    def witnessed(self) -> bool:
        return self.witnessed_from is not None


def _partial_A(A: DirectSum, row: LowerBoundRow):
    """Partial sum of ``A`` through index ``N_n``, also when ``N_n`` is only known by size."""
    if row.N is not None:
        return to_mpf(A.partial_sum(row.N))
    with workprec():
        N = mpmath.ldexp(1, row.N_bits)
        alpha = to_mpf(A.infinite[0].factor)
        c = to_mpf(A.finite.values[0])
        return max(alpha * mpmath.harmonic(N + 1), c + alpha * mpmath.harmonic(N))


def dixmier_gap_report(params: CounterexampleParams, n_max: int = 8, margin: float = 0.05) -> GapReport:
    """Compare ``x_{N_n}(B)`` with the Dixmier trace ``alpha`` of ``A``.

    ``x_N(A) -> alpha`` (the rank-one part drops out), so every Dixmier trace
    of ``A`` equals ``alpha``; ``gap = x_{N_n}(B) - alpha``.  The log-average
    of ``A`` at the same index is reported too; it approaches ``alpha`` only
    like ``1 / log N``.
    """
    A = build_A(params)
    alpha = to_mpf(params.alpha)
    rows = []
    for lb in lower_bound_sequence(n_max):
        with workprec():
            x_A = _partial_A(A, lb) / lb.log_N
            rows.append(GapRow(lb.n, lb.N_bits, lb.x, x_A, lb.x - alpha, lb.x - x_A))
    witnessed_from = None
    for row in rows:
        if row.gap >= margin:
            if witnessed_from is None:
                witnessed_from = row.n
        else:
            witnessed_from = None
    return GapReport(alpha, margin, rows, witnessed_from)


# ---------------------------------------------------------------------------
# density profile


def profile_low(t: Fraction) -> Fraction:
    """``F(t)`` on ``[1, 2]``."""
    t = Fraction(t)
    return Fraction(1, 2) - Fraction(2, 3) / t + Fraction(2, 5) / t**2


def profile_high(t: Fraction) -> Fraction:
    """``F(t)`` on ``[2, 4]``."""
    t = Fraction(t)
    return Fraction(4, 3) / t - Fraction(8, 5) / t**2


def profile(t: Fraction) -> Fraction:
    t = Fraction(t)
    if not 1 <= t <= 4:
        raise ValueError("profile is tabulated on [1, 4]")
    return profile_low(t) if t <= 2 else profile_high(t)


def profile_high_derivative(t: Fraction) -> Fraction:
    t = Fraction(t)
    return -Fraction(4, 3) / t**2 + Fraction(16, 5) / t**3


def profile_quadrature(t: float, depth: int = 60) -> float:
    """``(1/t**2) * integral_0^t z(u) (t - u) du`` by numerical quadrature.

    ``z`` is the indicator of ``union_{n in Z} [4**n, 2 * 4**n)``; pieces below
    ``4**-depth`` are dropped (their contribution is under ``t * 4**-depth``).
    """
    total = 0.0
    n_hi = math.floor(math.log(t, 4)) + 1
    for n in range(-depth, n_hi + 1):
        lo, hi = 4.0**n, min(2 * 4.0**n, t)
        if hi <= lo:
            continue
        val, _ = integrate.quad(lambda u: t - u, lo, hi, epsabs=0.0, epsrel=1e-12)
        total += val
    return total / t**2


def discrete_ratio(m_max: int) -> np.ndarray:
    """``R(m) = (1/(m+1)**2) sum_{k<=m} sum_{l<=k} chi_I(l)`` for ``0 <= m <= m_max``."""
    m = np.arange(m_max + 1, dtype=np.int64)
    chi = np.zeros(m_max + 1, dtype=np.int64)
    for n in range(0, 64):
        lo = 4**n
        if lo > m_max:
            break
        chi[lo : min(2 * lo, m_max + 1)] = 1
    double = np.cumsum(np.cumsum(chi))
    return double / (m + 1.0) ** 2


@dataclass
class DensityProfile:
    maximizer: Fraction
    maximum: Fraction
    at_two: tuple  # (low branch, high branch) at t = 2
    at_ends: tuple  # F(1), F(4)
    derivative_at_max: Fraction
    samples: list  # (t, F(t)) exact
    quadrature_error: float  # max |closed form - quadrature| over the samples
    discrete_max: float
    discrete_argmax: int
    near_attainment: dict  # n -> max R(m) for m near (12/5) 4^n

    @property
    def continuous(self) -> bool:
        return self.at_two[0] == self.at_two[1]

    @property
    def self_similar(self) -> bool:
        return self.at_ends[0] == self.at_ends[1]


def density_profile(resolution: int = 64, m_power: int = 10) -> DensityProfile:
    """Closed-form branches of ``F`` on ``[1, 4]`` checked exactly and by quadrature.

    Also samples the discrete ratio ``R(m)`` for ``m <= 4**m_power`` and
    records its maximum near ``m = (12/5) 4**n``, where the continuous
    profile peaks.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2 points per unit")
    t_star = Fraction(12, 5)
    samples = [(Fraction(1) + Fraction(k, resolution), None) for k in range(3 * resolution + 1)]
    samples = [(t, profile(t)) for t, _ in samples] + [(t_star, profile(t_star))]
    best_t, best = max(samples, key=lambda s: s[1])
    qerr = max(abs(float(v) - profile_quadrature(float(t))) for t, v in samples)

    m_max = 4**m_power
    R = discrete_ratio(m_max)
    near = {}
    for n in range(1, m_power + 1):
        centre = 12 * 4**n // 5
        lo, hi = int(centre * 0.9), min(m_max, int(centre * 1.1) + 1)
        if lo <= m_max:
            near[n] = float(R[lo : hi + 1].max())
    return DensityProfile(
        maximizer=best_t,
        maximum=best,
        at_two=(profile_low(2), profile_high(2)),
        at_ends=(profile(1), profile(4)),
        derivative_at_max=profile_high_derivative(t_star),
        samples=samples,
        quadrature_error=qerr,
        discrete_max=float(R.max()),
        discrete_argmax=int(R.argmax()),
        near_attainment=near,
    )


# ---------------------------------------------------------------------------
# everything at once


@dataclass
class RunAll:
    params: CounterexampleParams
    sweep: SweepResult
    lower: list
    pm: PMVerification
    gap: GapReport
    density: DensityProfile

    @property
    def ok(self) -> bool:
        return (
            self.sweep.max_value < to_mpf(self.params.alpha)
            and self.pm.ok
            and self.gap.witnessed
            and self.density.maximum == Fraction(5, 18)
        )


def run_all(alpha=None, s_grid=None, n_max: int = 8, margin: float = 0.05) -> RunAll:
    params = make_params(alpha, s_grid)
    sweep = upper_bound_sweep(s_grid)
    lower = lower_bound_sequence(n_max)
    pm = pm_verification(params)
    gap = dixmier_gap_report(params, n_max, margin)
    density = density_profile()
    return RunAll(params, sweep, lower, pm, gap, density)
