"""Catalytic submajorization for finite spectra.

``B`` is catalysable into ``A`` when ``B ⊗ C ≺≺ A ⊗ C`` for some nonzero
``C``.  A necessary condition is power-trace monotonicity,
``Tr(B**p) <= Tr(A**p)`` for all ``p > 1``; :func:`pm_check` samples it on a
grid.  :func:`find_catalyst` is a bounded search whose successes are always
re-verified exactly, so a returned certificate is a proof while "not found"
proves nothing.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from ._numeric import Estimate, log_grid, render_rational, to_fraction, to_mpf, workprec
from .spectra import Spectrum, lp_norm, power_sum, rearrange, tensor

DEFAULT_P_GRID = dict(lo=1 + 1e-4, hi=64.0, count=64)
INTEGER_POWERS = tuple(range(2, 9))


def default_p_grid() -> list[float]:
    return log_grid(**DEFAULT_P_GRID)


def _power(x, p) -> Estimate:
    if isinstance(x, Spectrum):
        return power_sum(x, p)
    return x.power_trace(p)


def _sup(x):
    if isinstance(x, Spectrum):
        return x.values[0] if x.values else Fraction(0)
    return x.mu_at(0)


def _total(x):
    if isinstance(x, Spectrum):
        return x.trace
    return x.trace()


@dataclass
class PMReport:
    """Power-trace comparison of ``b`` against ``a`` on a finite set of exponents.

    ``margins`` holds ``(p, Tr(a**p) - Tr(b**p), error)`` triples.  The verdict
    is ``"fail"`` only when some margin is below ``-error`` or an endpoint
    check fails, and ``"inconclusive"`` when a margin sits inside its error
    bar below zero.  A grid can miss violations between nodes.
    """

    grid: list
    margins: list
    sup_check: tuple  # (holds, sup a, sup b)
    total_check: tuple | None  # (holds, Tr a, Tr b); None if a trace diverges
    verdict: str
    failed_at: object = None
    exhaustive: bool = False

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def pm_check(a, b, grid=None, integer_powers=INTEGER_POWERS) -> PMReport:
    """Check ``Tr(b**p) <= Tr(a**p)`` on a p-grid, at integer p, and at both ends.

    ``a`` and ``b`` are :class:`Spectrum` or :class:`LazySpectrum` objects.
    The ``p -> inf`` end is ``mu(0, b) <= mu(0, a)`` and the ``p = 1`` end
    compares traces (skipped if one diverges).
    """
    grid = list(default_p_grid() if grid is None else grid)
    margins = []
    verdict, failed_at = "pass", None

    def record(p, margin, error):
        nonlocal verdict, failed_at
        margins.append((p, margin, error))
        if margin < -error:
            if verdict != "fail":
                verdict, failed_at = "fail", p
        elif margin < 0 and verdict == "pass":
            verdict, failed_at = "inconclusive", p

    for p in integer_powers:
        ea, eb = _power(a, p), _power(b, p)
        if ea.exact and eb.exact:
            record(p, ea.value - eb.value, Fraction(0))
        else:
            with workprec():
                record(p, to_mpf(ea.value) - to_mpf(eb.value), to_mpf(ea.error) + to_mpf(eb.error))
    for p in grid:
        ea, eb = _power(a, p), _power(b, p)
        with workprec():
            record(p, to_mpf(ea.value) - to_mpf(eb.value), to_mpf(ea.error) + to_mpf(eb.error))

    sa, sb = _sup(a), _sup(b)
    sup_ok = not (to_fraction_any(sb) > to_fraction_any(sa))
    if not sup_ok and verdict != "fail":
        verdict, failed_at = "fail", math.inf

    ta, tb = _total(a), _total(b)
    total_check = None
    if ta is not None and tb is not None:
        total_ok = not (to_fraction_any(tb) > to_fraction_any(ta))
        total_check = (total_ok, ta, tb)
        if not total_ok and verdict != "fail":
            verdict, failed_at = "fail", 1

    margins.sort(key=lambda t: float(t[0]))
    return PMReport(grid, margins, (sup_ok, sa, sb), total_check, verdict, failed_at)


def to_fraction_any(x) -> Fraction:
    from .asymptotics import mpf_to_fraction

    return mpf_to_fraction(x) if isinstance(x, mpmath.mpf) else to_fraction(x)


@dataclass
class StrictDominance:
    """Evidence that ``||b||_p < ||a||_p`` for all ``1 <= p <= inf``.

    Only ``p = 1``, ``p = inf`` and the grid nodes are examined, so a
    ``strict`` verdict is evidence rather than proof.
    """

    strict: bool
    min_margin: object
    min_at: object
    checks: list  # (p, ||a||_p - ||b||_p, error)
    label: str = "grid evidence"


def strict_lp_dominance(a: Spectrum, b: Spectrum, grid=None) -> StrictDominance:
    grid = list(default_p_grid() if grid is None else grid)
    checks = []
    checks.append((1, a.trace - b.trace, Fraction(0)))
    for p in sorted(set(grid) | set(float(q) for q in INTEGER_POWERS)):
        na, nb = lp_norm(a, p), lp_norm(b, p)
        with workprec():
            checks.append((p, to_mpf(na.value) - to_mpf(nb.value), to_mpf(na.error) + to_mpf(nb.error)))
    checks.append((math.inf, lp_norm(a, math.inf).value - lp_norm(b, math.inf).value, Fraction(0)))

    strict = all(m > e for _, m, e in checks)
    p_min, m_min, _ = min(checks, key=lambda t: to_fraction_any(t[1]) - to_fraction_any(t[2]))
    return StrictDominance(strict, m_min, p_min, checks)


@dataclass
class CatalysisCertificate:
    """Exact witness (or refutation) of ``b ⊗ c ≺≺ a ⊗ c``.

    ``slack[n] = partial_sum(a ⊗ c, n) - partial_sum(b ⊗ c, n)``; the
    certificate is valid exactly when every slack entry is nonnegative.
    """

    a: Spectrum
    b: Spectrum
    c: Spectrum
    slack: tuple
    valid: bool
    search_meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.c.trim())

    @property
    def first_violation(self) -> int | None:
        for n, s in enumerate(self.slack):
            if s < 0:
                return n
        return None

    def to_json(self) -> dict:
        return {
            "a": [render_rational(v) for v in self.a.values],
            "b": [render_rational(v) for v in self.b.values],
            "c": [render_rational(v) for v in self.c.values],
            "slack": [render_rational(v) for v in self.slack],
            "valid": self.valid,
            "search_meta": self.search_meta,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CatalysisCertificate":
        def spec(key):
            return Spectrum(tuple(to_fraction(v) for v in doc[key]))

        return cls(
            spec("a"),
            spec("b"),
            spec("c"),
            tuple(to_fraction(v) for v in doc["slack"]),
            bool(doc["valid"]),
            dict(doc.get("search_meta", {})),
        )


def verify_catalysis(a: Spectrum, b: Spectrum, c: Spectrum) -> CatalysisCertificate:
    if c.is_zero:
        raise ValueError("catalyst must be nonzero")
    ac, bc = tensor(a, c), tensor(b, c)
    slack, sa, sb = [], Fraction(0), Fraction(0)
    for n in range(max(len(ac), len(bc))):
        if n < len(ac):
            sa += ac.values[n]
        if n < len(bc):
            sb += bc.values[n]
        slack.append(sa - sb)
    return CatalysisCertificate(a, b, c, tuple(slack), all(s >= 0 for s in slack))


# ---------------------------------------------------------------------------
# catalyst search


class _Objective:
    """Worst prefix violation ``max_n [P_{b⊗c}(n) - P_{a⊗c}(n)]_+ / ||c||_1``.

    Works on integers: ``a`` and ``b`` share one denominator and ``c`` is an
    integer vector, so each evaluation is a sort of integer products.
    """

    def __init__(self, a: Spectrum, b: Spectrum):
        den = math.lcm(*(v.denominator for v in a.values + b.values)) if (a.values or b.values) else 1
        self.a = [int(v * den) for v in a.values if v]
        self.b = [int(v * den) for v in b.values if v]
        self.calls = 0

    def __call__(self, c: tuple[int, ...]) -> Fraction:
        self.calls += 1
        pa = sorted((x * y for x in self.a for y in c), reverse=True)
        pb = sorted((x * y for x in self.b for y in c), reverse=True)
        worst = sa = sb = 0
        for n in range(max(len(pa), len(pb))):
            if n < len(pa):
                sa += pa[n]
            if n < len(pb):
                sb += pb[n]
            if sb - sa > worst:
                worst = sb - sa
        return Fraction(worst, sum(c))


def _partitions(total: int, parts: int, largest: int | None = None):
    """Nonincreasing tuples of ``parts`` positive integers summing to ``total``."""
    if largest is None:
        largest = total
    if parts == 1:
        if 1 <= total <= largest:
            yield (total,)
        return
    for first in range(min(largest, total - parts + 1), 0, -1):
        if first * parts < total:
            break
        for rest in _partitions(total - first, parts - 1, first):
            yield (first,) + rest


def _grid_candidates(d: int):
    K = d
    while True:
        for part in _partitions(K, d):
            if math.gcd(*part) == 1:
                yield part
        K += 1


def _to_int_vector(c) -> tuple[int, ...]:
    den = math.lcm(*(v.denominator for v in c))
    ints = [int(v * den) for v in c]
    g = math.gcd(*ints)
    return tuple(sorted((x // g for x in ints), reverse=True))


@dataclass
class SearchOutcome:
    certificate: CatalysisCertificate | None
    meta: dict


def search_catalyst(
    a: Spectrum,
    b: Spectrum,
    max_dim: int = 6,
    budget: int = 20000,
    seed: int = 0,
    starts: int = 4,
    restarts: int = 4,
    min_step: Fraction = Fraction(1, 4096),
) -> SearchOutcome:
    """Search catalysts of dimension ``1..max_dim``; see :func:`find_catalyst`."""
    if max_dim < 1 or budget < 1:
        raise ValueError("max_dim and budget must be positive")
    rng = random.Random(seed)
    objective = _Objective(a, b)
    meta = {"seed": seed, "budget": budget, "max_dim": max_dim, "dimensions_tried": []}

    def found(c_int, d, phase):
        cert = verify_catalysis(a, b, Spectrum(tuple(Fraction(x, sum(c_int)) for x in c_int)))
        if not cert.valid:  # pragma: no cover - integer objective is exact
            raise AssertionError("objective and exact verification disagree")
        meta.update(evaluations=objective.calls, dimension=d, phase=phase)
        cert.search_meta = dict(meta)
        return SearchOutcome(cert, meta)

    for d in range(1, max_dim + 1):
        remaining = budget - objective.calls
        if remaining <= 0:
            break
        dim_budget = objective.calls + remaining // (max_dim - d + 1)
        grid_budget = objective.calls + max(1, (dim_budget - objective.calls) * 6 // 10)
        meta["dimensions_tried"].append(d)

        # coarse grid over the simplex, in order of increasing resolution
        best = []  # heap of (-v, order, c) keeping the `starts` best
        for order, c in enumerate(_grid_candidates(d)):
            if objective.calls >= grid_budget:
                break
            v = objective(c)
            if v == 0:
                return found(c, d, "grid")
            heapq.heappush(best, (-v, -order, c))
            if len(best) > starts:
                heapq.heappop(best)
            if d == 1:
                break
        seeds = [c for _, _, c in sorted(best, key=lambda t: (-t[0], -t[1]))]
        for _ in range(restarts if d > 1 else 0):
            seeds.append(tuple(sorted((rng.randint(1, 64) for _ in range(d)), reverse=True)))

        # coordinate descent with shrinking rational steps
        for start in seeds:
            if objective.calls >= dim_budget:
                break
            c = [Fraction(x, sum(start)) for x in start]
            v = objective(_to_int_vector(c))
            step = Fraction(1, 2 * sum(start))
            while step >= min_step and objective.calls < dim_budget:
                improved = False
                for i, sign in itertools.product(range(d), (1, -1)):
                    cand = list(c)
                    cand[i] += sign * step
                    if cand[i] <= 0:
                        continue
                    cv = _to_int_vector(cand)
                    w = objective(cv)
                    if w == 0:
                        return found(cv, d, "descent")
                    if w < v:
                        c, v, improved = cand, w, True
                    if objective.calls >= dim_budget:
                        break
                if not improved:
                    step /= 2

    meta.update(evaluations=objective.calls, dimension=None, phase="exhausted")
    return SearchOutcome(None, meta)


def find_catalyst(a: Spectrum, b: Spectrum, max_dim: int = 6, budget: int = 20000, seed: int = 0):
    """Look for ``c`` with ``b ⊗ c ≺≺ a ⊗ c``, trying dimensions ``1..max_dim``.

    Minimises the worst prefix violation of ``b ⊗ c`` over ``a ⊗ c`` on the
    simplex: first a rational grid of increasing resolution, then coordinate
    descent with halving rational steps from the best grid points and from a
    few seeded random starts.  ``budget`` caps the number of objective
    evaluations.  Returns a valid :class:`CatalysisCertificate` or ``None``;
    ``None`` is not a proof that no catalyst exists.
    """
    return search_catalyst(a, b, max_dim=max_dim, budget=budget, seed=seed).certificate


# ---------------------------------------------------------------------------
# trace-class approximation


class PMCheckFailed(ValueError):
    def __init__(self, report: PMReport):
        self.report = report
        super().__init__(f"power-trace monotonicity fails (at p={report.failed_at})")


@dataclass
class L1Approximation:
    """Result of the truncate-and-shrink construction.

    All spectra are normalised so that ``mu(0, a) = 1``; ``scale`` is the
    factor that was divided out.
    """

    n: int
    scale: Fraction
    eps: Fraction
    a_n: Spectrum
    b_scaled: Spectrum
    strict: StrictDominance
    certificate: CatalysisCertificate | None
    distance: object  # ||b - (1 - eps) b_n||_1
    distance_bound: object  # eps (||b||_1 + 1)
    status: str


def _head(x, n: int) -> list:
    if isinstance(x, Spectrum):
        return list(x.values[:n])
    return [x.mu_at(k) for k in range(n)]


def _tail_mass(x, n: int):
    if isinstance(x, Spectrum):
        return sum(x.values[n:], Fraction(0))
    return x.tail_mass(n)


def l1_approximate(
    a,
    b,
    eps,
    max_dim: int = 6,
    budget: int = 20000,
    seed: int = 0,
    grid=None,
    max_n: int = 1 << 16,
) -> L1Approximation:
    """Approximate ``b`` in trace norm by catalysable ``(1 - eps) b_n``.

    After normalising ``mu(0, a) = 1``, picks the least ``n`` with both tails
    ``sum_{k >= n} mu(k)`` below ``eps``, truncates both spectra to ``n``
    entries, shrinks ``b_n`` by ``1 - eps`` and searches for a catalyst of
    the pair.  The trace-norm distance to ``b`` is reported exactly together
    with the bound ``eps (||b||_1 + 1)``.
    """
    eps = to_fraction(eps)
    if not 0 < eps < 1:
        raise ValueError("eps must lie strictly between 0 and 1")
    report = pm_check(a, b, grid=grid)
    if report.verdict == "fail":
        raise PMCheckFailed(report)

    mu0 = to_fraction_any(_sup(a))
    if mu0 <= 0:
        raise ValueError("a must be nonzero")
    total_b = _total(b)
    if total_b is None or _total(a) is None:
        raise ValueError("both spectra must be trace class")
    total_b = to_fraction_any(total_b) / mu0

    n = 1
    while True:
        ta = to_fraction_any(_tail_mass(a, n)) / mu0
        tb = to_fraction_any(_tail_mass(b, n)) / mu0
        if ta < eps and tb < eps:
            break
        n += 1
        if n > max_n:
            raise ValueError(f"no truncation below {max_n} entries meets eps={eps}")

    a_n = rearrange(to_fraction_any(v) / mu0 for v in _head(a, n)).trim()
    b_n = rearrange(to_fraction_any(v) / mu0 for v in _head(b, n)).trim()
    b_scaled = b_n.scale(1 - eps)
    strict = strict_lp_dominance(a_n, b_scaled, grid=grid)
    outcome = search_catalyst(a_n, b_scaled, max_dim=max_dim, budget=budget, seed=seed)
    distance = eps * b_n.trace + tb
    bound = eps * (total_b + 1)
    status = "certified" if outcome.certificate else "catalyst not found within budget"
    return L1Approximation(
        n, mu0, eps, a_n, b_scaled, strict, outcome.certificate, distance, bound, status
    )
