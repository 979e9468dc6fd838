"""Acceptance suite: one class per criterion, each with its runtime budget.

The terminal summary prints one PASS/FAIL line per criterion (see conftest).
"""

import random
import time
from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catalens._numeric import to_mpf
from catalens.asymptotics import (
    DyadicB,
    Harmonic,
    dilation_sum_check,
    fubini_check,
    scale_gap,
    scale_gap_bound,
)
from catalens.catalysis import search_catalyst, verify_catalysis
from catalens.counterexample import (
    choose_alpha,
    default_s_grid,
    density_profile,
    lower_bound_sequence,
    lower_constant,
    pm_verification,
    profile,
    profile_high,
    profile_low,
    profile_quadrature,
    run_all,
    upper_bound_sweep,
)
from catalens.spectra import (
    Spectrum,
    direct_sum,
    power_sum,
    rearrange,
    submajorizes,
    tensor,
    tensor_materialized,
)

A = Spectrum((F(1, 2), F(1, 4), F(1, 4)))
B = Spectrum((F(2, 5), F(2, 5), F(1, 10), F(1, 10)))
C = Spectrum((F(3, 5), F(2, 5)))


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def b_members(limit):
    out, n = [], 0
    while 4**n < limit:
        out.extend(range(4**n, min(2 * 4**n, limit)))
        n += 1
    return out


@pytest.mark.criterion(1, "finite example: no submajorization, catalyst (0.6, 0.4) certifies")
class TestCriterion1:
    def test_exact_reproduction(self):
        with Timer() as t:
            plain = submajorizes(A, B)
            cert = verify_catalysis(A, B, C)
        assert not plain and plain.index == 1
        assert cert.valid
        assert cert.slack[3] == 0
        assert all(isinstance(s, F) for s in cert.slack)
        assert t.elapsed < 0.1


@pytest.mark.criterion(2, "lower bound: x at N_n matches the closed form and climbs to 2/(3 log 2)")
class TestCriterion2:
    def test_sequence(self):
        with Timer() as t:
            rows = lower_bound_sequence(8)
        assert t.elapsed < 1.0
        limit = lower_constant()
        with mpmath.workprec(128):
            ln2 = mpmath.ln2
            for r in rows:
                E = 2 ** (2 * r.n + 1)
                assert isinstance(r.numerator, F)
                assert r.numerator == F(2 * E - 1, 3)
                assert isinstance(r.N, int)
                # x = numerator / log(N + 2), the big-int log checked independently
                assert abs(r.x - to_mpf(r.numerator) / mpmath.log(r.N + 2)) < 1e-20
                closed = 2 / (3 * ln2) - 1 / (3 * E * ln2)
                corrected = r.x * mpmath.log(r.N + 2) / (E * ln2)
                assert abs(corrected - closed) <= 1e-9
        xs = [r.x for r in rows]
        assert all(x < y for x, y in zip(xs, xs[1:]))
        assert all(x < limit for x in xs)
        assert limit - rows[5].x <= 4e-3
        assert abs(float(limit) - 0.961797) < 1e-6

    def test_indices_against_enumeration(self):
        # N_n counts the singular values above 2^-(2^(2n+1)), i.e. whole blocks below E
        for r in lower_bound_sequence(8):
            E = 2 ** (2 * r.n + 1)
            assert r.N == sum(1 << m for m in b_members(E))
            assert r.N.bit_length() == E


@pytest.mark.criterion(3, "upper bound: s Tr(B^(1+s)) <= 0.85 on the default grid, s = 1 value")
class TestCriterion3:
    def test_sweep(self):
        with Timer() as t:
            sw = upper_bound_sweep(default_s_grid())
        assert t.elapsed < 5.0
        grid = default_s_grid()
        assert grid[0] == 2.0**-30 and grid[-1] == 1.0
        assert all(v + e <= 0.85 for _, v, e in sw.points)
        assert sw.max_value <= 0.85

    def test_s_equals_one(self):
        sw = upper_bound_sweep([1.0])
        _, value, err = sw.points[0]
        oracle = sum(F(1, 2**m) for m in b_members(400))  # sum over blocks of 2^m 2^(-2m)
        assert abs(float(value) - float(oracle)) <= 1e-12 + float(err)
        assert abs(float(value) - 0.617218) <= 1e-6


@pytest.mark.criterion(4, "density profile: 5/18 at 12/5, continuity at 2, quadrature, discrete ratio")
class TestCriterion4:
    def test_profile(self):
        with Timer() as t:
            d = density_profile(resolution=64, m_power=10)
            quad = {tt: profile_quadrature(float(tt)) for tt in (F(1), F(2), F(12, 5), F(4))}
        assert t.elapsed < 30.0
        assert profile(F(12, 5)) == F(5, 18)
        assert profile_low(2) == profile_high(2) == F(4, 15)
        assert d.maximizer == F(12, 5) and d.maximum == F(5, 18)
        assert d.quadrature_error <= 1e-8
        for tt, q in quad.items():
            assert abs(q - float(profile(tt))) <= 1e-8
        assert d.discrete_max <= 5 / 18 + 1e-3
        near = [v for n, v in d.near_attainment.items() if n >= 2]
        assert near and max(abs(v - 5 / 18) for v in near) <= 1e-2


def truncated_lhs(x, r, terms):
    total, prefix, double = F(0), F(0), F(0)
    for m in range(terms):
        prefix += x[m] if m < len(x) else 0
        double += prefix
        total += double * r**m
    return total


@pytest.mark.criterion(5, "summation identity: exact at s = 1, 2 and to 1e-10 for real s")
class TestCriterion5:
    def test_identity(self):
        rng = random.Random(20241015)
        with Timer() as t:
            for _ in range(200):
                x = [rng.randint(-9, 9) for _ in range(rng.randint(1, 16))]
                for s in (1, 2):
                    chk = dilation_sum_check(x, s)
                    assert isinstance(chk.lhs, F) and chk.lhs == chk.rhs
                s = rng.uniform(0, 2) or 1.0
                chk = dilation_sum_check(x, s)
                scale = max(abs(chk.rhs), abs(chk.lhs), mpmath.mpf(1e-300))
                assert abs(chk.discrepancy) <= 1e-10 * scale
        assert t.elapsed < 5.0

    def test_left_side_against_truncation(self):
        rng = random.Random(7)
        for _ in range(20):
            x = [rng.randint(-9, 9) for _ in range(rng.randint(1, 16))]
            chk = dilation_sum_check(x, 1)
            assert abs(chk.lhs - truncated_lhs(x, F(1, 2), 400)) < F(1, 2**300)


@pytest.mark.criterion(6, "counterexample: delta >= 1e-3, PM margins nonnegative, Dixmier gap >= 0.05")
class TestCriterion6:
    def test_end_to_end(self):
        with Timer() as t:
            res = run_all()
        assert t.elapsed < 30.0
        p = res.params
        assert abs(float(p.alpha) - float(choose_alpha())) == 0
        assert p.delta >= 1e-3
        assert all(r.certified for r in p.delta_table if r.s <= p.delta)
        # both regimes, every grid point, every margin above its error bar
        branches = {r.branch for r in res.pm.rows}
        assert branches == {"traces-A-B", "interpolation"}
        for row in res.pm.rows:
            for margin, err in row.margins.values():
                assert margin >= err
        # every Dixmier trace of A equals alpha; compare x_{N_n}(B) with it
        for g in res.gap.rows:
            if g.n >= 2:
                assert g.gap >= 0.05, (g.n, g.gap)
        assert res.gap.witnessed_from is not None and res.gap.witnessed_from <= 2
        assert res.ok

    def test_pm_on_dense_grid(self):
        res = run_all()
        dense = pm_verification(res.params, [2.0**-k for k in range(0, 31)] + [1.5, 3.0, 20.0, 60.0])
        assert dense.ok


@pytest.mark.criterion(7, "Fubini check for A0 ⊗ (0.6, 0.4): weak-l1 bound exact, x_N near 1")
class TestCriterion7:
    def test_fubini(self):
        c = Spectrum((F(3, 5), F(2, 5)))
        with Timer() as t:
            rep = fubini_check(c, n_max=2**20, check_max=2**18)
        assert t.elapsed < 30.0
        assert rep.checked == 2**18
        assert rep.bound_holds and rep.sup_weighted <= 1
        assert isinstance(rep.sup_weighted, F)
        N, x, _ = rep.samples[-1]
        assert N == 2**20
        assert abs(x - 1) <= 0.05

    def test_against_materialised_tensor(self):
        c = Spectrum((F(3, 5), F(2, 5)))
        rows = 2**12
        a0 = Spectrum(tuple(F(1, i + 1) for i in range(rows)))
        direct = tensor(a0, c, rows)
        rep = fubini_check(c, n_max=rows - 1, check_max=rows)
        assert rep.sup_weighted == max((k + 1) * v for k, v in enumerate(direct.values))
        with mpmath.workprec(96):
            for N, x, _ in rep.samples:
                ps = sum(direct.values[: N + 1], F(0))
                assert abs(x - to_mpf(ps) / mpmath.log(N + 2)) < 1e-20


def submajorized_partner(a, rng):
    """A spectrum b with b ≺≺ a: a shrunk average of permutations of a."""
    vals = list(a.values)
    weights = [F(rng.randint(1, 5)) for _ in range(3)]
    total = sum(weights)
    mix = [F(0)] * len(vals)
    for w in weights:
        perm = vals[:]
        rng.shuffle(perm)
        mix = [m + w / total * v for m, v in zip(mix, perm)]
    lam = F(rng.randint(0, 10), 10)
    return rearrange(lam * v for v in mix)


fractions = st.fractions(min_value=0, max_value=1, max_denominator=30)
spectra = st.lists(fractions, min_size=1, max_size=7).map(rearrange)


@pytest.mark.criterion(8, "property suites over >= 200 random instances each")
class TestCriterion8:
    def test_tensor_monotonicity(self):
        seen = []

        @settings(max_examples=200)
        @given(spectra, spectra, st.integers(0, 2**32))
        def prop(a, c, seed):
            b = submajorized_partner(a, random.Random(seed))
            assert submajorizes(a, b)
            assert submajorizes(tensor(a, c), tensor(b, c))
            seen.append(1)

        with Timer() as t:
            prop()
        assert len(seen) >= 200 and t.elapsed < 15

    def test_trace_multiplicativity(self):
        seen = []

        @settings(max_examples=200)
        @given(spectra, spectra, st.integers(1, 5))
        def prop(a, b, p):
            assert tensor(a, b).trace == a.trace * b.trace
            assert power_sum(tensor(a, b), p).value == power_sum(a, p).value * power_sum(b, p).value
            seen.append(1)

        prop()
        assert len(seen) >= 200

    def test_direct_sum_additivity(self):
        seen = []

        @settings(max_examples=200)
        @given(spectra, spectra, st.integers(1, 5))
        def prop(a, b, p):
            d = direct_sum(a, b)
            assert d.trace == a.trace + b.trace
            assert power_sum(d, p).value == power_sum(a, p).value + power_sum(b, p).value
            seen.append(1)

        prop()
        assert len(seen) >= 200

    def test_lazy_tensor_prefix(self):
        seen = []

        @settings(max_examples=200)
        @given(spectra, spectra, st.integers(0, 49))
        def prop(a, b, k):
            k = min(k, len(a) * len(b))
            assert tensor(a, b, k).values == tensor_materialized(a, b).values[:k]
            seen.append(1)

        prop()
        assert len(seen) >= 200

    def test_scale_stability(self):
        seen = []

        @settings(max_examples=200)
        @given(st.integers(20, 4096), st.integers(0, 2**64), st.sampled_from([2, 3]))
        def prop(bits, low, k):
            N = (1 << bits) + low
            h = scale_gap(Harmonic(), N, k)
            b = scale_gap(DyadicB(), N, k)
            assert h <= scale_gap_bound(1, N, k)
            assert b <= scale_gap_bound(2, N, k)
            seen.append(1)

        with Timer() as t:
            prop()
        assert len(seen) >= 200 and t.elapsed < 30
        # the bound itself goes to zero
        assert scale_gap_bound(2, 2**4096, 2) < 1e-3
        assert scale_gap(Harmonic(), 2**20, 2) < 1e-2


@pytest.mark.criterion(9, "catalyst search: finite example found in dimension <= 2, obstructed pair not found")
class TestCriterion9:
    def test_search(self):
        flat = Spectrum((F(1, 2), F(1, 2)))
        peaked = Spectrum((F(9, 10), F(1, 10)))
        with Timer() as t:
            found = search_catalyst(A, B, seed=0)
            missed = search_catalyst(flat, peaked, max_dim=6, seed=0)
        assert t.elapsed < 60.0
        cert = found.certificate
        assert cert is not None and cert.valid and cert.dimension <= 2
        assert verify_catalysis(A, B, cert.c).valid
        assert missed.certificate is None
        assert missed.meta["dimensions_tried"] == [1, 2, 3, 4, 5, 6]
        # fixed seed, identical outcome
        again = search_catalyst(A, B, seed=0)
        assert again.certificate == cert and again.meta == found.meta
        assert search_catalyst(flat, peaked, max_dim=6, seed=0).meta == missed.meta


if __name__ == "__main__":
    import subprocess
    import sys

    sys.exit(subprocess.call([sys.executable, "-m", "pytest", __file__, "-v"]))
