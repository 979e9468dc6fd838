import json
import math
from fractions import Fraction as F

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from catalens.asymptotics import Geometric, Harmonic
from catalens.catalysis import (
    CatalysisCertificate,
    PMCheckFailed,
    default_p_grid,
    find_catalyst,
    l1_approximate,
    pm_check,
    search_catalyst,
    strict_lp_dominance,
    verify_catalysis,
)
from catalens.spectra import Spectrum, power_sum, rearrange, tensor_materialized

A = Spectrum((F(1, 2), F(1, 4), F(1, 4)))
B = Spectrum((F(2, 5), F(2, 5), F(1, 10), F(1, 10)))
C = Spectrum((F(3, 5), F(2, 5)))
FLAT = Spectrum((F(1, 2), F(1, 2)))
PEAKED = Spectrum((F(9, 10), F(1, 10)))

values = st.fractions(min_value=0, max_value=1, max_denominator=12)
spectra = st.lists(values, min_size=1, max_size=5).map(rearrange)
nonzero = spectra.filter(lambda s: not s.is_zero)


def normalised(s):
    return s.scale(1 / s.trace)


def brute_slack(a, b, c):
    """Slack trail from fully materialised, fully sorted products."""
    ac, bc = tensor_materialized(a, c).values, tensor_materialized(b, c).values
    n = max(len(ac), len(bc))
    ac, bc = list(ac) + [0] * n, list(bc) + [0] * n
    return [sum(ac[: k + 1]) - sum(bc[: k + 1]) for k in range(n)]


class TestPMCheck:
    def test_example_pair_passes(self):
        rep = pm_check(A, B)
        assert rep.verdict == "pass" and rep.passed
        assert not rep.exhaustive
        assert len(rep.grid) == 64
        assert rep.total_check[0] and rep.sup_check[0]

    def test_identical_inputs(self):
        rep = pm_check(A, A)
        assert rep.verdict == "pass"
        assert all(m == 0 for _, m, _ in rep.margins)

    def test_sup_norm_failure(self):
        rep = pm_check(FLAT, PEAKED)
        assert rep.verdict == "fail"
        assert not rep.sup_check[0]

    def test_default_grid_range(self):
        g = default_p_grid()
        assert len(g) == 64
        assert abs(g[0] - (1 + 1e-4)) < 1e-15 and g[-1] == 64

    def test_lazy_inputs(self):
        rep = pm_check(Geometric(F(1, 2)), Geometric(F(1, 3)), grid=[1.5, 3.0])
        assert rep.verdict == "pass"
        assert rep.total_check == (True, F(2), F(3, 2))

    def test_divergent_trace_skips_total(self):
        rep = pm_check(Harmonic(), Geometric(F(1, 2), F(1, 2)), grid=[2.5], integer_powers=(2,))
        assert rep.total_check is None
        assert rep.verdict == "pass"

    @given(spectra, spectra)
    def test_fail_only_on_evidence(self, a, b):
        rep = pm_check(a, b, grid=[1.5, 2.5, 6.0], integer_powers=(2, 3))
        if rep.verdict == "fail":
            margin_fail = any(m < -e for _, m, e in rep.margins)
            total_fail = rep.total_check is not None and not rep.total_check[0]
            assert margin_fail or not rep.sup_check[0] or total_fail


class TestStrictDominance:
    def test_shrunk_example(self):
        res = strict_lp_dominance(A, B.scale(F(99, 100)))
        assert res.strict
        assert res.label == "grid evidence"

    def test_equal_inputs(self):
        assert not strict_lp_dominance(A, A).strict

    def test_equal_traces(self):
        res = strict_lp_dominance(Spectrum((F(1),)), FLAT)
        assert not res.strict
        assert res.min_at == 1 and res.min_margin == 0

    def test_checks_include_endpoints(self):
        ps = [p for p, _, _ in strict_lp_dominance(A, B).checks]
        assert ps[0] == 1 and ps[-1] == math.inf


class TestVerifyCatalysis:
    def test_example_certificate(self):
        cert = verify_catalysis(A, B, C)
        assert cert.valid
        assert cert.slack[3] == 0
        assert cert.slack == (
            F(3, 50), F(1, 50), F(1, 100), F(0), F(1, 25), F(2, 25), F(1, 25), F(0),
        )
        assert cert.first_violation is None and cert.dimension == 2

    def test_identity_catalyst(self):
        cert = verify_catalysis(A, A, Spectrum((F(1),)))
        assert cert.valid and all(s == 0 for s in cert.slack)

    def test_trivial_catalyst_fails(self):
        cert = verify_catalysis(A, B, Spectrum((F(1),)))
        assert not cert.valid
        assert cert.first_violation == 1

    def test_zero_catalyst_rejected(self):
        with pytest.raises(ValueError):
            verify_catalysis(A, B, Spectrum((F(0), F(0))))

    def test_json_round_trip(self):
        cert = verify_catalysis(A, B, C)
        back = CatalysisCertificate.from_json(json.loads(json.dumps(cert.to_json())))
        assert back == cert

    @settings(max_examples=200)
    @given(spectra, spectra, nonzero)
    def test_matches_brute_force(self, a, b, c):
        assume(len(a) * len(c) <= 10**4)
        cert = verify_catalysis(a, b, c)
        slack = brute_slack(a, b, c)
        assert list(cert.slack) == slack
        assert cert.valid == all(s >= 0 for s in slack)

    @given(spectra, spectra, nonzero, st.fractions(min_value=F(1, 100), max_value=100))
    def test_scaling_covariance(self, a, b, c, lam):
        assume(lam > 0)
        assert verify_catalysis(a, b, c).valid == verify_catalysis(a, b, c.scale(lam)).valid


class TestFindCatalyst:
    def test_example_pair(self):
        cert = find_catalyst(A, B)
        assert cert is not None and cert.valid
        assert cert.dimension <= 2
        assert verify_catalysis(A, B, cert.c).valid

    def test_identical_inputs(self):
        out = search_catalyst(A, A)
        assert out.certificate.c == Spectrum((F(1),))
        assert out.meta["evaluations"] == 1

    def test_sup_norm_obstruction(self):
        out = search_catalyst(FLAT, PEAKED, max_dim=6, budget=20000)
        assert out.certificate is None
        assert out.meta["dimensions_tried"] == [1, 2, 3, 4, 5, 6]
        assert out.meta["phase"] == "exhausted"

    def test_deterministic(self):
        x = search_catalyst(A, B, seed=7)
        y = search_catalyst(A, B, seed=7)
        assert x.meta == y.meta and x.certificate == y.certificate
        u = search_catalyst(FLAT, PEAKED, budget=3000, seed=3)
        v = search_catalyst(FLAT, PEAKED, budget=3000, seed=3)
        assert u.meta == v.meta

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            find_catalyst(A, B, max_dim=0)

    @settings(max_examples=60)
    @given(nonzero, nonzero)
    def test_catalysis_implies_pm(self, a, b):
        a, b = normalised(a), normalised(b)
        cert = find_catalyst(a, b, max_dim=3, budget=400)
        if cert is not None:
            assert cert.valid
            assert pm_check(a, b, grid=[1.25, 1.5, 2.5, 5.0, 12.0]).verdict == "pass"


class TestTruncation:
    @given(nonzero, st.integers(0, 5), st.sampled_from([1, 2, 3, 1.5, 2.75]))
    def test_power_sum_of_head(self, a, n, p):
        n = min(n, len(a))
        head = Spectrum(a.values[:n])
        tail = sum(a.values[n:], F(0))
        lhs = power_sum(head, p)
        rhs = power_sum(a, p)
        slack = float(lhs.error) + float(rhs.error)
        assert float(lhs.value) >= float(rhs.value) - float(tail) ** p - slack - 1e-12


class TestL1Approximate:
    def test_geometric_identity(self):
        g = Geometric(F(1, 2))
        res = l1_approximate(g, g, F(1, 10))
        assert res.status == "certified"
        assert res.certificate.c == Spectrum((F(1),))
        assert g.tail_mass(res.n) < F(1, 10)
        assert res.distance <= res.distance_bound == F(3, 10)

    def test_padded_example(self):
        tail = [F(1, 2**k) for k in range(10, 21)]
        a = rearrange(list(A.values) + tail)
        b = rearrange(list(B.values) + tail)
        res = l1_approximate(a, b, F(1, 100))
        assert res.status == "certified"
        assert res.certificate.dimension <= 2
        assert res.strict.strict
        assert res.scale == F(1, 2)
        assert res.distance <= res.distance_bound

    @pytest.mark.parametrize("eps", [0, 1, F(-1, 2)])
    def test_eps_range(self, eps):
        with pytest.raises(ValueError):
            l1_approximate(A, B, eps)

    def test_pm_failure(self):
        with pytest.raises(PMCheckFailed):
            l1_approximate(FLAT, PEAKED, F(1, 10))

    def test_not_found_status(self):
        res = l1_approximate(A, B, F(1, 100), max_dim=1, budget=5)
        assert res.status == "catalyst not found within budget"
        assert res.certificate is None
