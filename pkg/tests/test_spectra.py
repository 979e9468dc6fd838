import json
import math
from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catalens.spectra import (
    Spectrum,
    SpectrumFormatError,
    direct_sum,
    iter_tensor,
    lp_norm,
    parse_spectrum,
    partial_sum,
    power_sum,
    prefix_sums,
    rearrange,
    spectrum_to_csv,
    spectrum_to_json,
    submajorizes,
    tensor,
    tensor_materialized,
    weak_l1_quasinorm,
)

A = Spectrum((F(1, 2), F(1, 4), F(1, 4)))
B = Spectrum((F(2, 5), F(2, 5), F(1, 10), F(1, 10)))
C = Spectrum((F(3, 5), F(2, 5)))

values = st.fractions(min_value=0, max_value=1, max_denominator=24)
spectra = st.lists(values, min_size=1, max_size=8).map(rearrange)


def brute_submajorized(a, b):
    """b ≺≺ a by summing explicit prefixes after zero padding."""
    n = max(len(a), len(b))
    pa, pb = list(a.values) + [0] * n, list(b.values) + [0] * n
    return all(sum(pb[: k + 1]) <= sum(pa[: k + 1]) for k in range(n))


class TestSubmajorization:
    def test_example_pair_fails_at_one(self):
        res = submajorizes(A, B)
        assert not res
        assert res.index == 1
        assert res.excess == F(1, 20)

    def test_reflexive(self):
        assert submajorizes(A, A)

    def test_zero_padding(self):
        assert submajorizes(Spectrum((F(1),)), Spectrum((F(1, 2), F(1, 2))))
        assert not submajorizes(Spectrum((F(1, 2),)), Spectrum((F(1, 2), F(1, 2))))

    @given(spectra, spectra)
    def test_matches_brute_force(self, a, b):
        assert bool(submajorizes(a, b)) == brute_submajorized(a, b)

    @given(spectra, spectra, spectra)
    def test_transitive(self, a, b, c):
        if submajorizes(a, b) and submajorizes(b, c):
            assert submajorizes(a, c)


class TestTensor:
    def test_example_values(self):
        assert tensor(A, C).values == (
            F(3, 10), F(1, 5), F(3, 20), F(3, 20), F(1, 10), F(1, 10),
        )

    def test_length_prefix_and_overflow(self):
        assert tensor(A, C, 2).values == (F(3, 10), F(1, 5))
        with pytest.raises(ValueError):
            tensor(A, C, 7)

    def test_empty_factor(self):
        assert tensor(Spectrum(), A).values == ()

    @given(spectra, spectra)
    def test_heap_matches_full_sort(self, a, b):
        assert tensor(a, b) == tensor_materialized(a, b)

    @given(spectra, spectra, st.integers(0, 64))
    def test_prefix_agreement(self, a, b, k):
        k = min(k, len(a) * len(b))
        assert tensor(a, b, k).values == tensor_materialized(a, b).values[:k]

    @given(spectra, spectra)
    def test_trace_multiplicative(self, a, b):
        assert tensor(a, b).trace == a.trace * b.trace

    @given(spectra, spectra)
    def test_commutative(self, a, b):
        assert tensor(a, b) == tensor(b, a)

    @given(spectra, spectra, spectra)
    def test_monotone_in_majorization(self, a, b, c):
        if submajorizes(a, b):
            assert submajorizes(tensor(a, c), tensor(b, c))

    @given(spectra, spectra)
    def test_iterator_nonincreasing(self, a, b):
        out = list(iter_tensor(a, b))
        assert all(x >= y for x, y in zip(out, out[1:]))


class TestDirectSum:
    def test_example(self):
        assert direct_sum(A, C).values == (F(3, 5), F(1, 2), F(2, 5), F(1, 4), F(1, 4))

    @given(spectra, spectra, st.integers(1, 6))
    def test_power_sums_add(self, a, b, p):
        assert power_sum(direct_sum(a, b), p).value == power_sum(a, p).value + power_sum(b, p).value

    @given(spectra, spectra)
    def test_is_sorted_union(self, a, b):
        assert direct_sum(a, b) == rearrange(list(a) + list(b))


class TestNorms:
    def test_integer_power_exact(self):
        est = power_sum(A, 2)
        assert est.exact and est.value == F(3, 8)

    def test_fractional_power_bound(self):
        est = power_sum(A, 1.5)
        with mpmath.workprec(200):
            ref = mpmath.fsum((mpmath.mpf(v.numerator) / v.denominator) ** 1.5 for v in A)
            assert abs(est.value - ref) <= est.error

    def test_lp_endpoints(self):
        assert lp_norm(A, math.inf).value == F(1, 2)
        assert lp_norm(A, 1).value == 1
        assert abs(float(lp_norm(A, 2).value) - math.sqrt(3 / 8)) < 1e-15

    def test_rejects_small_power(self):
        with pytest.raises(ValueError):
            power_sum(A, 0.5)

    def test_weak_l1(self):
        assert weak_l1_quasinorm(A) == F(3, 4)
        assert weak_l1_quasinorm(Spectrum()) == 0

    @given(spectra, st.floats(1.01, 20))
    def test_lp_decreasing_in_p(self, a, p):
        # ||a||_q <= ||a||_p for q >= p, up to the reported error bars
        lo, hi = lp_norm(a, p), lp_norm(a, 2 * p)
        assert hi.value <= lo.value + lo.error + hi.error


class TestPartialSums:
    def test_inclusive(self):
        assert partial_sum(A, 0) == F(1, 2)
        assert partial_sum(A, 1) == F(3, 4)
        assert prefix_sums(A, 5) == [F(1, 2), F(3, 4), F(1), F(1), F(1)]

    def test_negative_index(self):
        with pytest.raises(ValueError):
            partial_sum(A, -1)


class TestSpectrumType:
    def test_validation(self):
        with pytest.raises(ValueError):
            Spectrum((F(1, 4), F(1, 2)))
        with pytest.raises(ValueError):
            Spectrum((F(-1),))

    def test_float_coercion_is_decimal(self):
        assert Spectrum((0.4,)).values == (F(2, 5),)

    def test_scale_trim_pad(self):
        s = Spectrum((F(1), F(0)))
        assert s.trim().values == (F(1),)
        assert s.pad(3).values == (F(1), F(0), F(0))
        assert A.scale(2).trace == 2
        with pytest.raises(ValueError):
            A.scale(-1)


class TestFormat:
    def test_parse_strings_and_numbers(self):
        s = parse_spectrum('{"type": "finite", "values": ["1/4", 0.5, "0.25"]}')
        assert s == A

    def test_type_defaults_to_finite(self):
        assert parse_spectrum({"values": [1]}) == Spectrum((F(1),))

    @pytest.mark.parametrize(
        "doc, position",
        [
            ({"values": [1, "x"]}, 1),
            ({"values": [1, -2]}, 1),
            ({"values": [True]}, 0),
            ({"values": ["nan"]}, 0),
        ],
    )
    def test_positional_errors(self, doc, position):
        with pytest.raises(SpectrumFormatError) as info:
            parse_spectrum(doc)
        assert info.value.position == position
        assert f"entry {position}" in str(info.value)

    @pytest.mark.parametrize("doc", ["[1, 2]", "{", {"type": "harmonic"}, {"values": 3}])
    def test_document_errors(self, doc):
        with pytest.raises(SpectrumFormatError):
            parse_spectrum(doc)

    @given(spectra)
    def test_round_trip(self, s):
        assert parse_spectrum(json.dumps(spectrum_to_json(s))) == s

    def test_csv(self):
        assert spectrum_to_csv(C) == "3/5\n2/5\n"
