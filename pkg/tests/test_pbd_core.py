from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import brute_force_pmf, brute_force_pmf_exact, prob_vectors
from pbdcover.errors import InvalidParameter
from pbdcover.pbd_core import (
    Pmf,
    SignedMeasure,
    as_probs,
    canonicalize,
    complement,
    coupling_bound,
    exact_power_sums,
    l1_distance,
    pbd_pmf,
    power_sums,
    raw_moment,
    split_power_sums,
    to_fraction,
    tvd,
)


class TestParsing:
    def test_to_fraction_forms(self):
        assert to_fraction("3/8") == Fraction(3, 8)
        assert to_fraction([3, 8]) == Fraction(3, 8)
        assert to_fraction(0.5) == Fraction(1, 2)
        assert to_fraction(1) == 1

    def test_to_fraction_rejects_garbage(self):
        with pytest.raises(InvalidParameter):
            to_fraction("half")

    @pytest.mark.parametrize("bad", [[-0.1], [1.5], [float("nan")], ["2"]])
    def test_out_of_range_rejected(self, bad):
        with pytest.raises(InvalidParameter):
            as_probs(bad)
        with pytest.raises(InvalidParameter):
            canonicalize(bad)

    def test_canonicalize_sorts_by_value(self):
        assert canonicalize([0.5, "1/4", 0]) == (0, "1/4", 0.5)


class TestPmf:
    def test_single_indicator(self):
        np.testing.assert_allclose(pbd_pmf([0.3]).mass, [0.7, 0.3])

    def test_two_indicators_by_hand(self):
        # (0.1, 0.3): P[0]=0.63, P[1]=0.34, P[2]=0.03
        np.testing.assert_allclose(pbd_pmf([0.1, 0.3]).mass, [0.63, 0.34, 0.03], atol=1e-15)

    def test_empty_vector_is_point_mass(self):
        np.testing.assert_array_equal(pbd_pmf([]).mass, [1.0])

    @given(prob_vectors)
    def test_matches_enumeration(self, p):
        np.testing.assert_allclose(pbd_pmf(p).mass, brute_force_pmf(p), atol=1e-12)

    def test_matches_exact_enumeration(self):
        p = [Fraction(1, 3), Fraction(2, 7), Fraction(5, 6), Fraction(1, 2)]
        exact = [float(x) for x in brute_force_pmf_exact(p)]
        np.testing.assert_allclose(pbd_pmf(p).mass, exact, rtol=1e-14)

    @given(prob_vectors, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, p, r):
        q = list(p)
        r.shuffle(q)
        np.testing.assert_allclose(pbd_pmf(p).mass, pbd_pmf(q).mass, atol=1e-12)

    def test_pmf_validation(self):
        with pytest.raises(InvalidParameter):
            Pmf(np.array([0.5, 0.6]))
        with pytest.raises(InvalidParameter):
            Pmf(np.array([1.5, -0.5]))
        assert Pmf(np.array([0.5, 0.4]), tail=0.1).support_max == 1

    def test_getitem_outside_window(self):
        pmf = Pmf(np.array([0.5, 0.5]), offset=3)
        assert pmf[3] == 0.5 and pmf[2] == 0.0 and pmf[5] == 0.0


class TestDistances:
    def test_identical_is_zero(self):
        assert tvd(pbd_pmf([0.2, 0.7]), pbd_pmf([0.7, 0.2])) == pytest.approx(0.0, abs=1e-15)

    def test_disjoint_supports(self):
        assert tvd(Pmf(np.array([1.0])), Pmf(np.array([1.0]), offset=5)) == 1.0

    def test_zero_padding(self):
        # Bernoulli(1/2) vs point mass at 0
        assert tvd(pbd_pmf([0.5]), pbd_pmf([])) == pytest.approx(0.5)

    def test_tail_counts_against(self):
        a = Pmf(np.array([0.9]), tail=0.1)
        b = Pmf(np.array([0.9, 0.1]))
        assert tvd(a, b) == pytest.approx(0.05 + 0.05)

    def test_tail_clamped(self):
        a = Pmf(np.array([0.1]), tail=0.9)
        b = Pmf(np.array([0.1, 0.9]))
        assert tvd(a, b) <= 1.0

    @given(prob_vectors, prob_vectors, prob_vectors)
    def test_metric_axioms(self, p, q, r):
        a, b, c = pbd_pmf(p), pbd_pmf(q), pbd_pmf(r)
        assert tvd(a, b) == pytest.approx(tvd(b, a), abs=1e-15)
        assert tvd(a, c) <= tvd(a, b) + tvd(b, c) + 1e-12
        assert 0 <= tvd(a, b) <= 1

    @given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=10))
    def test_coupling_dominates_tvd(self, pairs):
        p, q = [a for a, _ in pairs], [b for _, b in pairs]
        assert tvd(pbd_pmf(p), pbd_pmf(q)) <= coupling_bound(p, q) + 1e-12

    def test_coupling_length_mismatch(self):
        with pytest.raises(InvalidParameter):
            coupling_bound([0.1], [0.1, 0.2])

    def test_l1_distance_arrays(self):
        assert l1_distance(np.array([1.0, 0.0]), np.array([0.0, 0.0, 1.0])) == 2.0

    def test_signed_measure_norm(self):
        assert SignedMeasure(np.array([-1.0, 1.0])).l1_norm == 2.0


class TestMoments:
    def test_power_sums_by_hand(self):
        np.testing.assert_allclose(power_sums([0.5, 0.5], 3), [1.0, 0.5, 0.25])

    def test_power_sums_needs_positive_order(self):
        with pytest.raises(InvalidParameter):
            power_sums([0.1], 0)

    def test_exact_power_sums(self):
        assert exact_power_sums(["1/4", "1/4", 0], 2) == (Fraction(1, 2), Fraction(1, 8))

    def test_split(self):
        s = split_power_sums([Fraction(1, 2), Fraction(3, 4), 1, 0, Fraction(1, 4)], 2)
        assert s.low == (Fraction(3, 4), Fraction(5, 16))
        assert s.high == (Fraction(3, 4), Fraction(9, 16))
        assert (s.ones, s.zeros) == (1, 1)

    def test_split_empty_class_and_floats(self):
        s = split_power_sums([0.25, 1.0], 1)
        assert s.high == () and s.low == (0.25,) and isinstance(s.low[0], float)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.integers(1, 8))
    def test_raw_moment_matches_enumeration(self, p, ell):
        if ell > len(p):
            with pytest.raises(InvalidParameter):
                raw_moment(p, ell)
            return
        mass = brute_force_pmf(p)
        expected = sum(m**ell * w for m, w in enumerate(mass))
        assert raw_moment(p, ell) == pytest.approx(expected, rel=1e-10, abs=1e-12)

    def test_mean_is_sum(self):
        assert raw_moment([0.1, 0.2, 0.3], 1) == pytest.approx(0.6)

    def test_complement(self):
        assert complement([0.25, 1.0]) == (0.75, 0.0)
        assert complement(["1/4"]) == (Fraction(3, 4),)

    @given(prob_vectors)
    def test_complement_reflects_pmf(self, p):
        np.testing.assert_allclose(pbd_pmf(complement(p)).mass, pbd_pmf(p).mass[::-1], atol=1e-12)
