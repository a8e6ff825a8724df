from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import grid_vectors
from pbdcover import cover
from pbdcover.cover import (
    BinomialForm,
    SparseForm,
    build_cover,
    cover_size_bound,
    d_of_eps,
    element_from_json,
    element_from_probs,
    enumerate_binomial_forms,
    k_of_eps,
    round_to_cover,
    round_with_trace,
    sparse_index,
    stage1_round,
    stage2_binomial,
    stage2_sparse,
    subinterval_bounds,
)
from pbdcover.errors import BudgetExceeded, InternalInconsistency, InvalidParameter
from pbdcover.harness import generate_family
from pbdcover.momentdp import profile_of
from pbdcover.pbd_core import pbd_pmf, tvd

F = Fraction


def _tvd(p, q):
    return tvd(pbd_pmf(p), pbd_pmf(q))


class TestParameters:
    def test_k_of_eps(self):
        assert k_of_eps(0.5) == 82
        assert k_of_eps(0.1) == 410
        assert k_of_eps(41) == 1
        with pytest.raises(InvalidParameter):
            k_of_eps(0)

    def test_d_of_eps(self):
        assert d_of_eps(0.1) == 18
        assert 26 * 18**0.25 * 2**-9 > 0.1 > 26 * 19**0.25 * 2**-9.5
        assert d_of_eps(26 * 2**0.25 / 2) == 1
        vals = [d_of_eps(e) for e in np.linspace(0.01, 1, 50)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


class TestStage1:
    def test_no_entry_near_extremes(self):
        assert stage1_round([0.5, 0.3], 10) == (F(1, 2), F(0.3))

    def test_low_side(self):
        assert stage1_round([0.05, 0.05], 10) == (F(1, 10), 0)

    def test_high_side(self):
        assert stage1_round([0.95, 0.95], 10) == (F(9, 10), 1)

    def test_lowest_indices_first(self):
        # masses 0.09 + 0.08 + 0.07 = 0.24 -> r = 2
        assert stage1_round([0.09, 0.5, 0.08, 0.07], 10) == (F(1, 10), F(1, 2), F(1, 10), 0)

    def test_k1_rounds_everything(self):
        assert stage1_round([0.4, 0.7, 0.2], 1) == (1, 0, 0)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.integers(2, 12))
    def test_postconditions(self, p, k):
        out = stage1_round(p, k)
        xs = [F(x) for x in p]
        inv = F(1, k)
        low = [i for i, x in enumerate(xs) if 0 < x < inv]
        high = [i for i, x in enumerate(xs) if 1 - inv < x < 1]
        assert not any(0 < y < inv or 1 - inv < y < 1 for y in out)
        for i, (x, y) in enumerate(zip(xs, out)):
            if i not in low and i not in high:
                assert x == y
        assert abs(sum(xs[i] for i in low) - sum(out[i] for i in low)) <= inv
        assert abs(sum(xs[i] for i in high) - sum(out[i] for i in high)) <= inv
        assert _tvd(p, out) <= 7 / k + 1e-10


class TestStage2Sparse:
    def test_subintervals_tile(self):
        for k in range(2, 9):
            lo, _ = subinterval_bounds(k, 1)
            assert lo == F(1, k)
            for j in range(1, k):
                a, b = subinterval_bounds(k, j)
                assert b - a == F(j, k * k)
                assert (a * k * k).denominator == 1
                if j < k - 1:
                    assert subinterval_bounds(k, j + 1)[0] == b
            assert subinterval_bounds(k, k - 1)[1] > F(1, 2)

    def test_grid_input_unchanged(self):
        form = stage2_sparse([F(6, 16), F(6, 16)], 4)
        assert form.small_num == (6, 6)

    def test_hand_example_k3(self):
        # both in [3/9, 4/9); r = floor((3/4 - 2/3) * 9) = 0, residual 3/4 - 1/3 = 5/12 -> 4/9
        tr = round_with_trace([F(35, 100), F(4, 10)], k=3)
        (step,) = tr.steps
        assert (step.j, step.r, step.i_star) == (1, 0, 0)
        assert step.after_mean_step == (F(5, 12), F(1, 3))
        assert sum(step.after_mean_step) == F(3, 4)
        assert tr.stage2 == (F(4, 9), F(1, 3))

    def test_third_of_k3(self):
        form = stage2_sparse([F(1, 3), F(1, 3)], 3)
        assert form.small_probs == (F(1, 3), F(1, 3))

    def test_only_extremes(self):
        form = stage2_sparse([0, 1, 1], 3)
        assert (form.ell, form.ones, form.zeros) == (0, 2, 1)

    def test_high_side_by_complement(self):
        tr = round_with_trace([F(65, 100), F(6, 10)], k=3)
        assert tr.stage2 == tuple(1 - x for x in (F(4, 9), F(1, 3)))

    def test_wrong_branch(self):
        with pytest.raises(InvalidParameter):
            stage2_sparse([0.5] * 9, 2)

    def test_rejects_stage1_violations(self):
        with pytest.raises(InvalidParameter):
            stage2_sparse([0.05], 10)

    @given(st.integers(2, 8), st.data())
    def test_mean_preserved_and_grid(self, k, data):
        n = data.draw(st.integers(1, min(k**3, 25)))
        p = data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
        tr = round_with_trace(p, k=k)
        assert tr.branch == "sparse"
        for step in tr.steps:
            assert sum(step.after_mean_step) == sum(step.before)
            assert all(step.p_min <= v <= step.p_max for v in step.after_mean_step)
            assert all((v * k * k).denominator == 1 for v in step.after)
        assert _tvd(tr.stage1, tr.stage2) <= 34 / k + 1e-10


class TestStage2Binomial:
    def test_half_homogeneous(self):
        form, der = stage2_binomial([F(1, 2)] * 9, 2)
        # m' = ceil(4.5^2 / 2.25) = 9, ell* = ceil(9 * 4.5 / 9) = 5
        assert (der.m_prime, der.ell_star, der.q) == (9, 5, F(5, 9))
        assert (form.ell, form.q_num) == (9, 5)
        assert der.natural and form.meets_constraints()

    def test_single_value(self):
        v = F(3, 10)
        form, der = stage2_binomial([v] * 1001, 10)
        assert der.m_prime == 1001
        assert der.q == F(301, 1001)
        assert der.q >= v

    def test_with_ones(self):
        # m = 9 copies of 1/2 and t = 2: mu = 6.5, m' = ceil(42.25 / 4.25) = 10, ell* = ceil(11 * 6.5 / 10) = 8
        form, der = stage2_binomial([F(1, 2)] * 9 + [1, 1], 2)
        assert (der.t, der.m_prime, der.ell_star) == (2, 10, 8)
        assert der.mu == F(13, 2) and der.mu_prime == F(80, 11)
        assert der.sigma2 == F(9, 4) and der.sigma2_prime == F(240, 121)
        assert all(s >= 0 for s in der.slacks().values())

    def test_wrong_branch(self):
        with pytest.raises(InvalidParameter):
            stage2_binomial([0.5] * 8, 2)

    def test_threshold_override_limits(self):
        with pytest.raises(InvalidParameter):
            round_with_trace([0.5], k=2, threshold=9)
        tr = round_with_trace([0.5, 0.5], k=2, threshold=1)
        assert tr.branch == "binomial" and not tr.derivation.natural

    def test_failed_inequality_is_internal_error(self):
        der = cover.BinomialDerivation(10, 2, 9, 0, 11, 5, F(1, 2), F(5), F(5), F(2), F(2), False)
        with pytest.raises(InternalInconsistency):
            der.check()

    @given(st.integers(2, 6), st.data())
    def test_forced_branch_bound(self, k, data):
        n = data.draw(st.integers(1, 30))
        p = data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
        tr = round_with_trace(p, k=k, threshold=0)
        if tr.branch == "binomial":
            assert _tvd(tr.stage1, tr.stage2) <= 9 / k + 1e-10

    def test_natural_branch_at_k10(self):
        rng = np.random.default_rng(3)
        p = 0.1 + 0.8 * rng.random(1500)
        tr = round_with_trace(p, k=10)
        assert tr.branch == "binomial" and tr.derivation.natural
        assert tr.element.meets_constraints()
        assert _tvd(tr.stage1, tr.stage2) <= 9 / 10
        assert _tvd(p, tr.element.expand()) <= 41 / 10


class TestForms:
    def test_sparse_invariants(self):
        with pytest.raises(InvalidParameter):
            SparseForm(3, 2, (4,), 1, 1)
        with pytest.raises(InvalidParameter):
            SparseForm(3, 2, (1,), 1, 0)
        with pytest.raises(InvalidParameter):
            SparseForm(9, 1, (), 0, 8)
        with pytest.raises(InvalidParameter):
            SparseForm(9, 2, (1,) * 9, 0, 0)
        assert SparseForm(3, 2, (3, 1), 1, 0).small_num == (1, 3)

    def test_binomial_invariants(self):
        with pytest.raises(InvalidParameter):
            BinomialForm(4, 1, 0, 1)
        with pytest.raises(InvalidParameter):
            BinomialForm(4, 1, 1, 5)
        assert BinomialForm(4, 1, 2, 2).q == F(1, 2)

    def test_json_round_trip(self):
        for e in (SparseForm(5, 3, (2, 7), 2, 1), BinomialForm(30, 2, 20, 12)):
            assert element_from_json(e.to_json()) == e
            assert all(isinstance(v, (int, str, list)) for v in e.to_json().values())

    def test_json_rejects_bad_denominator(self):
        with pytest.raises(InvalidParameter):
            element_from_json({"form": "sparse", "n": 1, "k": 2, "den": 5, "small_num": [1], "ones": 0, "zeros": 0})
        with pytest.raises(InvalidParameter):
            element_from_json({"form": "poisson"})
        with pytest.raises(InvalidParameter):
            element_from_json({"form": "binomial", "n": 3})

    def test_from_probs(self):
        assert element_from_probs([F(1, 2), 1, 0], 2) == SparseForm(3, 2, (2,), 1, 1)
        assert element_from_probs([F(2, 5)] * 3 + [0, 0], 2) == BinomialForm(5, 2, 3, 2)
        with pytest.raises(InvalidParameter):
            element_from_probs([F(1, 3), F(1, 7)], 2)


class TestRoundToCover:
    def test_fixed_point_on_sparse_form(self):
        p = [F(2, 4), F(2, 4), 0, 1]
        assert round_to_cover(p, k=2) == SparseForm(4, 2, (2, 2), 1, 1)

    def test_homogeneous_large_n(self):
        elem = round_to_cover([0.5] * 12, k=2)
        assert isinstance(elem, BinomialForm) and elem.q == F(1, 2)

    def test_tiny_mass_vanishes(self):
        elem = round_to_cover([0.01, 0.02, 0.03], k=10)
        assert elem == SparseForm(3, 10, (), 0, 3)

    def test_eps_path(self):
        assert round_with_trace([0.3], eps=41 / 5).k == 5
        with pytest.raises(InvalidParameter):
            round_to_cover([0.3])

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.integers(2, 6))
    def test_end_to_end(self, p, k):
        tr = round_with_trace(p, k=k)
        assert tr.branch == ("sparse" if sum(1 for x in tr.stage1 if 0 < x < 1) <= k**3 else "binomial")
        assert isinstance(tr.element, SparseForm if tr.branch == "sparse" else BinomialForm)
        assert _tvd(p, tr.element.expand()) <= 41 / k + 1e-10

    @pytest.mark.parametrize("k", [8, 10, 35, 41, 50])
    def test_bounds_below_one(self, k):
        # at these k the stage bounds are informative (< 1)
        rng = np.random.default_rng(k)
        for trial in range(40):
            fam = ("uniform", "extremes", "bimodal", "homogeneous")[trial % 4]
            p = generate_family(fam, int(rng.integers(1, 31)), trial, k)
            tr = round_with_trace(p, k=k)
            assert _tvd(p, tr.stage1) <= 7 / k + 1e-10
            if tr.branch == "sparse":
                assert _tvd(tr.stage1, tr.stage2) <= 34 / k + 1e-10
            assert _tvd(p, tr.element.expand()) <= 41 / k + 1e-10

    @given(grid_vectors())
    def test_idempotent(self, kp):
        k, p = kp
        if k < 2 or stage1_round(p, k) != tuple(p):
            return
        small = [x * k * k for x in p if 0 < x < 1]
        if len(small) > k**3:
            return
        elem = element_from_probs(p, k, form="sparse")
        assert round_to_cover(elem.expand(), k=k) == elem


class TestBinomialForms:
    def test_empty_when_k2_exceeds_n(self):
        assert list(enumerate_binomial_forms(3, 2)) == []

    def test_k1_exhaustive(self):
        forms = list(enumerate_binomial_forms(4, 1))
        expected = {(ell, j) for ell in range(1, 5) for j in range(1, 5) if F(ell * j, 4) >= 1}
        assert {(f.ell, f.q_num) for f in forms} == expected
        assert len(forms) == 11

    @pytest.mark.parametrize("n,k", [(10, 2), (25, 3), (40, 2)])
    def test_matches_direct_rational_check(self, n, k):
        got = {(f.ell, f.q_num) for f in enumerate_binomial_forms(n, k)}
        want = {(ell, j) for ell in range(1, n + 1) for j in range(1, n + 1)
                if ell * F(j, n) >= k * k and ell * F(j, n) * (1 - F(j, n)) >= k * k - k - 1}
        assert got == want and len(got) <= n * n


class TestBuildCover:
    def test_budget_zero_refused(self):
        with pytest.raises(BudgetExceeded) as info:
            build_cover(6, budget=0, k=2, d=2)
        assert info.value.estimate > 0

    def test_single_parameter(self):
        elems = build_cover(1, k=1, d=1)
        assert [e.expand() for e in elems] == [(0,), (1,)]
        for x in np.linspace(0, 1, 101):
            assert min(_tvd([x], e.expand()) for e in elems) <= 41 + 1e-12

    def test_single_parameter_k2(self):
        elems = build_cover(1, k=2, d=1)
        assert [e.expand() for e in elems] == [(0,), (F(1, 4),), (F(1, 2),), (F(3, 4),), (1,)]

    def test_sorted_and_deduplicated(self):
        elems = build_cover(6, k=2, d=2)
        keys = [e.expand() for e in elems]
        assert keys == sorted(set(keys))
        assert len(elems) <= cover_size_bound(6, 2, 2)

    def test_eps_defaults(self):
        with pytest.raises(InvalidParameter):
            build_cover(2, k=2)
        with pytest.raises(BudgetExceeded):
            build_cover(2, eps=0.5)

    @pytest.mark.parametrize("n,k,d", [(3, 2, 1), (4, 2, 2), (3, 3, 1), (5, 2, 3)])
    def test_every_sparse_profile_found(self, n, k, d):
        # direct enumeration of all k-sparse vectors of length n
        den = k * k
        want = set()
        for combo in combinations_with_replacement(range(den + 1), n):
            if sum(1 for v in combo if 0 < v < den) <= k**3:
                want.add(profile_of([F(v, den) for v in combo], d, k))
        index = sparse_index(build_cover(n, k=k, d=d), d)
        assert set(index) == want
        for prof, elem in index.items():
            assert profile_of(elem.expand(), d, k) == prof
