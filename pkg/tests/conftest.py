"""Shared oracles and hypothesis strategies.

The oracles here deliberately avoid the library's own algorithms: the PBD
mass function is enumerated over all 2^n outcomes, power sums and elementary
symmetric polynomials are summed over subsets, and Binomial derivatives are
taken symbolically on exact polynomials.
"""

from fractions import Fraction
from itertools import combinations, product
from math import comb, factorial, prod

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def brute_force_pmf(p):
    """Mass function of sum of Bernoulli(p_i), enumerating every outcome."""
    n = len(p)
    mass = np.zeros(n + 1)
    for bits in product((0, 1), repeat=n):
        w = 1.0
        for b, x in zip(bits, p):
            w *= float(x) if b else 1.0 - float(x)
        mass[sum(bits)] += w
    return mass


def brute_force_pmf_exact(p):
    n = len(p)
    mass = [Fraction(0)] * (n + 1)
    for bits in product((0, 1), repeat=n):
        w = Fraction(1)
        for b, x in zip(bits, p):
            w *= x if b else 1 - x
        mass[sum(bits)] += w
    return mass


def subset_esp(values, ell):
    """Elementary symmetric polynomial of degree ell by summing over subsets."""
    return sum(prod(values[i] for i in s) for s in combinations(range(len(values)), ell))


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def symbolic_delta(n, c, ell, m):
    """(n-ell)!/n! * d^ell/dp^ell [C(n,m) p^m (1-p)^(n-m)] at p = c, exactly."""
    poly = [Fraction(comb(n, m))]
    for _ in range(m):
        poly = _poly_mul(poly, [Fraction(0), Fraction(1)])
    for _ in range(n - m):
        poly = _poly_mul(poly, [Fraction(1), Fraction(-1)])
    for _ in range(ell):
        poly = [i * poly[i] for i in range(1, len(poly))]
    value = sum((a * c**i for i, a in enumerate(poly)), Fraction(0))
    return Fraction(factorial(n - ell), factorial(n)) * value


def tvd_arrays(a, b):
    n = max(len(a), len(b))
    a = np.pad(np.asarray(a, float), (0, n - len(a)))
    b = np.pad(np.asarray(b, float), (0, n - len(b)))
    return 0.5 * float(np.abs(a - b).sum())


probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
prob_vectors = st.lists(probs, min_size=1, max_size=12)
half_vectors = st.lists(st.floats(min_value=0.0, max_value=0.5, allow_nan=False), min_size=1, max_size=12)


@st.composite
def grid_vectors(draw, k=None, min_size=1, max_size=8):
    k = draw(st.integers(1, 5)) if k is None else k
    nums = draw(st.lists(st.integers(0, k * k), min_size=min_size, max_size=max_size))
    return k, tuple(Fraction(v, k * k) for v in nums)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
