"""Rounding a PBD onto a small cover, and building that cover at test scale.

Rounding runs in two stages.  Stage 1 removes every parameter within 1/k of
0 or 1 while keeping the mass of each side within 1/k.  Stage 2 either snaps
the surviving non-extreme parameters onto the 1/k^2 grid (when there are at
most k^3 of them), or replaces the whole vector by a Binomial with success
probability on the 1/n grid.  All of this is exact rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

from .errors import BudgetExceeded, InternalInconsistency, InvalidParameter
from .momentdp import (
    DEFAULT_STATE_BUDGET,
    MomentProfile,
    MomentSystem,
    enumerate_profiles,
    profile_count_bound,
    profile_enumeration_estimate,
    profile_of,
    solve_moment_system,
)
from .pbd_core import ProbLike, exact_probs, to_fraction

DEFAULT_COVER_BUDGET = 10_000_000


def _positive_exact(eps) -> Fraction:
    e = Fraction(str(eps)) if isinstance(eps, float) else to_fraction(eps)
    if e <= 0:
        raise InvalidParameter(f"eps must be > 0, got {eps}")
    return e


def k_of_eps(eps: float) -> int:
    """ceil(41 / eps), with eps read as the decimal it prints as."""
    return math.ceil(41 / _positive_exact(eps))


def stage_total_bound(k: int) -> float:
    return 41 / k


def d_of_eps(eps: float) -> int:
    """Smallest d >= 1 with 26 (d+1)^(1/4) 2^(-(d+1)/2) <= eps."""
    e = float(_positive_exact(eps))
    d = 1
    while 26.0 * (d + 1) ** 0.25 * 2.0 ** (-(d + 1) / 2) > e:
        d += 1
    return d


# --- cover elements ---------------------------------------------------------


@dataclass(frozen=True)
class SparseForm:
    """At most k^3 parameters on {1/k^2, ..., (k^2-1)/k^2}; the rest are 0 or 1.

    ``small_num`` holds the grid parameters as sorted numerators over k^2.
    """

    n: int
    k: int
    small_num: tuple[int, ...]
    ones: int
    zeros: int

    def __post_init__(self):
        object.__setattr__(self, "small_num", tuple(sorted(int(v) for v in self.small_num)))
        den = self.k * self.k
        if self.k < 1:
            raise InvalidParameter("k must be >= 1")
        if any(not 0 < v < den for v in self.small_num):
            raise InvalidParameter(f"sparse parameters must be numerators in 1..{den - 1}")
        if self.ell > self.k**3:
            raise InvalidParameter(f"{self.ell} grid parameters exceed k^3 = {self.k ** 3}")
        if self.ones < 0 or self.zeros < 0 or self.ell + self.ones + self.zeros != self.n:
            raise InvalidParameter("ell + ones + zeros must equal n")

    form = "sparse"

    @property
    def ell(self) -> int:
        return len(self.small_num)

    @property
    def small_probs(self) -> tuple[Fraction, ...]:
        den = self.k * self.k
        return tuple(Fraction(v, den) for v in self.small_num)

    def expand(self) -> tuple[Fraction, ...]:
        return (Fraction(0),) * self.zeros + self.small_probs + (Fraction(1),) * self.ones

    def to_json(self) -> dict:
        return {"form": "sparse", "n": self.n, "k": self.k, "den": self.k * self.k,
                "small_num": list(self.small_num), "ones": self.ones, "zeros": self.zeros}


@dataclass(frozen=True)
class BinomialForm:
    """ell parameters equal to q = q_num / n, the remaining n - ell equal to 0."""

    n: int
    k: int
    ell: int
    q_num: int

    def __post_init__(self):
        if self.k < 1 or not 1 <= self.ell <= self.n or not 1 <= self.q_num <= self.n:
            raise InvalidParameter("binomial form needs 1 <= ell <= n and q in {1/n, ..., 1}")

    form = "binomial"

    @property
    def q(self) -> Fraction:
        return Fraction(self.q_num, self.n)

    def meets_constraints(self) -> bool:
        """ell q >= k^2 and ell q (1 - q) >= k^2 - k - 1, checked in integers."""
        n, k = self.n, self.k
        lq = self.ell * self.q_num
        return lq >= k * k * n and lq * (n - self.q_num) >= (k * k - k - 1) * n * n

    def expand(self) -> tuple[Fraction, ...]:
        return (Fraction(0),) * (self.n - self.ell) + (self.q,) * self.ell

    def to_json(self) -> dict:
        return {"form": "binomial", "n": self.n, "k": self.k, "ell": self.ell,
                "q_num": self.q_num, "q_den": self.n}


CoverElement = Union[SparseForm, BinomialForm]


def element_from_json(obj: dict) -> CoverElement:
    try:
        form = obj["form"]
        if form == "sparse":
            k = int(obj["k"])
            if int(obj.get("den", k * k)) != k * k:
                raise InvalidParameter("sparse denominator must be k^2")
            return SparseForm(int(obj["n"]), k, tuple(int(v) for v in obj["small_num"]),
                              int(obj["ones"]), int(obj["zeros"]))
        if form == "binomial":
            n = int(obj["n"])
            if int(obj.get("q_den", n)) != n:
                raise InvalidParameter("binomial q denominator must be n")
            return BinomialForm(n, int(obj["k"]), int(obj["ell"]), int(obj["q_num"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParameter):
            raise
        raise InvalidParameter(f"malformed cover element: {exc}") from exc
    raise InvalidParameter(f"unknown form {obj.get('form')!r}")


def element_from_probs(p: Iterable[ProbLike], k: int, form: str | None = None) -> CoverElement:
    """Recognize an explicit vector as a cover element.

    Without ``form`` the sparse reading is tried first.
    """
    xs = sorted(exact_probs(p))
    n = len(xs)
    den = k * k
    if form in (None, "sparse"):
        small = [x * den for x in xs if 0 < x < 1]
        if all(v.denominator == 1 for v in small) and len(small) <= k**3:
            return SparseForm(n, k, tuple(int(v) for v in small),
                              sum(1 for x in xs if x == 1), sum(1 for x in xs if x == 0))
        if form == "sparse":
            raise InvalidParameter("vector is not in k-sparse form")
    nonzero = [x for x in xs if x != 0]
    if nonzero and len(set(nonzero)) == 1 and (nonzero[0] * n).denominator == 1:
        return BinomialForm(n, k, len(nonzero), int(nonzero[0] * n))
    raise InvalidParameter("vector is not a cover element at this k")


# --- stage 1 ----------------------------------------------------------------


def stage1_round(p: Iterable[ProbLike], k: int) -> tuple[Fraction, ...]:
    """Move parameters in (0, 1/k) to {0, 1/k} and those in (1 - 1/k, 1) to {1 - 1/k, 1}.

    On each side r = floor(k * side mass) of the affected parameters (lowest
    indices first) go to the inner value and the rest to the extreme.
    """
    if k < 1:
        raise InvalidParameter("k must be >= 1")
    xs = exact_probs(p)
    inv = Fraction(1, k)
    low = [i for i, x in enumerate(xs) if 0 < x < inv]
    high = [i for i, x in enumerate(xs) if 1 - inv < x < 1 and not 0 < x < inv]
    out = list(xs)
    r = math.floor(k * sum((xs[i] for i in low), Fraction(0)))
    for j, i in enumerate(low):
        out[i] = inv if j < r else Fraction(0)
    r = math.floor(k * sum((1 - xs[i] for i in high), Fraction(0)))
    for j, i in enumerate(high):
        out[i] = 1 - inv if j < r else Fraction(1)
    return tuple(out)


def _in_near_extremes(x: Fraction, k: int) -> bool:
    inv = Fraction(1, k)
    return 0 < x < inv or 1 - inv < x < 1


# --- stage 2, sparse branch -------------------------------------------------


@dataclass(frozen=True)
class SubintervalStep:
    """What the sparse branch did inside one subinterval.

    ``side`` is "low" for parameters <= 1/2 and "high" for the complemented
    ones.  Values are in the side's own coordinates (1 - p on the high side).
    """

    side: str
    j: int
    indices: tuple[int, ...]
    p_min: Fraction
    p_max: Fraction
    before: tuple[Fraction, ...]
    after_mean_step: tuple[Fraction, ...]
    after: tuple[Fraction, ...]
    r: int
    i_star: int | None
    kept: bool


def subinterval_bounds(k: int, j: int) -> tuple[Fraction, Fraction]:
    """[1/k + (j-1)j/(2k^2), 1/k + (j+1)j/(2k^2)): width j/k^2, j = 1..k-1."""
    base = Fraction(1, k)
    return base + Fraction((j - 1) * j, 2 * k * k), base + Fraction((j + 1) * j, 2 * k * k)


def _round_side(values: dict[int, Fraction], k: int, side: str) -> tuple[dict[int, Fraction], list[SubintervalStep]]:
    den = k * k
    out: dict[int, Fraction] = {}
    steps = []
    placed = set()
    for j in range(1, k):
        lo, hi = subinterval_bounds(k, j)
        idx = tuple(i for i in sorted(values) if lo <= values[i] < hi)
        if not idx:
            continue
        placed.update(idx)
        before = tuple(values[i] for i in idx)
        if all((v * den).denominator == 1 for v in before):
            # already on the grid: leave the subinterval alone
            for i in idx:
                out[i] = values[i]
            steps.append(SubintervalStep(side, j, idx, lo, hi, before, before, before, 0, None, True))
            continue
        nj = len(idx)
        total = sum(before, Fraction(0))
        width = Fraction(j, den)
        r = math.floor((total - nj * lo) / width)
        mid = [hi] * r + [total - (r * hi + (nj - r - 1) * lo)] + [lo] * (nj - r - 1)
        if sum(mid, Fraction(0)) != total:
            raise InternalInconsistency("subinterval mean not preserved")
        residual = mid[r]
        rounded = Fraction(math.floor(residual * den + Fraction(1, 2)), den)
        final = list(mid)
        final[r] = rounded
        for i, v in zip(idx, final):
            out[i] = v
        steps.append(SubintervalStep(side, j, idx, lo, hi, before, tuple(mid), tuple(final), r, idx[r], False))
    if placed != set(values):
        raise InternalInconsistency("a parameter fell outside every subinterval")
    return out, steps


def _stage2_sparse_vector(p_prime: Sequence[Fraction], k: int) -> tuple[tuple[Fraction, ...], list[SubintervalStep]]:
    half = Fraction(1, 2)
    low = {i: x for i, x in enumerate(p_prime) if 0 < x <= half}
    high = {i: 1 - x for i, x in enumerate(p_prime) if half < x < 1}
    q_low, steps_low = _round_side(low, k, "low")
    q_high, steps_high = _round_side(high, k, "high")
    out = list(p_prime)
    for i, v in q_low.items():
        out[i] = v
    for i, v in q_high.items():
        out[i] = 1 - v
    return tuple(out), steps_low + steps_high


def _check_stage1_output(xs: Sequence[Fraction], k: int):
    for i, x in enumerate(xs):
        if _in_near_extremes(x, k):
            raise InvalidParameter(f"p'[{i}] = {x} lies within 1/k of 0 or 1; run stage 1 first")


def _resolve_threshold(k: int, threshold: int | None) -> int:
    if threshold is None:
        return k**3
    if threshold < 0 or threshold > k**3:
        raise InvalidParameter(f"threshold must lie in 0..k^3 = {k ** 3}")
    return threshold


def _non_extreme(xs: Sequence[Fraction]) -> int:
    return sum(1 for x in xs if 0 < x < 1)


def stage2_sparse(p_prime: Iterable[ProbLike], k: int, threshold: int | None = None) -> SparseForm:
    xs = exact_probs(p_prime)
    _check_stage1_output(xs, k)
    m = _non_extreme(xs)
    if m > _resolve_threshold(k, threshold):
        raise InvalidParameter(f"{m} non-extreme parameters: use the binomial branch")
    q, _ = _stage2_sparse_vector(xs, k)
    return element_from_probs(q, k, form="sparse")


# --- stage 2, binomial branch -----------------------------------------------


@dataclass(frozen=True)
class BinomialDerivation:
    n: int
    k: int
    m: int
    t: int
    m_prime: int
    ell_star: int
    q: Fraction
    mu: Fraction
    mu_prime: Fraction
    sigma2: Fraction
    sigma2_prime: Fraction
    natural: bool

    def slacks(self) -> dict[str, Fraction]:
        """Each inequality the construction relies on, as (rhs - lhs) >= 0."""
        out = {
            "m_prime_le_n": Fraction(self.n - self.m_prime),
            "mean_sandwich_low": self.mu / self.m_prime - Fraction(self.ell_star - 1, self.n),
            "mean_sandwich_high": self.q - self.mu / self.m_prime,
            "mu_le_mu_prime": self.mu_prime - self.mu,
            "mu_prime_le_mu_plus_1": self.mu + 1 - self.mu_prime,
            "sigma2_minus_1_le": self.sigma2_prime - (self.sigma2 - 1),
            "le_sigma2_plus_2": self.sigma2 + 2 - self.sigma2_prime,
        }
        if self.natural:
            k = self.k
            out["mu_ge_k2"] = self.mu - k * k
            out["sigma2_ge"] = self.sigma2 - Fraction(k * k * (k - 1), k)
            out["form_mean"] = self.m_prime * self.q - k * k
            out["form_variance"] = self.m_prime * self.q * (1 - self.q) - (k * k - k - 1)
        return out

    def check(self):
        bad = {name: s for name, s in self.slacks().items() if s < 0}
        if bad:
            raise InternalInconsistency(f"binomial branch inequalities fail: {bad}")


def stage2_binomial(p_prime: Iterable[ProbLike], k: int,
                    threshold: int | None = None) -> tuple[BinomialForm, BinomialDerivation]:
    """Replace the vector by m' copies of q = ell*/n (rest 0) matching mean and variance."""
    xs = exact_probs(p_prime)
    _check_stage1_output(xs, k)
    n = len(xs)
    m = _non_extreme(xs)
    if m <= _resolve_threshold(k, threshold):
        raise InvalidParameter(f"only {m} non-extreme parameters: use the sparse branch")
    mids = [x for x in xs if 0 < x < 1]
    t = sum(1 for x in xs if x == 1)
    s1 = sum(mids, Fraction(0))
    s2 = sum((x * x for x in mids), Fraction(0))
    mu = s1 + t
    m_prime = math.ceil(mu * mu / (s2 + t))
    ell_star = max(1, math.ceil(n * mu / m_prime))
    q = Fraction(ell_star, n)
    deriv = BinomialDerivation(
        n=n, k=k, m=m, t=t, m_prime=m_prime, ell_star=ell_star, q=q,
        mu=mu, mu_prime=m_prime * q,
        sigma2=s1 - s2, sigma2_prime=m_prime * q * (1 - q),
        natural=m > k**3,
    )
    deriv.check()
    return BinomialForm(n, k, m_prime, ell_star), deriv


# --- full rounding ----------------------------------------------------------


@dataclass(frozen=True)
class RoundingTrace:
    k: int
    threshold: int
    original: tuple[Fraction, ...]
    stage1: tuple[Fraction, ...]
    branch: str
    stage2: tuple[Fraction, ...]
    element: CoverElement
    steps: tuple[SubintervalStep, ...] = ()
    derivation: BinomialDerivation | None = None


def _resolve_k(eps, k: int | None) -> int:
    if k is not None:
        if k < 1:
            raise InvalidParameter("k must be >= 1")
        return k
    if eps is None:
        raise InvalidParameter("give eps or an explicit k")
    return k_of_eps(eps)


def round_with_trace(p: Iterable[ProbLike], eps: float | None = None, k: int | None = None,
                     threshold: int | None = None) -> RoundingTrace:
    """Both rounding stages, keeping every intermediate vector."""
    k = _resolve_k(eps, k)
    thr = _resolve_threshold(k, threshold)
    xs = exact_probs(p)
    s1 = stage1_round(xs, k)
    if _non_extreme(s1) <= thr:
        s2, steps = _stage2_sparse_vector(s1, k)
        elem = element_from_probs(s2, k, form="sparse")
        return RoundingTrace(k, thr, xs, s1, "sparse", s2, elem, tuple(steps))
    elem, deriv = stage2_binomial(s1, k, thr)
    return RoundingTrace(k, thr, xs, s1, "binomial", elem.expand(), elem, derivation=deriv)


def round_to_cover(p: Iterable[ProbLike], eps: float | None = None, k: int | None = None,
                   threshold: int | None = None) -> CoverElement:
    return round_with_trace(p, eps, k, threshold).element


# --- cover assembly ---------------------------------------------------------


def enumerate_binomial_forms(n: int, k: int) -> Iterator[BinomialForm]:
    """Every (ell, q) in [1, n] x {1/n, ..., 1} meeting the binomial-form constraints."""
    if n < 1 or k < 1:
        raise InvalidParameter("need n, k >= 1")
    for ell in range(1, n + 1):
        for q_num in range(1, n + 1):
            form = BinomialForm(n, k, ell, q_num)
            if form.meets_constraints():
                yield form


def cover_size_bound(n: int, k: int, d: int) -> int:
    """n^2 binomial forms plus the counting bound on compatible moment profiles."""
    return n * n + profile_count_bound(n, k, d)


def cover_size_estimate(n: int, k: int, d: int) -> int:
    return n * n + profile_enumeration_estimate(n, k, d)


def _class_ranges(profile: MomentProfile, k: int, n_free: int) -> Iterator[tuple[int, int]]:
    """(|L|, |R|) pairs consistent with the first-order sums of ``profile``."""
    h = (k * k) // 2
    bmin, bmax = h + 1, k * k - 1
    s_low, s_high = profile.low_sums[0], profile.high_sums[0]
    cap = min(k**3, n_free)
    for L in range(cap + 1):
        if not (L <= s_low <= L * h) or (L == 0) != (s_low == 0):
            continue
        for R in range(cap - L + 1):
            if (R == 0) != (s_high == 0) or not (R * bmin <= s_high <= R * bmax):
                continue
            yield L, R


def sparse_form_for_profile(profile: MomentProfile, n: int, state_budget: int = DEFAULT_STATE_BUDGET,
                            tables: dict | None = None) -> SparseForm | None:
    """A k-sparse vector of length n with this moment profile, or None.

    Tries each admissible (|L|, |R|) and solves the moment system over the
    interior grid with no zeros or ones; the remaining parameters are set to 1
    (``profile.ones`` of them) and 0.
    """
    k, d = profile.k, profile.d
    if profile.ones > n:
        return None
    interior = tuple(range(1, k * k))
    for L, R in _class_ranges(profile, k, n - profile.ones):
        size = L + R
        sys = MomentSystem(size, d, k**3, k, (interior,) * size, profile.low_sums,
                           profile.high_sums, 0, 0, L, R)
        q = solve_moment_system(sys, budget=state_budget, tables=tables)
        if q is not None:
            zeros = n - profile.ones - size
            return SparseForm(n, k, tuple(int(x * k * k) for x in q), profile.ones, zeros)
    return None


def build_cover(n: int, eps: float | None = None, budget: int = DEFAULT_COVER_BUDGET, *,
                k: int | None = None, d: int | None = None,
                state_budget: int = DEFAULT_STATE_BUDGET) -> list[CoverElement]:
    """One sparse form per realizable moment profile, plus every binomial form.

    Elements with identical expansions are kept once (sparse preferred), and
    the result is sorted by expansion.  Refuses with BudgetExceeded when the
    enumeration estimate is above ``budget``.
    """
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    k = _resolve_k(eps, k)
    if d is None:
        if eps is None:
            raise InvalidParameter("give eps or an explicit d")
        d = d_of_eps(eps)
    if d < 1:
        raise InvalidParameter("d must be >= 1")
    estimate = cover_size_estimate(n, k, d)
    if estimate > budget:
        raise BudgetExceeded(f"cover enumeration estimate {estimate} exceeds budget {budget}", estimate, budget)
    tables: dict = {}
    chosen: dict[tuple, CoverElement] = {}
    for profile in enumerate_profiles(n, k, d, budget=budget):
        form = sparse_form_for_profile(profile, n, state_budget, tables)
        if form is not None:
            chosen.setdefault(form.expand(), form)
    for form in enumerate_binomial_forms(n, k):
        chosen.setdefault(form.expand(), form)
    out = [chosen[key] for key in sorted(chosen)]
    if len(out) > cover_size_bound(n, k, d):
        raise InternalInconsistency("cover is larger than its counting bound")
    return out


def sparse_index(cover: Iterable[CoverElement], d: int) -> dict[MomentProfile, SparseForm]:
    """Map moment profile -> sparse element, for the sparse part of a cover."""
    out = {}
    for elem in cover:
        if isinstance(elem, SparseForm):
            out.setdefault(profile_of(elem.expand(), d, elem.k), elem)
    return out


def is_represented(elem: CoverElement, cover: Iterable[CoverElement],
                   index: dict[MomentProfile, SparseForm], d: int) -> bool:
    """Whether elem, or a sparse element with its moment profile, is in the cover."""
    if isinstance(elem, SparseForm):
        return profile_of(elem.expand(), d, elem.k) in index
    return elem in cover
