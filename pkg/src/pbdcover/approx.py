"""Approximations of a PBD by simpler laws, and their error bounds.

Covers the Poisson (Le Cam/Barbour-Hall type), Binomial (Ehm) and translated
Poisson (Roellin) approximations, the distance bounds between two Poissons and
between two translated Poissons, and Roos's expansion of a PBD in scaled
p-derivatives of a Binomial together with its truncation bound.

Bounds are returned unclamped: a value above 1 is vacuous but still reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import DegenerateInput, InvalidParameter
from .pbd_core import Pmf, ProbLike, SignedMeasure, as_probs, exact_probs, pbd_pmf, to_fraction, tvd

TAIL_TOL = 1e-12


# --- Poisson-type laws -----------------------------------------------------


def _poisson_window(lam: float, support_max: int | None, tol: float) -> tuple[np.ndarray, float]:
    if lam == 0:
        return np.array([1.0]), 0.0
    if support_max is None:
        support_max = int(math.ceil(lam + 10.0 * math.sqrt(lam) + 10))
        while stats.poisson.sf(support_max, lam) >= tol:
            support_max *= 2
    mass = stats.poisson.pmf(np.arange(support_max + 1), lam)
    tail = float(stats.poisson.sf(support_max, lam))
    return mass, tail


def poisson_pmf(lam: float, support_max: int | None = None, tol: float = TAIL_TOL) -> Pmf:
    """Poisson(lam) on 0..support_max; omitted mass is kept in ``tail``.

    Without ``support_max`` the window grows until the tail is below ``tol``.
    """
    if not lam >= 0:
        raise InvalidParameter(f"Poisson rate must be >= 0, got {lam}")
    mass, tail = _poisson_window(float(lam), support_max, tol)
    return Pmf(mass, 0, tail)


def binomial_pmf(n: int, p: float) -> Pmf:
    if n < 0 or not 0 <= p <= 1:
        raise InvalidParameter(f"bad binomial parameters n={n}, p={p}")
    return Pmf(stats.binom.pmf(np.arange(n + 1), n, p))


@dataclass(frozen=True)
class TranslatedPoissonParams:
    """TP(mu, sigma2): Poisson(sigma2 + frac(mu - sigma2)) shifted by floor(mu - sigma2)."""

    mu: float
    sigma2: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma2)):
            raise InvalidParameter("translated Poisson parameters must be finite")
        if not self.sigma2 > 0:
            raise InvalidParameter(f"sigma2 must be > 0, got {self.sigma2}")

    @property
    def shift(self) -> int:
        return math.floor(self.mu - self.sigma2)

    @property
    def rate(self) -> float:
        return self.sigma2 + (self.mu - self.sigma2 - self.shift)


def translated_poisson_pmf(tp: TranslatedPoissonParams, support_max: int | None = None,
                           tol: float = TAIL_TOL) -> Pmf:
    """PMF of TP(mu, sigma2); ``support_max`` is in the shifted coordinates."""
    window = None if support_max is None else max(support_max - tp.shift, 0)
    mass, tail = _poisson_window(tp.rate, window, tol)
    return Pmf(mass, tp.shift, tail)


# --- Bounds against a single PBD --------------------------------------------


def le_cam_bound(p: Iterable[ProbLike]) -> float:
    """``sum p_i^2 / sum p_i``: tvd bound for PBD(p) vs Poisson(sum p_i).

    The all-zero vector is exactly Poisson(0), so its bound is 0.
    """
    probs = as_probs(p)
    total = probs.sum()
    if total == 0:
        return 0.0
    return float(np.sum(probs**2) / total)


def ehm_bound(p: Iterable[ProbLike]) -> float:
    """Ehm's bound for PBD(p) vs Binomial(n, mean(p)).

    When the mean is 0 or 1 every indicator is deterministic and the PBD is
    that Binomial, so 0 is returned.
    """
    probs = as_probs(p)
    n = probs.size
    tbar = probs.mean()
    if tbar <= 0 or tbar >= 1:
        return 0.0
    return float(np.sum((probs - tbar) ** 2) / ((n + 1) * tbar * (1 - tbar)))


def rollin_bound(p: Iterable[ProbLike]) -> tuple[float, TranslatedPoissonParams]:
    """Roellin's bound for PBD(p) vs TP(mean, variance), plus those parameters."""
    probs = as_probs(p)
    var = float(np.sum(probs * (1 - probs)))
    if var <= 0:
        raise DegenerateInput("zero variance: every indicator is deterministic")
    numer = math.sqrt(float(np.sum(probs**3 * (1 - probs)))) + 2.0
    return numer / var, TranslatedPoissonParams(float(probs.sum()), var)


def poisson_tv_bound(lam1: float, lam2: float) -> float:
    """``sinh|lam1 - lam2|``, bounding tvd(Poisson(lam1), Poisson(lam2))."""
    if lam1 < 0 or lam2 < 0:
        raise InvalidParameter("Poisson rates must be >= 0")
    return math.sinh(abs(lam1 - lam2))


def tp_tv_bound(a: TranslatedPoissonParams, b: TranslatedPoissonParams) -> float:
    """Barbour-Lindvall bound on tvd(TP(a), TP(b)).

    The first argument of the bound must have the smaller floor(mu - sigma2).
    On a tie both labelings qualify and the smaller value is returned.
    """

    def one_way(x, y):
        return abs(x.mu - y.mu) / math.sqrt(x.sigma2) + (abs(x.sigma2 - y.sigma2) + 1) / x.sigma2

    if a.shift < b.shift:
        return one_way(a, b)
    if b.shift < a.shift:
        return one_way(b, a)
    return min(one_way(a, b), one_way(b, a))


def moment_matching_bound(d: int) -> float:
    """``13 (d+1)^(1/4) 2^(-(d+1)/2)``: tvd bound for PBDs on [0,1/2] agreeing in d power sums."""
    if d < 1:
        raise InvalidParameter("d must be >= 1")
    return 13.0 * (d + 1) ** 0.25 * 2.0 ** (-(d + 1) / 2)


# --- Roos expansion ---------------------------------------------------------


def roos_alpha(p: Sequence[ProbLike], p_center: float, ell: int) -> float:
    """Elementary symmetric polynomial of degree ``ell`` in ``p_i - p_center``."""
    probs = as_probs(p)
    if not 0 <= ell <= probs.size:
        raise InvalidParameter(f"ell={ell} outside 0..{probs.size}")
    e = np.zeros(ell + 1)
    e[0] = 1.0
    for x in probs - p_center:
        e[1:] = e[1:] + x * e[:-1]
    return float(e[ell])


def _check_center(p_center, ell: int):
    if not 0 <= p_center <= 1:
        raise InvalidParameter(f"p_center={p_center} outside [0, 1]")
    if ell >= 1 and p_center in (0, 1):
        raise InvalidParameter("derivative terms are only defined for p_center in (0, 1)")


def _common_denominator(values: Iterable[Fraction]) -> int:
    den = 1
    for v in values:
        den = math.lcm(den, v.denominator)
    return den


def _delta_numerators(n: int, c_num: int, den: int, ell: int) -> list[int]:
    """Integer numerators of delta^ell B_{n,c}(m), m = 0..n, over den**(n-ell).

    Uses delta^ell B_{n,c}(m) = sum_i C(ell,i) (-1)^(ell-i) B_{n-ell,c}(m-i),
    i.e. ell forward differences of the Binomial(n-ell, c) mass function.
    """
    r = n - ell
    c_pow = [1] * (r + 1)
    q_pow = [1] * (r + 1)
    for j in range(1, r + 1):
        c_pow[j] = c_pow[j - 1] * c_num
        q_pow[j] = q_pow[j - 1] * (den - c_num)
    vals = [math.comb(r, j) * c_pow[j] * q_pow[r - j] for j in range(r + 1)]
    for _ in range(ell):
        vals = [(vals[m - 1] if m >= 1 else 0) - (vals[m] if m < len(vals) else 0)
                for m in range(len(vals) + 1)]
    return vals


def roos_delta_term(n: int, p_center: ProbLike, ell: int) -> SignedMeasure:
    """Signed measure ``(n-ell)!/n! * d^ell/dp^ell B_{n,p}(m)`` at p = p_center."""
    if n < 0 or not 0 <= ell <= n:
        raise InvalidParameter(f"need 0 <= ell <= n, got ell={ell}, n={n}")
    c = to_fraction(p_center)
    _check_center(c, ell)
    nums = _delta_numerators(n, c.numerator, c.denominator, ell)
    scale = c.denominator ** (n - ell)
    return SignedMeasure(np.array([v / scale for v in nums]))


@dataclass(frozen=True, eq=False)
class RoosExpansion:
    """Coefficients and signed measures of the expansion of PBD(p) around p_center.

    ``alphas`` and ``terms`` are correctly rounded floats of exact rational
    values.  ``reconstruct`` sums the expansion in exact arithmetic before
    rounding, since the float products can reach 1e11 in magnitude and cancel.
    """

    n: int
    p_center: float
    alphas: np.ndarray
    terms: tuple[SignedMeasure, ...]
    _exact_pmf: tuple[Fraction, ...]

    def reconstruct(self) -> np.ndarray:
        return np.array([float(x) for x in self._exact_pmf])

    def reconstruct_float(self) -> np.ndarray:
        out = np.zeros(self.n + 1)
        for a, t in zip(self.alphas, self.terms):
            out += a * t.values
        return out


def roos_expand(p: Sequence[ProbLike], p_center: ProbLike) -> RoosExpansion:
    """Full expansion ``Pr[S=m] = sum_ell alpha_ell * delta^ell B_{n,c}(m)``."""
    xs = exact_probs(p)
    n = len(xs)
    c = to_fraction(p_center)
    _check_center(c, 1 if n >= 1 else 0)
    den = _common_denominator([c, *xs])
    c_num = c.numerator * (den // c.denominator)
    shifted = [x.numerator * (den // x.denominator) - c_num for x in xs]

    # e[ell] = ESP_ell(p_i - c) * den**ell, exactly
    e = [1] + [0] * n
    for j, x in enumerate(shifted, start=1):
        for ell in range(j, 0, -1):
            e[ell] += x * e[ell - 1]

    recon = [0] * (n + 1)
    terms = []
    for ell in range(n + 1):
        nums = _delta_numerators(n, c_num, den, ell)
        scale = den ** (n - ell)
        terms.append(SignedMeasure(np.array([v / scale for v in nums])))
        for m in range(n + 1):
            recon[m] += e[ell] * nums[m]
    total_den = den**n
    alphas = np.array([e[ell] / den**ell for ell in range(n + 1)])
    exact = tuple(Fraction(v, total_den) for v in recon)
    return RoosExpansion(n, float(c), alphas, tuple(terms), exact)


@dataclass(frozen=True)
class TruncationReport:
    theta: float
    d: int
    tail_l1: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.theta >= 1 or self.tail_l1 <= self.bound + 1e-12


def roos_theta(p: Sequence[ProbLike], p_center: float) -> float:
    probs = as_probs(p)
    n = probs.size
    if not 0 < p_center < 1:
        raise InvalidParameter("p_center must lie in (0, 1)")
    dev = probs - p_center
    return float((2 * np.sum(dev**2) + np.sum(dev) ** 2) / (2 * n * p_center * (1 - p_center)))


def roos_truncation_bound(theta: float, d: int) -> float:
    """Roos's bound on the l1 mass of the expansion beyond order d (inf if theta >= 1)."""
    if theta >= 1:
        return math.inf
    s = math.sqrt(theta)
    return math.sqrt(math.e) * (d + 1) ** 0.25 * theta ** ((d + 1) / 2) * (1 - d / (d + 1) * s) / (1 - s) ** 2


def roos_truncation(p: Sequence[ProbLike], p_center: ProbLike, d: int) -> TruncationReport:
    """theta, the exact tail ``sum_{ell>d} |alpha_ell| * ||delta^ell B||_1`` and its bound."""
    c = to_fraction(p_center)
    if not 0 < c < 1:
        raise InvalidParameter("p_center must lie in (0, 1)")
    if d < 0:
        raise InvalidParameter("d must be >= 0")
    exp = roos_expand(p, c)
    tail = math.fsum(abs(a) * t.l1_norm for a, t in zip(exp.alphas[d + 1 :], exp.terms[d + 1 :]))
    theta = roos_theta(p, float(c))
    return TruncationReport(theta, d, tail, roos_truncation_bound(theta, d))


def matched_tail_bound(p: Sequence[ProbLike], q: Sequence[ProbLike], p_center: ProbLike, d: int) -> float:
    """``1/2 sum_{ell>d} |alpha_ell(p) - alpha_ell(q)| * ||delta^ell B||_1``.

    When the first d coefficients agree this dominates tvd(PBD(p), PBD(q)),
    since the two expansions share every lower-order term.
    """
    if len(p) != len(q):
        raise InvalidParameter("vectors must have the same length")
    a, b = roos_expand(p, p_center), roos_expand(q, p_center)
    return 0.5 * math.fsum(abs(x - y) * t.l1_norm
                           for x, y, t in zip(a.alphas[d + 1 :], b.alphas[d + 1 :], a.terms[d + 1 :]))


# --- Bound reports ------------------------------------------------------------


@dataclass(frozen=True)
class BoundRow:
    family: str
    n: int
    seed: int
    bound_name: str
    bound_value: float
    measured_tvd: float

    @property
    def margin(self) -> float:
        return self.bound_value - self.measured_tvd

    CSV_HEADER = ("family", "n", "seed", "bound_name", "bound_value", "measured_tvd", "margin")

    def csv_fields(self) -> tuple:
        return (self.family, self.n, self.seed, self.bound_name,
                repr(self.bound_value), repr(self.measured_tvd), repr(self.margin))


def bound_rows(p: Sequence[ProbLike], family: str = "input", seed: int = 0) -> list[BoundRow]:
    """Every single-PBD approximation bound next to the distance it controls."""
    probs = as_probs(p)
    n = probs.size
    pmf = pbd_pmf(probs)
    rows = [BoundRow(family, n, seed, "le_cam", le_cam_bound(probs),
                     tvd(pmf, poisson_pmf(float(probs.sum()))))]
    tbar = float(probs.mean()) if n else 0.0
    rows.append(BoundRow(family, n, seed, "ehm", ehm_bound(probs), tvd(pmf, binomial_pmf(n, tbar))))
    try:
        b, tp = rollin_bound(probs)
        rows.append(BoundRow(family, n, seed, "rollin", b, tvd(pmf, translated_poisson_pmf(tp))))
    except DegenerateInput:
        pass
    return rows
