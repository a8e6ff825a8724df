"""Poisson Binomial distributions: representation, exact PMF, distances, moments.

A PBD of order n is the law of a sum of n independent indicators with
success probabilities p_1..p_n.  Parameter vectors are plain sequences;
anything ``Fraction`` accepts (int, float, Fraction, "3/8") is allowed as an
entry, and the sorted vector is the canonical identifier of the distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameter

ProbLike = float | int | Fraction | str


def to_fraction(x: ProbLike) -> Fraction:
    """Exact rational value of ``x``; floats convert by their binary value."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return Fraction(int(x[0]), int(x[1]))
    try:
        return Fraction(x)
    except (TypeError, ValueError) as exc:
        raise InvalidParameter(f"not a number: {x!r}") from exc


def exact_probs(p: Iterable[ProbLike]) -> tuple[Fraction, ...]:
    out = tuple(to_fraction(x) for x in p)
    for i, x in enumerate(out):
        if not 0 <= x <= 1:
            raise InvalidParameter(f"p[{i}] = {x} is outside [0, 1]")
    return out


def as_probs(p: Iterable[ProbLike]) -> np.ndarray:
    """Validated float array of probabilities."""
    if isinstance(p, np.ndarray) and p.dtype.kind == "f":
        arr = p.astype(float, copy=False)
    else:
        arr = np.array([float(to_fraction(x)) if not isinstance(x, float) else x for x in p], dtype=float)
    if arr.ndim != 1:
        raise InvalidParameter("probability vector must be one-dimensional")
    bad = np.flatnonzero(~((arr >= 0.0) & (arr <= 1.0)))
    if bad.size:
        i = int(bad[0])
        raise InvalidParameter(f"p[{i}] = {arr[i]} is outside [0, 1]")
    return arr


def canonicalize(p: Sequence[ProbLike]) -> tuple:
    """Sorted copy of ``p``; two vectors give the same PBD iff these agree."""
    exact_probs(p)
    return tuple(sorted(p, key=to_fraction))


@dataclass(frozen=True, eq=False)
class Pmf:
    """Mass function on the integers ``offset .. offset + len(mass) - 1``.

    ``tail`` is probability that lies outside the stored window (used for
    truncated Poisson-type laws); distances computed from a truncated Pmf are
    inflated by it so they stay upper bounds.
    """

    mass: np.ndarray
    offset: int = 0
    tail: float = 0.0

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        object.__setattr__(self, "mass", mass)
        if mass.ndim != 1 or mass.size == 0:
            raise InvalidParameter("pmf mass must be a non-empty 1-d array")
        if np.any(mass < -1e-15):
            raise InvalidParameter("pmf has negative entries")
        total = float(mass.sum()) + self.tail
        if abs(total - 1.0) > 1e-10 * mass.size:
            raise InvalidParameter(f"pmf mass sums to {total}, not 1")

    @property
    def support_max(self) -> int:
        return self.offset + self.mass.size - 1

    def __getitem__(self, m: int) -> float:
        i = m - self.offset
        return float(self.mass[i]) if 0 <= i < self.mass.size else 0.0

    def to_json(self) -> dict:
        out = {"mass": [float(x) for x in self.mass]}
        if self.offset:
            out["offset"] = self.offset
        if self.tail:
            out["tail"] = self.tail
        return out


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    """Real-valued function on ``0..len(values)-1``."""

    values: np.ndarray
    l1_norm: float = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "l1_norm", float(np.abs(values).sum()))


def pbd_pmf(p: Iterable[ProbLike]) -> Pmf:
    """Exact PMF of the PBD by adding one indicator at a time."""
    probs = as_probs(p)
    mass = np.zeros(probs.size + 1)
    mass[0] = 1.0
    for j, x in enumerate(probs, start=1):
        # mass[0..j] <- (1 - x) * mass[0..j] + x * mass[-1..j-1]
        mass[1 : j + 1] = mass[1 : j + 1] * (1.0 - x) + mass[0:j] * x
        mass[0] *= 1.0 - x
    return Pmf(mass)


def _aligned(a: Pmf, b: Pmf) -> tuple[np.ndarray, np.ndarray]:
    lo = min(a.offset, b.offset)
    hi = max(a.support_max, b.support_max)
    x = np.zeros(hi - lo + 1)
    y = np.zeros(hi - lo + 1)
    x[a.offset - lo : a.offset - lo + a.mass.size] = a.mass
    y[b.offset - lo : b.offset - lo + b.mass.size] = b.mass
    return x, y


def tvd(a: Pmf, b: Pmf) -> float:
    """Total variation distance, zero-padding the shorter support.

    Untracked tail mass of either argument is added (halved) as a worst case,
    so for truncated inputs the result is an upper bound on the true distance.
    """
    x, y = _aligned(a, b)
    d = 0.5 * float(np.abs(x - y).sum()) + 0.5 * (a.tail + b.tail)
    return min(d, 1.0)


def l1_distance(a: Pmf | np.ndarray, b: Pmf | np.ndarray) -> float:
    if isinstance(a, Pmf) and isinstance(b, Pmf):
        x, y = _aligned(a, b)
        return float(np.abs(x - y).sum())
    x, y = np.asarray(a, float), np.asarray(b, float)
    n = max(x.size, y.size)
    x = np.pad(x, (0, n - x.size))
    y = np.pad(y, (0, n - y.size))
    return float(np.abs(x - y).sum())


def power_sums(p: Iterable[ProbLike], d: int) -> np.ndarray:
    """``[sum p_i, sum p_i**2, ..., sum p_i**d]``."""
    if d < 1:
        raise InvalidParameter("d must be >= 1")
    probs = as_probs(p)
    return np.array([float(np.sum(probs**ell)) for ell in range(1, d + 1)])


def exact_power_sums(p: Iterable[ProbLike], d: int) -> tuple[Fraction, ...]:
    probs = exact_probs(p)
    return tuple(sum((x**ell for x in probs), Fraction(0)) for ell in range(1, d + 1))


@dataclass(frozen=True)
class SplitPowerSums:
    low: tuple
    high: tuple
    ones: int
    zeros: int


def split_power_sums(p: Iterable[ProbLike], d: int) -> SplitPowerSums:
    """Power sums over entries in (0, 1/2] and (1/2, 1) separately.

    Entries equal to 1/2 count as low.  ``low``/``high`` are empty tuples when
    the class is empty.  Exact inputs (Fraction/int/str) give exact sums.
    """
    if d < 1:
        raise InvalidParameter("d must be >= 1")
    vals = list(p)
    exact = not any(isinstance(x, (float, np.floating)) for x in vals)
    xs = exact_probs(vals)
    low = [x for x in xs if 0 < x <= Fraction(1, 2)]
    high = [x for x in xs if Fraction(1, 2) < x < 1]

    def sums(group):
        if not group:
            return ()
        out = tuple(sum((x**ell for x in group), Fraction(0)) for ell in range(1, d + 1))
        return out if exact else tuple(float(s) for s in out)

    return SplitPowerSums(
        low=sums(low),
        high=sums(high),
        ones=sum(1 for x in xs if x == 1),
        zeros=sum(1 for x in xs if x == 0),
    )


def raw_moment(p: Iterable[ProbLike], ell: int) -> float:
    """``E[S**ell]`` for S ~ PBD(p), summed over the exact PMF."""
    probs = as_probs(p)
    if not 1 <= ell <= probs.size:
        raise InvalidParameter(f"moment order {ell} outside 1..{probs.size}")
    pmf = pbd_pmf(probs)
    m = np.arange(pmf.mass.size, dtype=float)
    return float(np.sum(m**ell * pmf.mass))


def coupling_bound(p: Sequence[ProbLike], q: Sequence[ProbLike]) -> float:
    """Sum of per-indicator distances ``sum |p_i - q_i|``.

    This dominates tvd(PBD(p), PBD(q)); it is not clamped to 1.
    """
    a, b = as_probs(p), as_probs(q)
    if a.size != b.size:
        raise InvalidParameter(f"length mismatch: {a.size} vs {b.size}")
    return float(np.abs(a - b).sum())


def complement(p: Iterable[ProbLike]) -> tuple:
    """Parameters of ``n - S``: each p_i replaced by 1 - p_i."""
    vals = list(p)
    if all(isinstance(x, (float, np.floating)) for x in vals):
        return tuple(1.0 - float(x) for x in vals)
    return tuple(1 - x for x in exact_probs(vals))
