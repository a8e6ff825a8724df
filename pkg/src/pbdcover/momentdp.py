"""Exact power-sum moment systems over the 1/k^2 grid.

Probabilities on the grid are carried as integer numerators v over k^2, and
the l-th power sum as an integer numerator over k^(2l), so every comparison
here is exact integer arithmetic.  Entries split into four classes: 0, 1,
low (0 < v <= k^2/2) and high (k^2/2 < v < k^2).

The solver is a layered reachability table over partial assignments
p_1..p_i, keyed by (z0, z1, zs, zb, nu_1..nu_d, nu'_1..nu'_d): the class
counts and the low/high power sums so far.  Layers are hash sets, since only
a vanishing fraction of the dense index space is ever reachable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from operator import add, le
from typing import Iterable, Iterator, Sequence

from .errors import BudgetExceeded, InvalidParameter
from .pbd_core import ProbLike, to_fraction

DEFAULT_STATE_BUDGET = 10_000_000


def grid_numerators(p: Iterable[ProbLike], k: int) -> tuple[int, ...]:
    """Numerators v with p_i = v / k^2; off-grid or out-of-range entries are rejected."""
    if k < 1:
        raise InvalidParameter("k must be >= 1")
    den = k * k
    out = []
    for i, x in enumerate(p):
        v = to_fraction(x) * den
        if v.denominator != 1 or not 0 <= v <= den:
            raise InvalidParameter(f"p[{i}] = {x} is not a multiple of 1/{den} in [0, 1]")
        out.append(int(v))
    return tuple(out)


def _classify(v: int, den: int) -> int:
    """0 -> zero, 1 -> one, 2 -> low, 3 -> high."""
    if v == 0:
        return 0
    if v == den:
        return 1
    return 2 if 2 * v <= den else 3


@dataclass(frozen=True)
class MomentProfile:
    """Low power sums, high power sums and the number of ones of a grid vector.

    ``low_sums[l-1]`` is the numerator of sum_{low} p_i^l over k^(2l); same for
    ``high_sums``.  An empty class has all-zero sums.
    """

    k: int
    d: int
    low_sums: tuple[int, ...]
    high_sums: tuple[int, ...]
    ones: int

    def __post_init__(self):
        if len(self.low_sums) != self.d or len(self.high_sums) != self.d:
            raise InvalidParameter("profile sums must have length d")
        if self.ones < 0 or any(s < 0 for s in self.low_sums + self.high_sums):
            raise InvalidParameter("profile entries must be nonnegative")

    @property
    def vector(self) -> tuple[int, ...]:
        return self.low_sums + self.high_sums + (self.ones,)

    def to_json(self) -> dict:
        dens = [self.k ** (2 * ell) for ell in range(1, self.d + 1)]
        return {
            "k": self.k,
            "d": self.d,
            "low": [[s, q] for s, q in zip(self.low_sums, dens)],
            "high": [[s, q] for s, q in zip(self.high_sums, dens)],
            "ones": self.ones,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MomentProfile":
        k, d = int(obj["k"]), int(obj["d"])
        return cls(k, d, _scaled_sums(obj["low"], k, d), _scaled_sums(obj["high"], k, d), int(obj["ones"]))


def _scaled_sums(pairs, k: int, d: int) -> tuple[int, ...]:
    if len(pairs) != d:
        raise InvalidParameter(f"expected {d} sums, got {len(pairs)}")
    out = []
    for ell, pair in enumerate(pairs, start=1):
        v = to_fraction(pair) * k ** (2 * ell)
        if v.denominator != 1:
            raise InvalidParameter(f"sum of order {ell} is not a multiple of 1/k^{2 * ell}")
        out.append(int(v))
    return tuple(out)


def profile_of(p: Iterable[ProbLike], d: int, k: int) -> MomentProfile:
    if d < 1:
        raise InvalidParameter("d must be >= 1")
    nums = grid_numerators(p, k)
    den = k * k
    low = [0] * d
    high = [0] * d
    ones = 0
    for v in nums:
        cls = _classify(v, den)
        if cls == 1:
            ones += 1
        elif cls >= 2:
            target = low if cls == 2 else high
            for ell in range(d):
                target[ell] += v ** (ell + 1)
    return MomentProfile(k, d, tuple(low), tuple(high), ones)


@dataclass(frozen=True)
class MomentSystem:
    """Find p_i in allowed_sets[i] with prescribed class counts and power sums.

    ``allowed_sets`` hold grid numerators over k^2; ``mu``/``mu_prime`` hold
    the low/high power sums as numerators over k^(2l).  ``B`` caps the low and
    high counts and every power sum (as a real number).
    """

    n_tilde: int
    d: int
    B: int
    k: int
    allowed_sets: tuple[tuple[int, ...], ...]
    mu: tuple[int, ...]
    mu_prime: tuple[int, ...]
    n0: int
    n1: int
    ns: int
    nb: int

    def __post_init__(self):
        if self.n_tilde < 0 or self.d < 1 or self.B < 0 or self.k < 1:
            raise InvalidParameter("need n_tilde >= 0, d >= 1, B >= 0, k >= 1")
        object.__setattr__(self, "allowed_sets", tuple(tuple(sorted(set(t))) for t in self.allowed_sets))
        object.__setattr__(self, "mu", tuple(self.mu))
        object.__setattr__(self, "mu_prime", tuple(self.mu_prime))
        if len(self.allowed_sets) != self.n_tilde:
            raise InvalidParameter("need one allowed set per index")
        den = self.k * self.k
        for t in self.allowed_sets:
            if any(not 0 <= v <= den for v in t):
                raise InvalidParameter(f"allowed values must be numerators in 0..{den}")
        if len(self.mu) != self.d or len(self.mu_prime) != self.d:
            raise InvalidParameter("need d targets for each class")
        for ell, (a, b) in enumerate(zip(self.mu, self.mu_prime), start=1):
            cap = self.B * self.k ** (2 * ell)
            if not (0 <= a <= cap and 0 <= b <= cap):
                raise InvalidParameter(f"order-{ell} target outside [0, B]")
        if not (0 <= self.n0 <= self.n_tilde and 0 <= self.n1 <= self.n_tilde):
            raise InvalidParameter("n0, n1 must lie in 0..n_tilde")
        if not (0 <= self.ns <= self.B and 0 <= self.nb <= self.B):
            raise InvalidParameter("ns, nb must lie in 0..B")

    @property
    def target(self) -> tuple[int, ...]:
        return (self.n0, self.n1, self.ns, self.nb) + self.mu + self.mu_prime

    def to_json(self) -> dict:
        dens = [self.k ** (2 * ell) for ell in range(1, self.d + 1)]
        return {
            "n_tilde": self.n_tilde,
            "d": self.d,
            "B": self.B,
            "k": self.k,
            "allowed_sets": [list(t) for t in self.allowed_sets],
            "allowed_den": self.k * self.k,
            "mu": [[a, q] for a, q in zip(self.mu, dens)],
            "mu_prime": [[a, q] for a, q in zip(self.mu_prime, dens)],
            "n0": self.n0,
            "n1": self.n1,
            "ns": self.ns,
            "nb": self.nb,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MomentSystem":
        try:
            k, d = int(obj["k"]), int(obj["d"])
            den = int(obj.get("allowed_den", k * k))
            if den != k * k:
                raise InvalidParameter("allowed_den must equal k^2")
            return cls(
                n_tilde=int(obj["n_tilde"]),
                d=d,
                B=int(obj["B"]),
                k=k,
                allowed_sets=tuple(tuple(int(v) for v in t) for t in obj["allowed_sets"]),
                mu=_scaled_sums(obj["mu"], k, d),
                mu_prime=_scaled_sums(obj["mu_prime"], k, d),
                n0=int(obj["n0"]),
                n1=int(obj["n1"]),
                ns=int(obj["ns"]),
                nb=int(obj["nb"]),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidParameter(f"malformed moment system: {exc}") from exc


# --- reachability table ---------------------------------------------------


def _increment(v: int, k: int, d: int) -> tuple[int, ...]:
    den = k * k
    cls = _classify(v, den)
    counts = [0, 0, 0, 0]
    counts[cls] = 1
    powers = tuple(v**ell for ell in range(1, d + 1))
    zeros = (0,) * d
    if cls == 2:
        return tuple(counts) + powers + zeros
    if cls == 3:
        return tuple(counts) + zeros + powers
    return tuple(counts) + zeros + zeros


def _dense_cells(n_tilde: int, d: int, B: int, k: int) -> int:
    per_class = math.prod(B * k ** (2 * ell) + 1 for ell in range(1, d + 1))
    return max(n_tilde, 1) * (n_tilde + 1) ** 2 * (B + 1) ** 2 * per_class**2


def _sequence_states(allowed: Sequence[Sequence[int]]) -> int:
    # a layer-i state is a function of the multiset of values used so far
    vals = set().union(*allowed) if allowed else set()
    t = max(len(vals), 1)
    return sum(math.comb(i + t - 1, i) for i in range(len(allowed) + 1))


class ReachabilityTable:
    """Forward layers of reachable states for a fixed sequence of allowed sets.

    ``caps`` bounds every state coordinate; since all increments are
    nonnegative, any state exceeding a cap can never return below it and is
    dropped.  Witnesses are read back through the layers in lexicographic
    order of the assignment.
    """

    def __init__(self, allowed: Sequence[Sequence[int]], k: int, d: int, caps: Sequence[int],
                 budget: int = DEFAULT_STATE_BUDGET):
        self.allowed = [tuple(sorted(set(t))) for t in allowed]
        self.k, self.d = k, d
        self.caps = tuple(caps)
        estimate = min(_dense_cells(len(self.allowed), d, max(caps[2:4], default=0), k),
                       _sequence_states(self.allowed))
        if estimate > budget:
            raise BudgetExceeded(f"moment table estimate {estimate} exceeds budget {budget}", estimate, budget)
        self._inc = {v: _increment(v, k, d) for t in self.allowed for v in t}
        start = (0,) * (4 + 2 * d)
        self.layers: list[set] = [{start}]
        total = 1
        for t in self.allowed:
            nxt = set()
            for s in self.layers[-1]:
                for v in t:
                    u = tuple(map(add, s, self._inc[v]))
                    if all(map(le, u, self.caps)):
                        nxt.add(u)
            total += len(nxt)
            if total > budget:
                raise BudgetExceeded(f"moment table grew past {budget} states", total, budget)
            self.layers.append(nxt)

    @property
    def final(self) -> set:
        return self.layers[-1]

    def _backward(self, target: tuple[int, ...]) -> list[set] | None:
        if target not in self.final:
            return None
        good = [set() for _ in self.layers]
        good[-1] = {target}
        for i in range(len(self.allowed) - 1, -1, -1):
            t = self.allowed[i]
            good[i] = {s for s in self.layers[i]
                       if any(tuple(map(add, s, self._inc[v])) in good[i + 1] for v in t)}
        return good

    def witness(self, target: tuple[int, ...], exclude: frozenset = frozenset(),
                nondecreasing: bool = False) -> tuple[int, ...] | None:
        """Lexicographically smallest assignment reaching ``target``.

        Assignments whose sorted tuple is in ``exclude`` are skipped.  With
        ``nondecreasing`` only sorted assignments are tried, which lists each
        multiset once when every index has the same allowed set.
        """
        good = self._backward(target)
        if good is None:
            return None
        n = len(self.allowed)
        path: list[int] = []

        def dfs(i: int, s: tuple) -> bool:
            if i == n:
                return tuple(sorted(path)) not in exclude
            lo = path[-1] if nondecreasing and path else -1
            for v in self.allowed[i]:
                if v < lo:
                    continue
                u = tuple(map(add, s, self._inc[v]))
                if u in good[i + 1]:
                    path.append(v)
                    if dfs(i + 1, u):
                        return True
                    path.pop()
            return False

        if not exclude and not nondecreasing:
            # plain greedy walk; every surviving state extends to the target
            s = self.layers[0].copy().pop()
            for i in range(n):
                for v in self.allowed[i]:
                    u = tuple(map(add, s, self._inc[v]))
                    if u in good[i + 1]:
                        path.append(v)
                        s = u
                        break
            return tuple(path)
        return tuple(path) if dfs(0, self.layers[0].copy().pop()) else None


def solve_moment_system(sys: MomentSystem, exclude: Iterable[Sequence[ProbLike]] = (),
                        budget: int = DEFAULT_STATE_BUDGET, tables: dict | None = None) -> tuple[Fraction, ...] | None:
    """An assignment p_i in T_i meeting every equation of ``sys`` exactly, or None.

    ``exclude`` lists probability vectors whose sorted multisets may not be
    returned.  Raises BudgetExceeded (never returns None) when the table
    would be too large to decide.

    Passing a dict as ``tables`` shares tables between systems that differ
    only in their power-sum targets; those tables are capped by B instead of
    by the targets.
    """
    if sys.n0 + sys.n1 + sys.ns + sys.nb != sys.n_tilde:
        return None
    den = sys.k * sys.k
    banned = frozenset(tuple(sorted(grid_numerators(q, sys.k))) for q in exclude)
    if tables is None:
        table = ReachabilityTable(sys.allowed_sets, sys.k, sys.d, sys.target, budget)
    else:
        sums_cap = tuple(sys.B * sys.k ** (2 * ell) for ell in range(1, sys.d + 1))
        caps = (sys.n0, sys.n1, sys.ns, sys.nb) + sums_cap + sums_cap
        key = (sys.allowed_sets, sys.k, sys.d, caps)
        if key not in tables:
            tables[key] = ReachabilityTable(sys.allowed_sets, sys.k, sys.d, caps, budget)
        table = tables[key]
    same_sets = len(set(sys.allowed_sets)) <= 1
    nums = table.witness(sys.target, banned, nondecreasing=bool(banned) and same_sets)
    if nums is None:
        return None
    return tuple(Fraction(v, den) for v in nums)


def check_solution(sys: MomentSystem, p: Sequence[ProbLike]) -> bool:
    """Whether ``p`` satisfies every constraint of ``sys`` (used as an oracle)."""
    if len(p) != sys.n_tilde:
        return False
    try:
        nums = grid_numerators(p, sys.k)
    except InvalidParameter:
        return False
    if any(v not in t for v, t in zip(nums, sys.allowed_sets)):
        return False
    state = (0,) * (4 + 2 * sys.d)
    for v in nums:
        state = tuple(map(add, state, _increment(v, sys.k, sys.d)))
    return state == sys.target


# --- profile enumeration --------------------------------------------------


def _low_range(count: int, k: int, ell: int) -> tuple[int, int]:
    h = (k * k) // 2
    return count, count * h**ell


def _high_range(count: int, k: int, ell: int) -> tuple[int, int]:
    bmin, bmax = (k * k) // 2 + 1, k * k - 1
    return count * bmin**ell, count * bmax**ell


def _class_feasible(count: int, k: int, low: bool) -> bool:
    if count == 0:
        return True
    den = k * k
    return den // 2 >= 1 if low else den - 1 >= den // 2 + 1


def profile_count_bound(n: int, k: int, d: int) -> int:
    """(n+1)(k^3+1)^2 (prod_t k^(2t) k^3)^2: the counting bound on compatible profiles."""
    per_class = math.prod(k ** (2 * t) * k**3 for t in range(1, d + 1))
    return (n + 1) * (k**3 + 1) ** 2 * per_class**2


def _box_size(count: int, k: int, d: int, low: bool) -> int:
    if count == 0:
        return 1
    if not _class_feasible(count, k, low):
        return 0
    rng = _low_range if low else _high_range
    return math.prod(hi - lo + 1 for lo, hi in (rng(count, k, ell) for ell in range(1, d + 1)))


def _count_pairs(n: int, k: int, ones: int) -> Iterator[tuple[int, int]]:
    cap = min(k**3, n - ones)
    for L in range(cap + 1):
        for R in range(cap - L + 1):
            yield L, R


def profile_enumeration_estimate(n: int, k: int, d: int) -> int:
    """Number of (ones, |L|, |R|, sums) tuples enumerate_profiles will visit."""
    return sum(_box_size(L, k, d, True) * _box_size(R, k, d, False)
               for ones in range(n + 1) for L, R in _count_pairs(n, k, ones))


def _boxes(count: int, k: int, d: int, low: bool) -> Iterator[tuple[int, ...]]:
    if count == 0:
        yield (0,) * d
        return
    if not _class_feasible(count, k, low):
        return
    rng = _low_range if low else _high_range
    ranges = [range(lo, hi + 1) for lo, hi in (rng(count, k, ell) for ell in range(1, d + 1))]

    def rec(i, acc):
        if i == d:
            yield tuple(acc)
            return
        for v in ranges[i]:
            acc.append(v)
            yield from rec(i + 1, acc)
            acc.pop()

    yield from rec(0, [])


def enumerate_profiles(n: int, k: int, d: int, budget: int = DEFAULT_STATE_BUDGET) -> Iterator[MomentProfile]:
    """Compatible moment profiles of k-sparse vectors of length n, without repeats.

    For each number of ones and each (|L|, |R|) with |L| + |R| <= min(k^3, n - ones),
    the l-th low sum ranges over [|L|, |L| h^l] with h = floor(k^2/2), and the
    high sums over the analogous box.  This is a superset of the realizable
    profiles and a subset of the coarser box (0, |L| k^(2l)] per order.
    """
    if n < 0 or k < 1 or d < 1:
        raise InvalidParameter("need n >= 0, k >= 1, d >= 1")
    estimate = profile_enumeration_estimate(n, k, d)
    if estimate > budget:
        raise BudgetExceeded(f"profile enumeration estimate {estimate} exceeds budget {budget}", estimate, budget)
    for ones in range(n + 1):
        seen = set()
        for L, R in _count_pairs(n, k, ones):
            for low in _boxes(L, k, d, True):
                for high in _boxes(R, k, d, False):
                    key = (low, high)
                    if key not in seen:
                        seen.add(key)
                        yield MomentProfile(k, d, low, high, ones)


# --- moment-matched pairs -------------------------------------------------


@lru_cache(maxsize=64)
def _collision_groups(n: int, k: int, d: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """Groups of >= 2 sorted vectors in {0..k^2/2}^n sharing their first d power sums."""
    half = (k * k) // 2
    groups: dict[tuple[int, ...], list] = {}
    for combo in combinations_with_replacement(range(half + 1), n):
        key = tuple(sum(v**ell for v in combo) for ell in range(1, d + 1))
        groups.setdefault(key, []).append(combo)
    return tuple(tuple(g) for _, g in sorted(groups.items()) if len(g) >= 2)


def find_matched_pair(n: int, k: int, d: int, seed: int = 0,
                      budget: int = DEFAULT_STATE_BUDGET) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]] | None:
    """Two grid vectors in [0, 1/2]^n with equal power sums of orders 1..d.

    The first vector is picked (by ``seed``) among the multisets that share
    their power sums with some other multiset; the second is found by solving the
    moment system for those sums with the first one excluded.  Returns None
    when no two distinct multisets agree, which is always the case for d >= n.
    """
    if n < 1 or k < 1 or d < 1:
        raise InvalidParameter("need n, k, d >= 1")
    if d >= n:
        return None
    groups = _collision_groups(n, k, d)
    if not groups:
        return None
    # seeds walk through the groups (ordered by power sums), then through members
    group = groups[seed % len(groups)]
    p_nums = group[-1 - (seed // len(groups)) % len(group)]
    den = k * k
    p = tuple(Fraction(v, den) for v in p_nums)
    prof = profile_of(p, d, k)
    allowed = tuple(range((k * k) // 2 + 1))
    for n0 in range(n + 1):
        ns = n - n0
        # low power sums are at most ns / 2^l, so B = ns caps everything
        sys = MomentSystem(n, d, ns, k, (allowed,) * n, prof.low_sums, (0,) * d, n0, 0, ns, 0)
        q = solve_moment_system(sys, exclude=[p], budget=budget)
        if q is not None:
            return p, q
    raise AssertionError("collision group without a second solution")  # pragma: no cover
