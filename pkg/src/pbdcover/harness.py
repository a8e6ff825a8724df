"""Randomized certification of every bound and identity in the package.

Each registered check turns a seed into one trial: it draws an input, computes
the quantity a result controls, and compares it with the stated bound.  A trial
passes iff ``measured <= bound + tolerance``.  Everything is deterministic in
(check, trial, master seed).
"""

from __future__ import annotations

import csv
import json
import math
import re
import time
import zlib
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import approx, cover, momentdp
from .errors import DegenerateInput, InvalidParameter
from .pbd_core import (
    as_probs,
    complement,
    coupling_bound,
    exact_power_sums,
    l1_distance,
    pbd_pmf,
    raw_moment,
    tvd,
)

IDENTITY_TOL = 1e-8
INEQUALITY_TOL = 1e-10

FAMILIES = ("uniform", "extremes", "homogeneous", "bimodal", "grid")


def generate_family(family: str, n: int, seed: int, k: int | None = None) -> tuple:
    """Deterministic test vector of length n.

    ``extremes`` puts at least half of the entries in (0, 1/k) or (1 - 1/k, 1)
    (k defaults to 10).  ``grid`` (or ``grid(k)``) returns exact multiples of
    1/k^2 as Fractions (k defaults to 4); the other families return floats.
    """
    m = re.fullmatch(r"grid\((\d+)\)", family)
    if m:
        family, k = "grid", int(m.group(1))
    if family not in FAMILIES:
        raise InvalidParameter(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    if n < 0:
        raise InvalidParameter("n must be >= 0")
    rng = np.random.default_rng([seed, n, zlib.crc32(family.encode())])
    if family == "uniform":
        return tuple(float(x) for x in rng.random(n))
    if family == "homogeneous":
        return (float(rng.random()),) * n
    if family == "bimodal":
        low = rng.random(n) < 0.5
        vals = np.where(low, 0.2 * rng.random(n), 0.8 + 0.2 * rng.random(n))
        return tuple(float(x) for x in vals)
    if family == "extremes":
        k = 10 if k is None else k
        h = (n + 1) // 2
        near = rng.random(h) / k
        near[near == 0] = 0.5 / k
        flip = rng.random(h) < 0.5
        near = np.where(flip, 1 - near, near)
        vals = np.concatenate([near, rng.random(n - h)])
        rng.shuffle(vals)
        return tuple(float(x) for x in vals)
    k = 4 if k is None else k
    den = k * k
    return tuple(Fraction(int(v), den) for v in rng.integers(0, den + 1, n))


@dataclass(frozen=True)
class TrialReport:
    family: str
    n: int
    seed: int
    check: str
    bound: float
    measured: float
    passed: bool
    runtime_ms: int = 0

    FIELDS = ("family", "n", "seed", "check", "bound", "measured", "pass", "runtime_ms")

    def row(self) -> dict:
        return {"family": self.family, "n": self.n, "seed": self.seed, "check": self.check,
                "bound": self.bound, "measured": self.measured, "pass": self.passed,
                "runtime_ms": self.runtime_ms}


@dataclass(frozen=True)
class CertifyConfig:
    n_max: int = 30
    k_values: tuple[int, ...] = (2, 3, 4, 5, 6)
    master_seed: int = 0
    timing: bool = False


@dataclass(frozen=True)
class Outcome:
    family: str
    n: int
    bound: float
    measured: float


@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    run: Callable[[np.random.Generator, int, CertifyConfig], Outcome]
    description: str = ""


REGISTRY: dict[str, Check] = {}


def register(name: str, tolerance: float, description: str):
    def deco(fn):
        REGISTRY[name] = Check(name, tolerance, fn, description)
        return fn

    return deco


def _draw(rng: np.random.Generator, trial: int, n_lo: int, n_hi: int, k: int | None = None):
    fam = FAMILIES[trial % len(FAMILIES)]
    n = int(rng.integers(n_lo, n_hi + 1))
    p = generate_family(fam, n, int(rng.integers(2**31)), k)
    return fam, n, p


# --- single-PBD approximations ---------------------------------------------


@register("le_cam_poisson", INEQUALITY_TOL, "PBD vs Poisson(sum p): tvd <= sum p^2 / sum p")
def _le_cam(rng, trial, cfg):
    fam, n, p = _draw(rng, trial, 1, cfg.n_max)
    pmf = pbd_pmf(p)
    lam = float(as_probs(p).sum())
    return Outcome(fam, n, approx.le_cam_bound(p), tvd(pmf, approx.poisson_pmf(lam)))


@register("ehm_binomial", INEQUALITY_TOL, "PBD vs Binomial(n, mean p): Ehm's bound")
def _ehm(rng, trial, cfg):
    fam, n, p = _draw(rng, trial, 1, cfg.n_max)
    probs = as_probs(p)
    return Outcome(fam, n, approx.ehm_bound(p), tvd(pbd_pmf(p), approx.binomial_pmf(n, float(probs.mean()))))


@register("rollin_translated_poisson", INEQUALITY_TOL, "PBD vs TP(mean, variance): Roellin's bound")
def _rollin(rng, trial, cfg):
    while True:
        fam, n, p = _draw(rng, trial, 1, cfg.n_max)
        try:
            b, tp = approx.rollin_bound(p)
        except DegenerateInput:
            continue
        return Outcome(fam, n, b, tvd(pbd_pmf(p), approx.translated_poisson_pmf(tp)))


@register("poisson_poisson_tv", INEQUALITY_TOL, "tvd(Poisson(a), Poisson(b)) <= sinh|a - b|")
def _poisson_pair(rng, trial, cfg):
    lam1 = float(rng.uniform(0, 30))
    lam2 = max(0.0, lam1 + float(rng.uniform(-2, 2)))
    measured = tvd(approx.poisson_pmf(lam1), approx.poisson_pmf(lam2))
    return Outcome("poisson_pair", 2, approx.poisson_tv_bound(lam1, lam2), measured)


@register("tp_tp_tv", INEQUALITY_TOL, "tvd of two translated Poissons vs the mean/variance bound")
def _tp_pair(rng, trial, cfg):
    s1 = float(rng.uniform(0.5, 50))
    s2 = max(0.5, s1 + float(rng.uniform(-5, 5)))
    m1 = s1 + float(rng.uniform(-3, 30))
    m2 = m1 + float(rng.uniform(-3, 3))
    a = approx.TranslatedPoissonParams(m1, s1)
    b = approx.TranslatedPoissonParams(m2, s2)
    measured = tvd(approx.translated_poisson_pmf(a), approx.translated_poisson_pmf(b))
    return Outcome("tp_pair", 2, approx.tp_tv_bound(a, b), measured)


# --- expansion around a Binomial --------------------------------------------


@register("roos_identity", IDENTITY_TOL, "full expansion reproduces the PBD pmf (l1 error)")
def _roos_identity(rng, trial, cfg):
    fam, n, p = _draw(rng, trial, 1, min(cfg.n_max, 25))
    c = float(rng.uniform(0.05, 0.95))
    exp = approx.roos_expand(p, c)
    return Outcome(fam, n, 0.0, l1_distance(exp.reconstruct(), pbd_pmf(p).mass))


def _half_scaled(rng, trial, cfg):
    fam, n, p = _draw(rng, trial, 1, min(cfg.n_max, 25))
    return fam, n, tuple(0.5 * float(x) for x in p)


@register("roos_truncation", INEQUALITY_TOL, "expansion tail beyond order d vs its theta bound")
def _roos_truncation(rng, trial, cfg):
    fam, n, p = _half_scaled(rng, trial, cfg)
    d = int(rng.integers(0, 7))
    pbar = float(np.mean(p))
    if not 0 < pbar < 1:
        return Outcome(fam, n, 0.0, 0.0)
    rep = approx.roos_truncation(p, pbar, d)
    return Outcome(fam, n, rep.bound, rep.tail_l1)


@register("roos_theta_spread", INEQUALITY_TOL, "theta at the mean is at most max p - min p")
def _roos_theta(rng, trial, cfg):
    fam, n, p = _half_scaled(rng, trial, cfg)
    pbar = float(np.mean(p))
    if not 0 < pbar < 1:
        return Outcome(fam, n, 0.0, 0.0)
    return Outcome(fam, n, max(p) - min(p), approx.roos_theta(p, pbar))


# --- moment matching ----------------------------------------------------------


def _matched_pair(rng, cfg):
    while True:
        n = int(rng.integers(2, min(cfg.n_max, 8) + 1))
        k = int(rng.integers(2, 5))
        d = int(rng.integers(1, min(3, n - 1) + 1))
        pair = momentdp.find_matched_pair(n, k, d, seed=int(rng.integers(1000)))
        if pair is not None:
            return n, k, d, pair


@register("moment_matching", INEQUALITY_TOL, "pairs in [0,1/2]^n with equal power sums up to d")
def _moment_matching(rng, trial, cfg):
    n, k, d, (p, q) = _matched_pair(rng, cfg)
    return Outcome(f"matched(k={k},d={d})", n, approx.moment_matching_bound(d), tvd(pbd_pmf(p), pbd_pmf(q)))


@register("moment_matching_complement", INEQUALITY_TOL, "mirrored pairs in [1/2,1]^n")
def _moment_matching_c(rng, trial, cfg):
    n, k, d, (p, q) = _matched_pair(rng, cfg)
    measured = tvd(pbd_pmf(complement(p)), pbd_pmf(complement(q)))
    return Outcome(f"matched_complement(k={k},d={d})", n, approx.moment_matching_bound(d), measured)


@register("expansion_coefficient_agreement", 1e-10, "matched pairs share expansion coefficients up to d")
def _alpha_agreement(rng, trial, cfg):
    n, k, d, (p, q) = _matched_pair(rng, cfg)
    c = float(rng.uniform(0.05, 0.95))
    diff = max(abs(approx.roos_alpha(p, c, ell) - approx.roos_alpha(q, c, ell)) for ell in range(d + 1))
    return Outcome(f"matched(k={k},d={d})", n, 0.0, diff)


@register("moment_matching_tail", INEQUALITY_TOL, "matched pairs: tvd vs the expansion terms beyond order d")
def _moment_matching_tail(rng, trial, cfg):
    n, k, d, (p, q) = _matched_pair(rng, cfg)
    c = Fraction(sum(p), n)
    if not 0 < c < 1:
        c = Fraction(1, 4)
    bound = approx.matched_tail_bound(p, q, c, d)
    return Outcome(f"matched(k={k},d={d})", n, bound, tvd(pbd_pmf(p), pbd_pmf(q)))


def power_sums_agree(p, q, d: int) -> bool:
    return exact_power_sums(p, d) == exact_power_sums(q, d)


def raw_moments_agree(p, q, d: int, rtol: float = 1e-9) -> bool:
    for ell in range(1, d + 1):
        a, b = raw_moment(p, ell), raw_moment(q, ell)
        if abs(a - b) > rtol * max(1.0, abs(a), abs(b)):
            return False
    return True


def equivalence_pair(rng) -> tuple[tuple, tuple, int]:
    """A pair for the power-sum / raw-moment equivalence, drawn from four kinds.

    Kinds: a moment-matched pair, a permutation, an independent random grid
    pair, and a matched pair with one entry nudged by one grid step.
    """
    kind = int(rng.integers(4))
    if kind in (0, 3):
        while True:
            n = int(rng.integers(2, 9))
            k = int(rng.integers(2, 4))
            d = int(rng.integers(1, min(3, n - 1) + 1))
            pair = momentdp.find_matched_pair(n, k, d, seed=int(rng.integers(1000)))
            if pair is not None:
                break
        p, q = pair
        if kind == 3:
            i = int(rng.integers(n))
            q = list(q)
            step = Fraction(1, k * k)
            q[i] = q[i] + step if q[i] + step <= Fraction(1, 2) else q[i] - step
            q = tuple(q)
        return p, q, int(rng.integers(1, n + 1))
    n = int(rng.integers(1, 9))
    k = int(rng.integers(2, 5))
    p = generate_family("grid", n, int(rng.integers(2**31)), k)
    if kind == 1:
        q = tuple(p[i] for i in rng.permutation(n))
    else:
        q = generate_family("grid", n, int(rng.integers(2**31)), k)
    return p, q, int(rng.integers(1, n + 1))


@register("power_sum_moment_equivalence", 0.0, "equal power sums up to d iff equal raw moments up to d")
def _equivalence(rng, trial, cfg):
    p, q, d = equivalence_pair(rng)
    mismatch = any(power_sums_agree(p, q, e) != raw_moments_agree(p, q, e) for e in range(1, d + 1))
    return Outcome("equivalence", len(p), 0.0, float(mismatch))


@register("identifiability", 0.0, "distinct sorted parameter vectors give distinct PBDs")
def _identifiability(rng, trial, cfg):
    fam, n, p = _draw(rng, trial, 1, cfg.n_max)
    q = list(as_probs(p))
    i = int(rng.integers(n))
    q[i] = q[i] + 1e-3 if q[i] <= 0.5 else q[i] - 1e-3
    # separation is reported as -tvd so that pass means tvd >= 1e-9
    return Outcome(fam, n, -1e-9, -tvd(pbd_pmf(p), pbd_pmf(q)))


@register("coupling", INEQUALITY_TOL, "tvd(PBD(p), PBD(q)) <= sum |p_i - q_i|")
def _coupling(rng, trial, cfg):
    fam, n, p = _draw(rng, trial, 1, cfg.n_max)
    noise = rng.uniform(-0.05, 0.05, n) * (rng.random(n) < 0.5)
    q = np.clip(as_probs(p) + noise, 0, 1)
    return Outcome(fam, n, coupling_bound(p, q), tvd(pbd_pmf(p), pbd_pmf(q)))


# --- rounding -----------------------------------------------------------------


def _k_for(trial: int, cfg: CertifyConfig) -> int:
    return cfg.k_values[trial % len(cfg.k_values)]


def _stage_input(rng, trial, cfg, k, n_hi):
    fam = FAMILIES[trial % len(FAMILIES)]
    n = int(rng.integers(1, n_hi + 1))
    return fam, n, generate_family(fam, n, int(rng.integers(2**31)), k)


@register("stage1_rounding", INEQUALITY_TOL, "removing parameters near 0 and 1 costs at most 7/k")
def _stage1(rng, trial, cfg):
    k = _k_for(trial, cfg)
    fam, n, p = _stage_input(rng, trial, cfg, k, cfg.n_max)
    s1 = cover.stage1_round(p, k)
    return Outcome(f"{fam}(k={k})", n, 7 / k, tvd(pbd_pmf(p), pbd_pmf(s1)))


@register("stage2_sparse_rounding", INEQUALITY_TOL, "snapping at most k^3 parameters to the grid costs at most 34/k")
def _stage2_sparse(rng, trial, cfg):
    k = _k_for(trial, cfg)
    fam, n, p = _stage_input(rng, trial, cfg, k, min(cfg.n_max, k**3))
    tr = cover.round_with_trace(p, k=k)
    return Outcome(f"{fam}(k={k})", n, 34 / k, tvd(pbd_pmf(tr.stage1), pbd_pmf(tr.stage2)))


@register("stage2_binomial_rounding", INEQUALITY_TOL, "the binomial replacement costs at most 9/k (branch forced)")
def _stage2_binomial(rng, trial, cfg):
    k = _k_for(trial, cfg)
    while True:
        fam, n, p = _stage_input(rng, trial, cfg, k, cfg.n_max)
        tr = cover.round_with_trace(p, k=k, threshold=0)
        if tr.branch == "binomial":
            return Outcome(f"{fam}(k={k})", n, 9 / k, tvd(pbd_pmf(tr.stage1), pbd_pmf(tr.stage2)))


@register("stage_total_rounding", INEQUALITY_TOL, "rounding onto a cover element costs at most 41/k")
def _stage_total(rng, trial, cfg):
    k = _k_for(trial, cfg)
    fam, n, p = _stage_input(rng, trial, cfg, k, cfg.n_max)
    elem = cover.round_to_cover(p, k=k)
    return Outcome(f"{fam}(k={k})", n, cover.stage_total_bound(k), tvd(pbd_pmf(p), pbd_pmf(elem.expand())))


@register("binomial_branch_moments", 0.0, "mean/variance inequalities of the binomial replacement (natural branch)")
def _binomial_moments(rng, trial, cfg):
    k = 2 + trial % 2
    while True:
        n = int(rng.integers(k**3 + 1, k**3 + 41))
        p = 1 / k + (1 - 2 / k) * rng.random(n)
        tr = cover.round_with_trace(p, k=k)
        if tr.branch == "binomial":
            worst = min(tr.derivation.slacks().values())
            return Outcome(f"uniform_mid(k={k})", n, 0.0, float(-worst))


# --- moment systems and cover -------------------------------------------------


def random_moment_system(rng) -> momentdp.MomentSystem:
    """A small system (n_tilde <= 4, <= 6 grid points) targeting a random assignment half the time."""
    k = int(rng.integers(1, 4))
    d = int(rng.integers(1, 4))
    n_tilde = int(rng.integers(1, 5))
    den = k * k
    grid = list(range(den + 1))
    sets = []
    for _ in range(n_tilde):
        size = int(rng.integers(1, min(6, len(grid)) + 1))
        sets.append(tuple(sorted(int(v) for v in rng.choice(grid, size, replace=False))))
    B = n_tilde
    if rng.random() < 0.5:
        nums = [int(rng.choice(t)) for t in sets]
        prof = momentdp.profile_of([Fraction(v, den) for v in nums], d, k)
        n0 = nums.count(0)
        n1 = prof.ones
        ns = sum(1 for v in nums if 0 < v and 2 * v <= den)
        nb = n_tilde - n0 - n1 - ns
        return momentdp.MomentSystem(n_tilde, d, B, k, tuple(sets), prof.low_sums, prof.high_sums, n0, n1, ns, nb)
    counts = rng.multinomial(n_tilde, [0.25] * 4)
    caps = [B * k ** (2 * ell) for ell in range(1, d + 1)]
    mu = tuple(int(rng.integers(0, c // 4 + 2)) for c in caps)
    mup = tuple(int(rng.integers(0, c // 2 + 2)) for c in caps)
    mu = tuple(min(a, c) for a, c in zip(mu, caps))
    mup = tuple(min(a, c) for a, c in zip(mup, caps))
    return momentdp.MomentSystem(n_tilde, d, B, k, tuple(sets), mu, mup, *(int(c) for c in counts))


def brute_force_feasible(sys: momentdp.MomentSystem) -> bool:
    den = sys.k * sys.k
    return any(momentdp.check_solution(sys, [Fraction(v, den) for v in combo])
               for combo in product(*sys.allowed_sets))


def dp_agrees_with_brute_force(sys: momentdp.MomentSystem) -> bool:
    sol = momentdp.solve_moment_system(sys)
    truth = brute_force_feasible(sys)
    if sol is None:
        return not truth
    return truth and momentdp.check_solution(sys, sol)


@register("moment_dp", 0.0, "moment-system solver agrees with exhaustive search")
def _moment_dp(rng, trial, cfg):
    sys = random_moment_system(rng)
    return Outcome(f"system(k={sys.k},d={sys.d})", sys.n_tilde, 0.0, float(not dp_agrees_with_brute_force(sys)))


TOY_N, TOY_K, TOY_D = 6, 2, 2


@lru_cache(maxsize=4)
def toy_cover(n: int = TOY_N, k: int = TOY_K, d: int = TOY_D):
    elems = cover.build_cover(n, k=k, d=d)
    return frozenset(elems), cover.sparse_index(elems, d)


def cover_misses(p, n: int = TOY_N, k: int = TOY_K, d: int = TOY_D) -> int:
    """0 if p rounds to an element whose profile has a representative in the toy cover."""
    elems, index = toy_cover(n, k, d)
    return int(not cover.is_represented(cover.round_to_cover(p, k=k), elems, index, d))


@register("cover_toy", 0.0, "grid PBDs round to an element represented in the toy cover")
def _cover_toy(rng, trial, cfg):
    p = generate_family("grid", TOY_N, int(rng.integers(2**31)), TOY_K)
    return Outcome(f"grid(k={TOY_K})", TOY_N, 0.0, float(cover_misses(p)))


# --- driver -------------------------------------------------------------------


def _trial_seed(check: str, trial: int, master_seed: int) -> list[int]:
    return [master_seed, zlib.crc32(check.encode()), trial]


def certify(check: str, trials: int = 500, config: CertifyConfig | None = None) -> Iterator[TrialReport]:
    """One TrialReport per trial of the named check."""
    if check not in REGISTRY:
        raise InvalidParameter(f"unknown check {check!r}; known: {', '.join(sorted(REGISTRY))}")
    if trials < 0:
        raise InvalidParameter("trials must be >= 0")
    cfg = config or CertifyConfig()
    entry = REGISTRY[check]
    for trial in range(trials):
        rng = np.random.default_rng(_trial_seed(check, trial, cfg.master_seed))
        start = time.perf_counter()
        out = entry.run(rng, trial, cfg)
        elapsed = int(round((time.perf_counter() - start) * 1000)) if cfg.timing else 0
        passed = bool(out.measured <= out.bound + entry.tolerance)
        yield TrialReport(out.family, out.n, trial, check, float(out.bound), float(out.measured), passed, elapsed)


def run_suite(only: Sequence[str] | None = None, trials: int = 500,
              config: CertifyConfig | None = None) -> list[TrialReport]:
    names = list(only) if only else list(REGISTRY)
    reports = []
    for name in names:
        reports.extend(certify(name, trials, config))
    return reports


def write_csv(reports: Iterable[TrialReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TrialReport.FIELDS)
        for r in reports:
            row = r.row()
            row["bound"], row["measured"] = repr(r.bound), repr(r.measured)
            w.writerow([row[f] for f in TrialReport.FIELDS])


def write_jsonl(reports: Iterable[TrialReport], path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.row(), sort_keys=True, allow_nan=True) + "\n")


def summarize(reports: Iterable[TrialReport]) -> dict[str, tuple[int, int, float]]:
    """check -> (trials, failures, smallest margin bound - measured)."""
    out: dict[str, list] = {}
    for r in reports:
        s = out.setdefault(r.check, [0, 0, math.inf])
        s[0] += 1
        s[1] += not r.passed
        s[2] = min(s[2], r.bound - r.measured)
    return {k: tuple(v) for k, v in out.items()}
