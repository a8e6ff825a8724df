"""Proper covers of Poisson Binomial distributions in total variation."""

from .approx import (
    RoosExpansion,
    TranslatedPoissonParams,
    TruncationReport,
    ehm_bound,
    le_cam_bound,
    moment_matching_bound,
    poisson_pmf,
    poisson_tv_bound,
    rollin_bound,
    roos_alpha,
    roos_delta_term,
    roos_expand,
    roos_truncation,
    tp_tv_bound,
    translated_poisson_pmf,
)
from .cover import (
    BinomialDerivation,
    BinomialForm,
    SparseForm,
    build_cover,
    d_of_eps,
    enumerate_binomial_forms,
    k_of_eps,
    round_to_cover,
    stage1_round,
    stage2_binomial,
    stage2_sparse,
)
from .errors import BudgetExceeded, DegenerateInput, InternalInconsistency, InvalidParameter
from .harness import TrialReport, certify, generate_family
from .momentdp import (
    MomentProfile,
    MomentSystem,
    enumerate_profiles,
    find_matched_pair,
    profile_of,
    solve_moment_system,
)
from .pbd_core import Pmf, SignedMeasure, canonicalize, pbd_pmf, power_sums, raw_moment, tvd

__all__ = [name for name in dir() if not name.startswith("_")]
