"""BIZ (Bayes-inspired indifference zone) ranking and selection."""

from bizsel._backend import HAVE_COMPILED, active_backend
from bizsel.biz_core import (
    BizParams,
    InvalidParams,
    ProcedureState,
    RunOutcome,
    StageCapExceeded,
    ZeroVarianceEstimate,
    ZRule,
    compute_beta,
    compute_q,
    elimination_sweep,
    run_biz,
    sampling_rule,
    select_z,
)
from bizsel.continuous import BrownianOracleConfig, q_continuous, run_continuous_biz
from bizsel.distributions import DistributionSpec, Family, InvalidMoments, RandomStream, sample, validate
from bizsel.harness import McResult, binomial_ci, estimate_oracle_pcs, estimate_pcs, sweep_delta
from bizsel.problem import ProblemConfig, ProblemFamily
from bizsel.selection import Elimination, SelectionMap

__version__ = "0.1.0"

__all__ = [
    "HAVE_COMPILED",
    "active_backend",
    "BizParams",
    "BrownianOracleConfig",
    "DistributionSpec",
    "Elimination",
    "Family",
    "InvalidMoments",
    "InvalidParams",
    "McResult",
    "ProblemConfig",
    "ProblemFamily",
    "ProcedureState",
    "RandomStream",
    "RunOutcome",
    "SelectionMap",
    "StageCapExceeded",
    "ZRule",
    "ZeroVarianceEstimate",
    "binomial_ci",
    "compute_beta",
    "compute_q",
    "elimination_sweep",
    "estimate_oracle_pcs",
    "estimate_pcs",
    "q_continuous",
    "run_biz",
    "run_continuous_biz",
    "sample",
    "sampling_rule",
    "select_z",
    "sweep_delta",
    "validate",
]
