"""Sparse recovery of signals observed through linear ill-posed operators.

The estimator expands the unknown in an overcomplete dictionary, maps the
atoms through the inverse of the operator's adjoint, and solves a weighted
Lasso whose weights track the noise amplification of each atom.
"""

__version__ = "0.1.0"

from .errors import (
    BenchmarkAborted,
    CapacityError,
    DegenerateAtomError,
    DegenerateWeightError,
    IllPosedError,
    InvalidArgumentError,
    OracleUnavailableError,
    RankDeficiencyError,
    SingularOperatorError,
    TruncationLimitError,
)
from .problem import (
    Grid,
    InverseProblem,
    TestFunction,
    build_convolution_operator,
    evaluate_test_function,
    make_problem,
    sigma_from_snr,
    synthesize_observations,
)
from .dictionary import (
    Dictionary,
    TightFrame,
    build_dictionary,
    build_laguerre_dictionary,
    build_random_dictionary,
    build_structured_dictionary,
    build_tight_frame,
)
from .precondition import PreconditionedSystem, alpha0, precondition
from .lasso import LassoFit, LassoPath, lasso_path, weighted_lasso
from .model_select import cp_select, lasso_cv, pilot_estimate_q
from .baselines import (
    laguerre_projection_estimator,
    oracle_select,
    truncated_svd_estimator,
)
from .bench import ExperimentConfig, ExperimentReport, emit_table, run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
