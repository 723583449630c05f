"""Shuffled linear regression: solvers, baselines, metrics and experiment harness."""

from .assignment import AssignmentResult, hungarian, sort_assignment
from .baselines import naive_ao, ols_unshuffled
from .core import (
    Coefficients,
    Dataset,
    ObjectiveMatrices,
    Permutation,
    SeedSet,
    SingularMatrixError,
    default_lambda,
    objective_matrix,
    objective_value,
    ridge_gram,
    ridge_solve,
)
from .gncr import (
    ConvergenceError,
    GncrConfig,
    InnerStep,
    SeededPartition,
    SolveResult,
    StageTrace,
    collate,
    extract_permutation,
    fw_linear_step,
    g_mu,
    gncr_solve,
    line_search_coeffs,
    mu_schedule,
    optimal_step,
    partition_seeds,
    top_eigenvalue,
)
from .metrics import beta_correlation, perm_overlap, test_error, train_error
from .synth import SynthInstance, generate, recovery_feasible, snr

__version__ = "0.1.0"

__all__ = [
    "AssignmentResult",
    "Coefficients",
    "ConvergenceError",
    "Dataset",
    "GncrConfig",
    "InnerStep",
    "ObjectiveMatrices",
    "Permutation",
    "SeedSet",
    "SeededPartition",
    "SingularMatrixError",
    "SolveResult",
    "StageTrace",
    "SynthInstance",
    "beta_correlation",
    "collate",
    "default_lambda",
    "extract_permutation",
    "fw_linear_step",
    "g_mu",
    "generate",
    "gncr_solve",
    "hungarian",
    "line_search_coeffs",
    "mu_schedule",
    "naive_ao",
    "objective_matrix",
    "objective_value",
    "ols_unshuffled",
    "optimal_step",
    "partition_seeds",
    "perm_overlap",
    "recovery_feasible",
    "ridge_gram",
    "ridge_solve",
    "snr",
    "sort_assignment",
    "test_error",
    "top_eigenvalue",
    "train_error",
]
