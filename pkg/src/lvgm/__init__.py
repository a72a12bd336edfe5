"""Latent-variable Gaussian graphical model selection by constrained l1
minimization, hard thresholding and eigenvalue truncation."""
from .errors import (IllConditioned, IncoherenceUnreachable, LvgmError, NoConvergence,
                     NotPositiveDefinite, NumericalBreakdown, SolverDegenerate, SpecInfeasible)
from .estimator import (EstimateResult, EstimatorConfig, clime_column, clime_estimate, compute_tau,
                        estimate, estimate_lowrank, estimate_sparse, sign_pattern, symmetrize_min,
                        threshold_support)
from .harness import (Calibration, ExperimentPlan, TrialReport, calibrate_constants, check_assumptions,
                      run_plan, run_replicate)
from .linalg import (EigenDecomposition, eig_sym, entrywise_max_norm, matrix_one_norm, spd_inverse,
                     spectral_norm, sym)
from .lp import LinearProgram, LpSolution, LpStatus, solve_lp
from .model import (LatentModel, ModelSpec, assemble_model, check_model, generate_lowrank_component,
                    generate_sparse_component, make_rng, sample_covariance)

__all__ = [
    "IllConditioned", "IncoherenceUnreachable", "LvgmError", "NoConvergence",
    "NotPositiveDefinite", "NumericalBreakdown", "SolverDegenerate", "SpecInfeasible",
    "EstimateResult", "EstimatorConfig", "clime_column", "clime_estimate", "compute_tau",
    "estimate", "estimate_lowrank", "estimate_sparse", "sign_pattern", "symmetrize_min",
    "threshold_support", "Calibration", "ExperimentPlan", "TrialReport", "calibrate_constants",
    "check_assumptions", "run_plan", "run_replicate", "EigenDecomposition", "eig_sym",
    "entrywise_max_norm", "matrix_one_norm", "spd_inverse", "spectral_norm", "sym",
    "LinearProgram", "LpSolution", "LpStatus", "solve_lp", "LatentModel", "ModelSpec",
    "assemble_model", "check_model", "generate_lowrank_component", "generate_sparse_component",
    "make_rng", "sample_covariance",
]

__version__ = "0.1.0"
