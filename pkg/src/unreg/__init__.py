"""Proximal-point reductions for stochastic ERM solvers.

The library turns linearly-convergent solvers for heavily regularized
empirical risk minimization into fast solvers for the unregularized
problem: plain, accelerated and dual-warm-started outer loops over
pluggable inner oracles, with a Fenchel duality toolkit, certified
stopping, an executable inequality battery and a benchmarking CLI.
"""

from .appa import (AcceleratedState, AppaConfig, DualAppaConfig,
                   accelerated_appa_run, accelerated_error_reduction,
                   accelerated_oracle_factor, appa_run, dual_appa_run,
                   dual_appa_theory_sigma, lambda_decrease_schedule,
                   reduction_stage_count)
from .data import (Dataset, append_affine_feature, load_dataset,
                   random_fourier_features, row_normalize, save_dataset_csv,
                   split_dataset, synth_least_squares, synth_logistic)
from .duality import (DualState, GeneralRegularizedProblem,
                      RegularizedProblem, check_dual_bounds_primal,
                      check_initial_dual_error, check_recenter_error_bound,
                      dual_to_primal, duality_gap, make_subproblem,
                      primal_to_dual)
from .lemmacheck import (BATTERY_SEED, LemmaReport, battery_instances,
                         merge_quadratics, run_all_checks)
from .oracles import (DUAL_ORACLES, PRIMAL_ORACLES, AgdPrimalOracle,
                      ApcgDualOracle, ApcgPrimalOracle, ExactProxOracle,
                      GdPrimalOracle, GeneralSvrgOracle, OracleResult,
                      OracleSpec, SdcaDualOracle, SolverConfig,
                      SvrgPrimalOracle, certified_gap, run_sdca_pass,
                      run_sgd_pass, run_svrg_epoch)
from .problem import (ConjugateDomainError, ErmProblem, GeneralErmProblem,
                      RegularityInfo, ScalarLoss, logistic_loss_problem,
                      squared_loss_problem)
from .reference import minimize_erm, minimize_regularized
from .trace import ConvergenceTrace, TraceRow, read_trace_csv

__version__ = "0.1.0"

__all__ = [
    "AcceleratedState", "AgdPrimalOracle", "ApcgDualOracle",
    "ApcgPrimalOracle", "AppaConfig", "BATTERY_SEED", "ConjugateDomainError",
    "ConvergenceTrace", "DUAL_ORACLES", "Dataset", "DualAppaConfig",
    "DualState", "ErmProblem", "ExactProxOracle", "GdPrimalOracle",
    "GeneralErmProblem", "GeneralRegularizedProblem", "GeneralSvrgOracle",
    "LemmaReport", "OracleResult", "OracleSpec", "PRIMAL_ORACLES",
    "RegularityInfo", "RegularizedProblem", "ScalarLoss", "SdcaDualOracle",
    "SolverConfig", "SvrgPrimalOracle", "TraceRow", "accelerated_appa_run",
    "accelerated_error_reduction", "accelerated_oracle_factor", "appa_run",
    "append_affine_feature",
    "battery_instances", "certified_gap", "check_dual_bounds_primal",
    "check_initial_dual_error", "check_recenter_error_bound",
    "dual_appa_run", "dual_appa_theory_sigma", "dual_to_primal",
    "duality_gap", "lambda_decrease_schedule", "load_dataset",
    "logistic_loss_problem",
    "make_subproblem", "merge_quadratics", "minimize_erm",
    "minimize_regularized", "primal_to_dual", "random_fourier_features",
    "read_trace_csv", "reduction_stage_count", "row_normalize",
    "run_all_checks", "run_sdca_pass", "run_sgd_pass", "run_svrg_epoch",
    "save_dataset_csv", "split_dataset", "squared_loss_problem",
    "synth_least_squares", "synth_logistic",
]
