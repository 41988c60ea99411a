"""Minimal-penalty calibration (slope heuristics) for projection estimators.

Estimate the minimal-penalty constant from the dimension jump, a merged
jump, a window, or the risk-vs-weight slope; select the final model with
twice that constant; and verify the phase-transition and dependent-noise
penalty identities by Monte-Carlo simulation.
"""

__version__ = "0.1.0"

from .calibrate import (
    CalibrationError,
    CalibrationResult,
    c_hat_jump,
    c_hat_jump_merged,
    c_hat_slope,
    c_hat_window,
    select_final,
)
from .estimators import MinimalPenaltySelector, SingularValueThresholder
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    run_experiment,
    verify_theorem,
)
from .models import (
    ModelCollection,
    ProjectionModel,
    SignalSpec,
    bias,
    collection_bias_profile,
    emp_risks,
    fit,
    regressogram_collection,
)
from .noise import NoiseSpec, RngStream, covariance, generate_sample, sample_noise
from .path import (
    PenaltyShape,
    SelectionPath,
    StepFunction,
    brute_force_select,
    complexity_path,
    compute_path,
    select_at,
)
from .svt import (
    SvtConfig,
    SvtReport,
    hard_threshold_denoise,
    minimal_threshold,
    optimal_threshold,
    svt_experiment,
)
from .theory import (
    TheoremConstants,
    crit_c,
    deviation_bound,
    expected_risks,
    oracle_model,
    penalties,
    proof_thresholds,
    theorem_constants,
    true_risk,
)

__all__ = [
    "CalibrationError",
    "CalibrationResult",
    "ExperimentConfig",
    "ExperimentReport",
    "MinimalPenaltySelector",
    "ModelCollection",
    "NoiseSpec",
    "PenaltyShape",
    "ProjectionModel",
    "RngStream",
    "SelectionPath",
    "SignalSpec",
    "SingularValueThresholder",
    "StepFunction",
    "SvtConfig",
    "SvtReport",
    "TheoremConstants",
    "bias",
    "brute_force_select",
    "c_hat_jump",
    "c_hat_jump_merged",
    "c_hat_slope",
    "c_hat_window",
    "collection_bias_profile",
    "complexity_path",
    "compute_path",
    "covariance",
    "crit_c",
    "deviation_bound",
    "emit_report",
    "emp_risks",
    "expected_risks",
    "fit",
    "generate_sample",
    "hard_threshold_denoise",
    "minimal_threshold",
    "optimal_threshold",
    "oracle_model",
    "penalties",
    "proof_thresholds",
    "regressogram_collection",
    "run_experiment",
    "sample_noise",
    "select_at",
    "select_final",
    "svt_experiment",
    "theorem_constants",
    "true_risk",
    "verify_theorem",
]
