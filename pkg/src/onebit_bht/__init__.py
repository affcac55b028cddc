"""Sparse recovery from one-bit measurements under sensing-matrix perturbation.

Two-stage recovery: per-coordinate Bayesian hypothesis tests detect the
support, then a maximum-likelihood fit on the reduced problem estimates the
amplitudes. The full-dimension ML estimator is provided as a baseline.
"""
from .bench import ExperimentSpec, TrialRecord, emit_results, load_records, nmse_db, run_monte_carlo
from .detector import SupportEstimate, detect_support
from .estimators import BHTMLE, OneBitMLE
from .model import ModelParams, generate_measurements, sample_sparse_signal
from .pipeline import BhtMleConfig, RecoveryResult, run_bht_mle, run_mle_baseline

__version__ = "0.1.0"

__all__ = [
    "BHTMLE",
    "OneBitMLE",
    "BhtMleConfig",
    "RecoveryResult",
    "run_bht_mle",
    "run_mle_baseline",
    "SupportEstimate",
    "detect_support",
    "ModelParams",
    "sample_sparse_signal",
    "generate_measurements",
    "ExperimentSpec",
    "TrialRecord",
    "run_monte_carlo",
    "emit_results",
    "load_records",
    "nmse_db",
]
