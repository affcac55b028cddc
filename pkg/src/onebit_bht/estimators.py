"""scikit-learn compatible wrappers around the recovery procedures.

Sign measurements y_i = sign(a_i^T s + z_i) are a probit model, so the
estimators follow the linear-classifier conventions: ``X`` holds one
measurement vector per row (``X = A.T``), ``y`` holds the signs and the
recovered signal ends up in ``coef_``.
"""
import numpy as np
from scipy.special import ndtr
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .model import equivalent_noise_std, sign_quantize
from .pipeline import BhtMleConfig, run_bht_mle, run_mle_baseline

__all__ = ["BHTMLE", "OneBitMLE"]


def _check_signs(y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("y must contain only -1 and +1")
    return y


class _OneBitLinearModel(ClassifierMixin, BaseEstimator):

    def _validate_fit(self, X, y):
        if not self.sigma_n > 0:
            raise ValueError(f"sigma_n must be positive, got {self.sigma_n}")
        if self.sigma_e < 0:
            raise ValueError(f"sigma_e must be non-negative, got {self.sigma_e}")
        X, y = check_X_y(X, y, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([-1, 1])
        return X, _check_signs(y)

    def _store(self, result):
        self.coef_ = result.s_hat
        self.support_ = np.flatnonzero(result.s_hat)
        self.flags_ = result.flags
        self.history_ = result.history
        self.solver_ = result.solver
        self.fit_time_ = result.wall_time
        self.noise_std_ = equivalent_noise_std(
            float(self.coef_ @ self.coef_), self.sigma_e ** 2, self.sigma_n ** 2
        )
        return self

    def _check_X(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but {type(self).__name__} was "
                f"fitted with {self.n_features_in_}"
            )
        return X

    def decision_function(self, X):
        """Noise-normalized margins x^T coef_ / sigma_z."""
        X = self._check_X(X)
        return X @ self.coef_ / self.noise_std_

    def predict_proba(self, X):
        """Columns are P(y = -1) and P(y = +1) under the probit model."""
        p_pos = ndtr(self.decision_function(X))
        return np.column_stack([1.0 - p_pos, p_pos])

    def predict(self, X):
        X = self._check_X(X)
        return sign_quantize(X @ self.coef_).astype(int)


class BHTMLE(_OneBitLinearModel):
    """Sparse recovery from one-bit measurements: per-coordinate Bayesian
    hypothesis tests pick the support, then a maximum-likelihood fit on the
    reduced problem sets the amplitudes.

    Parameters
    ----------
    sigma_e : float, default=0.1
        Std of the sensing-matrix perturbation entries (assumed known).
    sigma_n : float, default=0.1
        Std of the additive noise (assumed known).
    n_outer : int, default=10
        Number of detect/estimate rounds.
    alpha_0, alpha_growth, alpha_max : float
        Schedule of the threshold multiplier used to estimate the activity
        probability: ``min(alpha_0 * alpha_growth**k, alpha_max)``.
    solver_tol : float, default=1e-8
        Gradient-norm tolerance of the Newton solver.
    solver_max_iter : int, default=200
    infeasible_policy : {"project", "unit_norm", "zero", "abort"}, default="project"
        What to do when the ML amplitude estimate does not exist.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Recovered sparse signal.
    support_ : ndarray
        Indices of the nonzero entries of ``coef_``.
    history_ : list of dict
        Per-round diagnostics (support size, threshold, solver status).
    flags_ : frozenset
        Diagnostic flags raised in the final round.
    """

    def __init__(self, sigma_e=0.1, sigma_n=0.1, n_outer=10, alpha_0=0.5,
                 alpha_growth=1.2, alpha_max=3.0, solver_tol=1e-8,
                 solver_max_iter=200, infeasible_policy="project"):
        self.sigma_e = sigma_e
        self.sigma_n = sigma_n
        self.n_outer = n_outer
        self.alpha_0 = alpha_0
        self.alpha_growth = alpha_growth
        self.alpha_max = alpha_max
        self.solver_tol = solver_tol
        self.solver_max_iter = solver_max_iter
        self.infeasible_policy = infeasible_policy

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        config = BhtMleConfig(
            n_outer=self.n_outer,
            alpha_0=self.alpha_0,
            alpha_growth=self.alpha_growth,
            alpha_max=self.alpha_max,
            solver_tol=self.solver_tol,
            solver_max_iter=self.solver_max_iter,
            infeasible_policy=self.infeasible_policy,
        )
        result = run_bht_mle(X.T, y, self.sigma_e, self.sigma_n, config)
        self.support_estimate_ = result.support
        self.n_iter_ = result.iterations_run
        return self._store(result)


class OneBitMLE(_OneBitLinearModel):
    """Maximum-likelihood recovery over all coordinates (no sparsity)."""

    def __init__(self, sigma_e=0.1, sigma_n=0.1, solver_tol=1e-8,
                 solver_max_iter=200, infeasible_policy="project"):
        self.sigma_e = sigma_e
        self.sigma_n = sigma_n
        self.solver_tol = solver_tol
        self.solver_max_iter = solver_max_iter
        self.infeasible_policy = infeasible_policy

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        result = run_mle_baseline(X.T, y, self.sigma_e, self.sigma_n, self.solver_tol,
                                  self.solver_max_iter, self.infeasible_policy)
        self.n_iter_ = result.solver.iterations
        return self._store(result)
