"""Support detection by per-coordinate binary Bayesian hypothesis tests.

For coordinate j the two hypotheses are "s_j inactive" (likelihood evaluated
at the estimate with coordinate j zeroed) and "s_j active" (likelihood at the
full estimate). The MAP rule reduces to comparing their log-likelihood ratio
against ln((1 - p) / p).
"""
import math
from dataclasses import dataclass

import numpy as np

from .numerics import log_std_normal_cdf

__all__ = [
    "SupportEstimate",
    "threshold_from_p",
    "sign_log_likelihood",
    "activity_score",
    "activity_scores",
    "detect_support",
    "estimate_activity_probability",
    "alpha_schedule",
]


@dataclass(frozen=True)
class SupportEstimate:
    q_hat: np.ndarray
    scores: np.ndarray
    threshold: float
    p_hat: float

    @property
    def support(self):
        return np.flatnonzero(self.q_hat)


def threshold_from_p(p):
    """MAP threshold ln((1 - p) / p) in nats."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly in (0, 1), got {p}")
    return math.log((1.0 - p) / p)


def _check_sigma(sigma_z):
    if not sigma_z > 0:
        raise ValueError(f"sigma_z must be positive, got {sigma_z}")


def sign_log_likelihood(y_i, a_i, s, sigma_z):
    """log P(y_i | s) = log Phi(y_i a_i^T s / sigma_z)."""
    _check_sigma(sigma_z)
    return log_std_normal_cdf(y_i * float(np.dot(a_i, s)) / sigma_z)


def activity_scores(y, a_mat, s_hat, sigma_z):
    """LLR scores for every coordinate at once.

    The inner products a_i^T s_hat are formed once; removing coordinate j
    only subtracts a_ji * s_hat_j from them. Coordinates with s_hat_j == 0
    therefore score exactly 0.
    """
    _check_sigma(sigma_z)
    y = np.asarray(y, dtype=float)
    a_mat = np.asarray(a_mat, dtype=float)
    s_hat = np.asarray(s_hat, dtype=float)
    inner = s_hat @ a_mat
    full = log_std_normal_cdf(y * inner / sigma_z)
    scores = np.zeros(s_hat.shape[0])
    nz = np.flatnonzero(s_hat)
    if nz.size:
        reduced = inner[None, :] - a_mat[nz] * s_hat[nz, None]
        scores[nz] = np.sum(full[None, :] - log_std_normal_cdf(y * reduced / sigma_z), axis=1)
    return scores


def activity_score(j, y, a_mat, s_hat, sigma_z):
    """LLR score of coordinate ``j`` (0-based)."""
    _check_sigma(sigma_z)
    s_hat = np.asarray(s_hat, dtype=float)
    if not 0 <= j < s_hat.shape[0]:
        raise IndexError(f"coordinate {j} out of range for length {s_hat.shape[0]}")
    if s_hat[j] == 0.0:
        return 0.0
    a_mat = np.asarray(a_mat, dtype=float)
    y = np.asarray(y, dtype=float)
    inner = s_hat @ a_mat
    reduced = inner - a_mat[j] * s_hat[j]
    return float(np.sum(log_std_normal_cdf(y * inner / sigma_z)
                        - log_std_normal_cdf(y * reduced / sigma_z)))


def detect_support(y, a_mat, s_hat, sigma_z, p):
    """Threshold the LLR scores; a score equal to the threshold counts as active."""
    th = threshold_from_p(p)
    scores = activity_scores(y, a_mat, s_hat, sigma_z)
    q_hat = (scores >= th).astype(np.int8)
    return SupportEstimate(q_hat=q_hat, scores=scores, threshold=th, p_hat=float(p))


def estimate_activity_probability(s_hat, alpha, return_flag=False):
    """Fraction of entries with |s_hat_j| > alpha * std(s_hat), clamped to
    [1/m, 1 - 1/m].

    ``std`` is the population (divide-by-m) standard deviation. An all-zero
    estimate gives the floor 1/m; pass ``return_flag=True`` to also get a
    boolean telling whether that degenerate case occurred.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    s_hat = np.asarray(s_hat, dtype=float)
    m = s_hat.shape[0]
    if m == 1:
        # [1/m, 1 - 1/m] is empty; fall back to the uninformative prior.
        return (0.5, not np.any(s_hat)) if return_flag else 0.5
    lo, hi = 1.0 / m, 1.0 - 1.0 / m
    degenerate = not np.any(s_hat)
    if degenerate:
        p_hat = lo
    else:
        with np.errstate(over="ignore"):
            level = alpha * np.std(s_hat)
        count = np.count_nonzero(np.abs(s_hat) > level)
        p_hat = min(max(count / m, lo), hi)
    return (p_hat, degenerate) if return_flag else p_hat


def alpha_schedule(k, alpha_0=0.5, growth=1.2, alpha_max=3.0):
    """Geometric threshold multiplier min(alpha_0 * growth**k, alpha_max)."""
    if k < 0 or alpha_0 <= 0 or growth <= 1:
        raise ValueError("need k >= 0, alpha_0 > 0 and growth > 1")
    return min(alpha_0 * growth ** k, alpha_max)
