"""Amplitude recovery on a detected support.

The ML problem in the amplitudes w is non-convex because the noise std
depends on ||w||. It is solved through the convex surrogate

    minimize_v  -sum_i log Phi(y_i h_i^T v),

whose minimizer v* maps back to w* = sigma_n v* / sqrt(1 - sigma_e^2 ||v*||^2)
provided ||v*||^2 < 1 / sigma_e^2. Otherwise the amplitude ML estimate does
not exist.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import inverse_mills, log_std_normal_cdf

__all__ = [
    "EmptySupportError",
    "ReducedProblem",
    "MlSolution",
    "reduce_problem",
    "p2_objective",
    "p2_gradient",
    "p2_hessian",
    "solve_p2",
    "check_feasibility",
    "recover_amplitudes",
    "forward_map",
    "project_feasible",
    "embed_solution",
]

# Guard radius^2 for sigma_e == 0, where the feasibility region is unbounded.
_UNPERTURBED_GUARD_SQ = 1e12


class EmptySupportError(ValueError):
    """Raised when a reduction is requested with no active coordinates."""


@dataclass(frozen=True)
class ReducedProblem:
    """Sign data restricted to the active coordinates.

    ``h_mat`` has one row per active coordinate and one column per
    measurement, i.e. column i is the reduced measurement vector h_i.
    """

    h_mat: np.ndarray
    y: np.ndarray
    active_index: np.ndarray
    sigma_e: float
    sigma_n: float

    @property
    def n_active(self):
        return self.h_mat.shape[0]


@dataclass
class MlSolution:
    v_star: np.ndarray
    objective: float
    iterations: int
    converged: bool
    grad_norm: float
    reason: str = ""
    feasible: bool = False
    w_star: Optional[np.ndarray] = None


def reduce_problem(a_mat, y, q_hat, sigma_e, sigma_n):
    a_mat = np.asarray(a_mat, dtype=float)
    active = np.flatnonzero(np.asarray(q_hat))
    if active.size == 0:
        raise EmptySupportError("no active coordinates detected")
    return ReducedProblem(
        h_mat=a_mat[active],
        y=np.asarray(y, dtype=float),
        active_index=active,
        sigma_e=float(sigma_e),
        sigma_n=float(sigma_n),
    )


def _margins(v, prob):
    return prob.y * (np.asarray(v, dtype=float) @ prob.h_mat)


def p2_objective(v, prob):
    return float(-np.sum(log_std_normal_cdf(_margins(v, prob))))


def p2_gradient(v, prob):
    u = _margins(v, prob)
    return -(prob.h_mat @ (prob.y * inverse_mills(u)))


def _curvature(u, im):
    # Second derivative of -log Phi(u); lies in (0, 1) analytically.
    return np.clip(im * (im + u), 0.0, 1.0)


def p2_hessian(v, prob):
    u = _margins(v, prob)
    c = _curvature(u, inverse_mills(u))
    return (prob.h_mat * c) @ prob.h_mat.T


def _guard_radius_sq(sigma_e):
    return 4.0 / sigma_e ** 2 if sigma_e > 0 else _UNPERTURBED_GUARD_SQ


def solve_p2(prob, v0=None, tol=1e-8, max_iter=200, backtrack=0.5, armijo=1e-4):
    """Damped Newton with Armijo backtracking on the convex surrogate.

    Stops when the gradient norm drops below ``tol``, after ``max_iter``
    iterations, or when ||v||^2 reaches 4 / sigma_e^2. The last case happens
    on linearly separable sign data, where the objective has no finite
    minimizer; it is reported with ``reason="separable/unbounded"``. A small
    gradient at an iterate that already fits every sign is the same
    situation, and the iterate is then pushed out to the guard radius.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    n = prob.n_active
    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    guard_sq = _guard_radius_sq(prob.sigma_e)
    eye = np.eye(n)

    u = _margins(v, prob)
    f = float(-np.sum(log_std_normal_cdf(u)))
    converged = False
    iterations = 0
    while True:
        im = inverse_mills(u)
        grad = -(prob.h_mat @ (prob.y * im))
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            if np.all(u > 0):
                # v itself separates the data, so f(t v) keeps decreasing in
                # t: the small gradient is a tail artefact, not a minimizer.
                v = v * math.sqrt(guard_sq / float(v @ v))
                u = _margins(v, prob)
                f = float(-np.sum(log_std_normal_cdf(u)))
                gnorm = float(np.linalg.norm(p2_gradient(v, prob)))
                reason = "separable/unbounded"
            else:
                converged, reason = True, "gradient"
            break
        if v @ v >= guard_sq:
            reason = "separable/unbounded"
            break
        if iterations >= max_iter:
            reason = "max_iter"
            break

        hess = (prob.h_mat * _curvature(u, im)) @ prob.h_mat.T
        damping = 1e-10 * np.trace(hess) / n + 1e-300
        try:
            step = -np.linalg.solve(hess + damping * eye, grad)
        except np.linalg.LinAlgError:
            step = -grad
        slope = float(grad @ step)
        if not slope < 0:
            step, slope = -grad, -gnorm ** 2

        t = 1.0
        while True:
            v_new = v + t * step
            u_new = _margins(v_new, prob)
            f_new = float(-np.sum(log_std_normal_cdf(u_new)))
            if f_new <= f + armijo * t * slope or t < 1e-16:
                break
            t *= backtrack
        if t < 1e-16:
            reason = "line_search"
            break
        v, u, f = v_new, u_new, f_new
        iterations += 1

    return MlSolution(
        v_star=v,
        objective=f,
        iterations=iterations,
        converged=converged,
        grad_norm=gnorm,
        reason=reason,
    )


def check_feasibility(v_star, sigma_e):
    """True iff ||v*||^2 < 1 / sigma_e^2 (always true when sigma_e == 0)."""
    if sigma_e == 0:
        return True
    v_star = np.asarray(v_star, dtype=float)
    return bool(float(v_star @ v_star) * sigma_e ** 2 < 1.0)


def recover_amplitudes(v_star, sigma_e, sigma_n):
    v_star = np.asarray(v_star, dtype=float)
    if not check_feasibility(v_star, sigma_e):
        raise ValueError("v_star is infeasible: ||v*||^2 >= 1 / sigma_e^2")
    return sigma_n * v_star / math.sqrt(1.0 - sigma_e ** 2 * float(v_star @ v_star))


def forward_map(w, sigma_e, sigma_n):
    """Amplitudes to surrogate variable: v = w / sqrt(||w||^2 sigma_e^2 + sigma_n^2)."""
    w = np.asarray(w, dtype=float)
    return w / math.sqrt(float(w @ w) * sigma_e ** 2 + sigma_n ** 2)


def project_feasible(v, sigma_e, eps=1e-3):
    """Shrink ``v`` onto the ball of radius (1 - eps) / sigma_e if outside it."""
    v = np.asarray(v, dtype=float)
    if sigma_e == 0:
        return v.copy()
    radius = (1.0 - eps) / sigma_e
    norm = float(np.linalg.norm(v))
    return v * (radius / norm) if norm >= radius else v.copy()


def embed_solution(w_star, active_index, m):
    w_star = np.asarray(w_star, dtype=float)
    active_index = np.asarray(active_index, dtype=int)
    if active_index.shape != w_star.shape:
        raise ValueError("active_index and w_star lengths differ")
    if active_index.size and (active_index.min() < 0 or active_index.max() >= m):
        raise IndexError(f"active index out of range for length {m}")
    out = np.zeros(m)
    out[active_index] = w_star
    return out
