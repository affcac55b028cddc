"""The two recovery procedures: BHT-MLE (detect support, then ML amplitudes
on the reduced problem, iterated under an alpha schedule) and the plain ML
baseline over all coordinates.
"""
import time
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .detector import (
    SupportEstimate,
    alpha_schedule,
    detect_support,
    estimate_activity_probability,
)
from .estimator import (
    MlSolution,
    check_feasibility,
    embed_solution,
    forward_map,
    project_feasible,
    recover_amplitudes,
    reduce_problem,
    solve_p2,
)
from .model import equivalent_noise_std
from .numerics import least_squares_init

__all__ = [
    "INFEASIBLE_POLICIES",
    "InfeasibleSolutionError",
    "BhtMleConfig",
    "RecoveryResult",
    "run_bht_mle",
    "run_mle_baseline",
]

INFEASIBLE_POLICIES = ("project", "unit_norm", "zero", "abort")

FLAG_INFEASIBLE = "infeasible_projected"
FLAG_INFEASIBLE_ZERO = "infeasible_zeroed"
FLAG_EMPTY_SUPPORT = "empty_support_fallback"
FLAG_NOT_CONVERGED = "solver_not_converged"


class InfeasibleSolutionError(RuntimeError):
    """The surrogate optimum lies outside ||v||^2 < 1/sigma_e^2 and the
    configured policy is ``abort``."""


@dataclass(frozen=True)
class BhtMleConfig:
    n_outer: int = 10
    alpha_0: float = 0.5
    alpha_growth: float = 1.2
    alpha_max: float = 3.0
    solver_tol: float = 1e-8
    solver_max_iter: int = 200
    infeasible_policy: str = "project"

    def __post_init__(self):
        if self.n_outer < 1:
            raise ValueError("n_outer must be >= 1")
        if self.alpha_0 <= 0 or self.alpha_max <= 0 or self.alpha_growth <= 1:
            raise ValueError("need alpha_0 > 0, alpha_max > 0 and alpha_growth > 1")
        if self.infeasible_policy not in INFEASIBLE_POLICIES:
            raise ValueError(
                f"infeasible_policy must be one of {INFEASIBLE_POLICIES}, "
                f"got {self.infeasible_policy!r}"
            )


@dataclass
class RecoveryResult:
    s_hat: np.ndarray
    support: SupportEstimate
    solver: MlSolution
    wall_time: float
    iterations_run: int
    flags: frozenset = frozenset()
    history: List[dict] = field(default_factory=list)


def _amplitudes(sol, sigma_e, sigma_n, policy):
    """Fill ``sol.feasible``/``sol.w_star`` and return (w, flags)."""
    sol.feasible = check_feasibility(sol.v_star, sigma_e)
    flags = set()
    if not sol.converged:
        flags.add(FLAG_NOT_CONVERGED)
    if sol.feasible:
        sol.w_star = recover_amplitudes(sol.v_star, sigma_e, sigma_n)
        return sol.w_star, flags
    if policy == "abort":
        raise InfeasibleSolutionError(
            f"||v*||^2 = {float(sol.v_star @ sol.v_star):.4g} >= 1/sigma_e^2"
        )
    if policy == "zero":
        flags.add(FLAG_INFEASIBLE_ZERO)
        return np.zeros_like(sol.v_star), flags
    flags.add(FLAG_INFEASIBLE)
    if policy == "unit_norm":
        v = sol.v_star / np.linalg.norm(sol.v_star)
        return v, flags
    return recover_amplitudes(project_feasible(sol.v_star, sigma_e), sigma_e, sigma_n), flags


def run_bht_mle(a_mat, y, sigma_e, sigma_n, config=None, s_init=None):
    """Recover a sparse vector from sign measurements ``y`` of ``a_mat.T @ s``.

    Parameters
    ----------
    a_mat : ndarray of shape (m, N)
        Known sensing matrix, one column per measurement.
    y : ndarray of shape (N,)
        Signs in {-1, +1}.
    sigma_e, sigma_n : float
        Known perturbation and additive-noise standard deviations.
    config : BhtMleConfig, optional
    s_init : ndarray of shape (m,), optional
        Starting estimate; defaults to the least-squares solution.

    Returns
    -------
    RecoveryResult
    """
    config = config or BhtMleConfig()
    if sigma_n <= 0:
        raise ValueError("sigma_n must be positive")
    a_mat = np.asarray(a_mat, dtype=float)
    y = np.asarray(y, dtype=float)
    m = a_mat.shape[0]

    start = time.perf_counter()
    s_hat = least_squares_init(a_mat, y) if s_init is None else np.array(s_init, dtype=float)
    v_prev = np.zeros(m)
    history = []
    support = sol = None
    flags = set()
    for k in range(config.n_outer):
        alpha = alpha_schedule(k, config.alpha_0, config.alpha_growth, config.alpha_max)
        p_hat = estimate_activity_probability(s_hat, alpha)
        # The least-squares start has arbitrary scale; use the unit norm of
        # the signal model until an ML estimate exists.
        norm_sq = 1.0 if k == 0 and s_init is None else float(s_hat @ s_hat)
        sigma_z = equivalent_noise_std(norm_sq, sigma_e ** 2, sigma_n ** 2)
        support = detect_support(y, a_mat, s_hat, sigma_z, p_hat)
        flags = set()
        q_hat = support.q_hat
        if not q_hat.any():
            q_hat = np.zeros(m, dtype=np.int8)
            q_hat[int(np.argmax(np.abs(s_hat)))] = 1
            support = SupportEstimate(q_hat, support.scores, support.threshold, support.p_hat)
            flags.add(FLAG_EMPTY_SUPPORT)

        prob = reduce_problem(a_mat, y, q_hat, sigma_e, sigma_n)
        sol = solve_p2(prob, v_prev[prob.active_index], config.solver_tol, config.solver_max_iter)
        w, sol_flags = _amplitudes(sol, sigma_e, sigma_n, config.infeasible_policy)
        flags |= sol_flags

        s_hat = embed_solution(w, prob.active_index, m)
        v_prev = embed_solution(forward_map(w, sigma_e, sigma_n), prob.active_index, m)
        history.append(dict(
            k=k, alpha=alpha, p_hat=p_hat, threshold=support.threshold, sigma_z=sigma_z,
            n_active=prob.n_active, solver_iterations=sol.iterations,
            solver_reason=sol.reason, feasible=sol.feasible, flags=sorted(flags),
        ))

    return RecoveryResult(
        s_hat=s_hat,
        support=support,
        solver=sol,
        wall_time=time.perf_counter() - start,
        iterations_run=config.n_outer,
        flags=frozenset(flags),
        history=history,
    )


def run_mle_baseline(a_mat, y, sigma_e, sigma_n, solver_tol=1e-8, solver_max_iter=200,
                     infeasible_policy="project"):
    """ML estimate over all m coordinates, ignoring sparsity."""
    if sigma_n <= 0:
        raise ValueError("sigma_n must be positive")
    if infeasible_policy not in INFEASIBLE_POLICIES:
        raise ValueError(f"unknown infeasible_policy {infeasible_policy!r}")
    a_mat = np.asarray(a_mat, dtype=float)
    y = np.asarray(y, dtype=float)
    m = a_mat.shape[0]

    start = time.perf_counter()
    s0 = least_squares_init(a_mat, y)
    q_all = np.ones(m, dtype=np.int8)
    prob = reduce_problem(a_mat, y, q_all, sigma_e, sigma_n)
    sol = solve_p2(prob, forward_map(s0, sigma_e, sigma_n), solver_tol, solver_max_iter)
    w, flags = _amplitudes(sol, sigma_e, sigma_n, infeasible_policy)
    s_hat = embed_solution(w, prob.active_index, m)
    elapsed = time.perf_counter() - start

    support = SupportEstimate(q_hat=q_all, scores=np.full(m, np.inf), threshold=-np.inf, p_hat=1.0)
    return RecoveryResult(
        s_hat=s_hat,
        support=support,
        solver=sol,
        wall_time=elapsed,
        iterations_run=1,
        flags=frozenset(flags),
        history=[dict(k=0, n_active=m, solver_iterations=sol.iterations,
                      solver_reason=sol.reason, feasible=sol.feasible, flags=sorted(flags))],
    )
