"""Quick oracle checks runnable from an installed package (``onebit-bht selftest``).

Each check compares a fast code path against an independent slow one on
small random instances and returns ``(name, passed, detail)``.
"""
import math

import numpy as np
from scipy.special import log_ndtr

from .detector import activity_scores
from .estimator import (
    ReducedProblem,
    forward_map,
    p2_gradient,
    p2_hessian,
    p2_objective,
    recover_amplitudes,
    solve_p2,
)
from .model import sign_quantize
from .numerics import finite_difference_gradient, inverse_mills, log_std_normal_cdf

# (u, log Phi(u), phi(u)/Phi(u)) from 60-digit arithmetic.
REFERENCE_VALUES = (
    (-30.0, -454.3212439563432, 30.033259667433677),
    (-10.0, -53.231285150512471, 10.098093233962512),
    (-1.0, -1.8410216450092635, 1.5251352761609812),
    (0.0, -0.69314718055994531, 0.79788456080286536),
    (1.0, -0.17275377902344989, 0.28759997093917836),
    (5.0, -2.8665161296376359e-7, 1.4867199409049057e-6),
)


def _random_problem(rng, n_active, n_meas, sigma_e=0.1, sigma_n=0.1):
    return ReducedProblem(
        h_mat=rng.standard_normal((n_active, n_meas)),
        y=sign_quantize(rng.standard_normal(n_meas)),
        active_index=np.arange(n_active),
        sigma_e=sigma_e,
        sigma_n=sigma_n,
    )


def check_kernels():
    worst = 0.0
    for u, log_cdf, mills in REFERENCE_VALUES:
        worst = max(worst, abs(log_std_normal_cdf(u) - log_cdf) / abs(log_cdf),
                    abs(inverse_mills(u) - mills) / mills)
    return "stable Gaussian kernels", worst <= 1e-9, f"max rel err {worst:.2e}"


def check_gradient(rng, n=20):
    worst = 0.0
    for _ in range(n):
        prob = _random_problem(rng, int(rng.integers(1, 6)), int(rng.integers(5, 41)))
        v = rng.normal(0.0, 0.5, prob.n_active)
        fd = finite_difference_gradient(lambda x: p2_objective(x, prob), v, h=1e-5)
        an = p2_gradient(v, prob)
        worst = max(worst, np.linalg.norm(an - fd) / max(np.linalg.norm(an), 1e-12))
    return "objective gradient vs finite differences", worst <= 1e-5, f"max rel err {worst:.2e}"


def check_convexity(rng, n=20):
    worst = math.inf
    for _ in range(n):
        prob = _random_problem(rng, 4, 30)
        v = rng.normal(0.0, 2.0, 4)
        d = rng.standard_normal(4)
        worst = min(worst, float(d @ p2_hessian(v, prob) @ d))
    return "Hessian positive semidefinite", worst >= -1e-10, f"min d'Hd {worst:.2e}"


def check_scores(rng, n=20):
    worst = 0.0
    for _ in range(n):
        m, n_meas = int(rng.integers(1, 11)), int(rng.integers(1, 51))
        a_mat = rng.standard_normal((m, n_meas))
        y = sign_quantize(rng.standard_normal(n_meas))
        s = rng.standard_normal(m) * (rng.random(m) < 0.6)
        sigma_z = float(rng.uniform(0.1, 2.0))
        fast = activity_scores(y, a_mat, s, sigma_z)
        for j in range(m):
            s_minus = s.copy()
            s_minus[j] = 0.0
            full = sum(log_ndtr(y[i] * (a_mat[:, i] @ s) / sigma_z) for i in range(n_meas))
            reduced = sum(log_ndtr(y[i] * (a_mat[:, i] @ s_minus) / sigma_z) for i in range(n_meas))
            worst = max(worst, abs(fast[j] - (full - reduced)))
    return "incremental LLR scores vs brute force", worst <= 1e-10, f"max abs err {worst:.2e}"


def check_round_trip(rng, n=20):
    worst = 0.0
    for _ in range(n):
        sigma_e, sigma_n = rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5)
        d = rng.standard_normal(5)
        v = d / np.linalg.norm(d) * rng.uniform(0.0, 0.999) / sigma_e
        back = forward_map(recover_amplitudes(v, sigma_e, sigma_n), sigma_e, sigma_n)
        worst = max(worst, np.linalg.norm(back - v) / max(np.linalg.norm(v), 1e-300))
    return "amplitude map round trip", worst <= 1e-10, f"max rel err {worst:.2e}"


def check_solver(rng, n=5):
    worst = 0.0
    grid = np.arange(-5.0, 5.0 + 5e-5, 1e-4)
    for _ in range(n):
        h = rng.uniform(0.2, 2.0, 8) * sign_quantize(rng.standard_normal(8))
        y = sign_quantize(rng.standard_normal(8))
        y[0], h[0], y[1], h[1] = 1.0, 1.0, -1.0, 1.0
        prob = ReducedProblem(h[None, :], y, np.array([0]), 0.1, 0.1)
        sol = solve_p2(prob)
        values = -np.sum(log_std_normal_cdf(np.outer(grid, h) * y), axis=1)
        worst = max(worst, abs(sol.objective - values.min()))
    return "Newton solver vs grid search", worst <= 1e-6, f"max objective gap {worst:.2e}"


def run_selftest(seed=0):
    rng = np.random.default_rng(seed)
    return [
        check_kernels(),
        check_gradient(rng),
        check_convexity(rng),
        check_scores(rng),
        check_round_trip(rng),
        check_solver(rng),
    ]
