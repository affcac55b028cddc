import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onebit_bht.estimator import (
    EmptySupportError,
    ReducedProblem,
    check_feasibility,
    embed_solution,
    forward_map,
    p2_gradient,
    p2_hessian,
    p2_objective,
    project_feasible,
    recover_amplitudes,
    reduce_problem,
    solve_p2,
)
from onebit_bht.numerics import finite_difference_gradient, log_std_normal_cdf

from conftest import random_reduced_problem


def scalar_problem(ys, hs, sigma_e=0.1):
    return ReducedProblem(np.array([hs], dtype=float), np.array(ys, dtype=float),
                          np.array([0]), sigma_e, 0.1)


def grid_minimum(prob, lo=-5.0, hi=5.0, step=1e-4):
    grid = np.arange(lo, hi + step / 2, step)
    if prob.n_active == 1:
        pts = grid[:, None]
    else:
        coarse = np.arange(lo, hi + 0.05 / 2, 0.05)
        g1, g2 = np.meshgrid(coarse, coarse, indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
    vals = -np.sum(log_std_normal_cdf((pts @ prob.h_mat) * prob.y), axis=1)
    best = int(np.argmin(vals))
    if prob.n_active == 2:
        # refine around the coarse minimum on a 1e-3 grid
        c = pts[best]
        fine = np.arange(-0.05, 0.05 + 5e-4, 1e-3)
        g1, g2 = np.meshgrid(c[0] + fine, c[1] + fine, indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
        vals = -np.sum(log_std_normal_cdf((pts @ prob.h_mat) * prob.y), axis=1)
        best = int(np.argmin(vals))
    return pts[best], vals[best]


def test_reduce_identity_and_single(rng):
    a_mat = rng.standard_normal((5, 7))
    y = np.sign(rng.standard_normal(7))
    full = reduce_problem(a_mat, y, np.ones(5), 0.1, 0.1)
    np.testing.assert_array_equal(full.h_mat, a_mat)
    np.testing.assert_array_equal(full.active_index, np.arange(5))
    third = reduce_problem(a_mat, y, np.eye(5)[2], 0.1, 0.1)
    np.testing.assert_array_equal(third.h_mat, a_mat[[2]])


def test_reduce_round_trip(rng):
    a_mat = rng.standard_normal((10, 12))
    q = np.zeros(10, dtype=int)
    q[rng.choice(10, 4, replace=False)] = 1
    prob = reduce_problem(a_mat, np.ones(12), q, 0.1, 0.1)
    back = np.zeros_like(a_mat)
    back[prob.active_index] = prob.h_mat
    np.testing.assert_array_equal(back[q == 1], a_mat[q == 1])
    assert list(prob.active_index) == sorted(prob.active_index)


def test_reduce_empty_support():
    with pytest.raises(EmptySupportError):
        reduce_problem(np.ones((3, 4)), np.ones(4), np.zeros(3), 0.1, 0.1)


def test_objective_examples(rng):
    prob = random_reduced_problem(rng, 3, 17)
    assert p2_objective(np.zeros(3), prob) == pytest.approx(17 * math.log(2))
    assert p2_objective(np.array([1.0]), scalar_problem([1], [1])) == pytest.approx(0.1727538, abs=1e-7)


def test_objective_positive_and_convex():
    rng = np.random.default_rng(3)
    for _ in range(100):
        prob = random_reduced_problem(rng, 3, 20)
        v1, v2 = rng.normal(0, 3, 3), rng.normal(0, 3, 3)
        lam = rng.uniform(0.01, 0.99)
        f1, f2 = p2_objective(v1, prob), p2_objective(v2, prob)
        assert f1 > 0 and math.isfinite(f1)
        assert p2_objective(lam * v1 + (1 - lam) * v2, prob) <= lam * f1 + (1 - lam) * f2 + 1e-10


def test_gradient_at_zero(rng):
    prob = random_reduced_problem(rng, 4, 25)
    expected = -math.sqrt(2 / math.pi) * (prob.h_mat @ prob.y)
    np.testing.assert_allclose(p2_gradient(np.zeros(4), prob), expected, rtol=1e-14)


def test_gradient_symmetric_data_vanishes(rng):
    h = rng.standard_normal((3, 10))
    y = np.sign(rng.standard_normal(10))
    prob = ReducedProblem(np.hstack([h, h]), np.concatenate([y, -y]), np.arange(3), 0.1, 0.1)
    np.testing.assert_allclose(p2_gradient(np.zeros(3), prob), 0.0, atol=1e-15)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(17)
    for _ in range(100):
        prob = random_reduced_problem(rng, int(rng.integers(1, 6)), int(rng.integers(5, 41)))
        v = rng.normal(0, 0.5, prob.n_active)
        fd = finite_difference_gradient(lambda x: p2_objective(x, prob), v, h=1e-5)
        an = p2_gradient(v, prob)
        assert np.linalg.norm(an - fd) <= 1e-5 * np.linalg.norm(an)


def test_hessian_matches_finite_differences(rng):
    prob = random_reduced_problem(rng, 3, 30)
    v = rng.normal(0, 0.5, 3)
    fd = np.array([finite_difference_gradient(lambda x: p2_gradient(x, prob)[i], v) for i in range(3)])
    np.testing.assert_allclose(p2_hessian(v, prob), fd, rtol=1e-5, atol=1e-7)


def test_hessian_psd():
    rng = np.random.default_rng(8)
    for _ in range(100):
        prob = random_reduced_problem(rng, 4, 30)
        v = rng.normal(0, 5, 4)
        d = rng.standard_normal(4)
        assert d @ p2_hessian(v, prob) @ d >= -1e-10


def test_solver_symmetric_scalar():
    sol = solve_p2(scalar_problem([1, -1], [1, 1]))
    assert sol.converged
    assert sol.v_star[0] == pytest.approx(0.0, abs=1e-10)
    assert sol.objective == pytest.approx(2 * math.log(2))


def test_solver_against_grid_scalar():
    prob = scalar_problem([1, -1], [1, 2])
    sol = solve_p2(prob)
    v_grid, f_grid = grid_minimum(prob)
    assert sol.converged
    assert abs(sol.v_star[0] - v_grid[0]) <= 1e-3
    assert sol.objective <= f_grid + 1e-12


def test_solver_separable_trips_guard():
    sol = solve_p2(scalar_problem([1], [1]))
    assert not sol.converged
    assert sol.reason == "separable/unbounded"
    assert sol.v_star @ sol.v_star >= 4 / 0.1 ** 2


def test_solver_matches_grid_oracle_1d_2d():
    rng = np.random.default_rng(99)
    checked = 0
    while checked < 20:
        n = 1 + checked % 2
        prob = random_reduced_problem(rng, n, int(rng.integers(6, 20)))
        sol = solve_p2(prob)
        v_grid, f_grid = grid_minimum(prob)
        if not sol.converged or np.max(np.abs(sol.v_star)) > 4.5:
            continue
        assert abs(sol.objective - f_grid) <= 1e-6
        assert np.linalg.norm(sol.v_star - v_grid) <= 1e-3
        assert sol.grad_norm <= 1e-8
        checked += 1


def test_solver_scale_covariance(rng):
    for _ in range(5):
        prob = random_reduced_problem(rng, 3, 40)
        sol = solve_p2(prob)
        if not sol.converged:
            continue
        c = 2.5
        scaled = ReducedProblem(prob.h_mat * c, prob.y, prob.active_index, 0.1, 0.1)
        sol_c = solve_p2(scaled)
        np.testing.assert_allclose(sol_c.v_star, sol.v_star / c, rtol=1e-6, atol=1e-8)


def test_solver_validates_arguments(rng):
    prob = random_reduced_problem(rng, 2, 10)
    with pytest.raises(ValueError):
        solve_p2(prob, tol=0)
    with pytest.raises(ValueError):
        solve_p2(prob, max_iter=0)


def test_solver_reports_max_iter(rng):
    prob = random_reduced_problem(rng, 3, 40)
    sol = solve_p2(prob, tol=1e-300, max_iter=2)
    assert sol.iterations == 2
    assert sol.reason in ("max_iter", "line_search", "gradient")


@pytest.mark.parametrize("norm_sq, sigma_e, feasible", [
    (50.0, 0.1, True),
    (100.0, 0.1, False),
    (1e12, 0.0, True),
])
def test_feasibility(norm_sq, sigma_e, feasible):
    v = np.zeros(3)
    v[0] = math.sqrt(norm_sq)
    assert check_feasibility(v, sigma_e) is feasible


def test_recover_amplitudes_examples():
    np.testing.assert_array_equal(recover_amplitudes(np.zeros(3), 0.1, 0.1), np.zeros(3))
    v = np.array([5.0, 5.0])  # ||v||^2 = 50
    np.testing.assert_allclose(recover_amplitudes(v, 0.1, 0.1), 0.1 / math.sqrt(0.5) * v)
    np.testing.assert_allclose(recover_amplitudes(v, 0.0, 0.3), 0.3 * v)
    with pytest.raises(ValueError):
        recover_amplitudes(np.array([10.0]), 0.1, 0.1)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.0, 0.999))
def test_round_trip(seed, sigma_e, sigma_n, frac):
    d = np.random.default_rng(seed).standard_normal(4)
    v = d / np.linalg.norm(d) * frac / sigma_e
    back = forward_map(recover_amplitudes(v, sigma_e, sigma_n), sigma_e, sigma_n)
    assert np.linalg.norm(back - v) <= 1e-10 * max(np.linalg.norm(v), 1e-300)


def test_project_feasible():
    v = np.array([30.0, 40.0])
    p = project_feasible(v, 0.1)
    assert np.linalg.norm(p) == pytest.approx(0.999 / 0.1)
    assert check_feasibility(p, 0.1)
    np.testing.assert_array_equal(project_feasible(np.array([1.0, 1.0]), 0.1), [1.0, 1.0])


def test_embed_solution():
    np.testing.assert_array_equal(embed_solution([5.0], [2], 5), [0, 0, 5, 0, 0])
    w = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(embed_solution(w, [0, 1, 2], 3), w)
    with pytest.raises(IndexError):
        embed_solution([1.0], [5], 5)
    with pytest.raises(ValueError):
        embed_solution([1.0, 2.0], [0], 5)


def test_reduce_then_embed_reproduces_signal(rng):
    s = np.zeros(12)
    s[[1, 4, 9]] = rng.standard_normal(3)
    prob = reduce_problem(rng.standard_normal((12, 5)), np.ones(5), s != 0, 0.1, 0.1)
    np.testing.assert_array_equal(embed_solution(s[prob.active_index], prob.active_index, 12), s)
