from __future__ import annotations

import numpy as np
import pytest

from opt.base import ConvergenceError, InvalidInputError
from opt.hullproj import (
    hull_linear_min,
    hull_project,
    kkt_residual,
    project_simplex,
    resolve_implicit_projection,
    simplex_qp,
    simplex_stationarity,
    steepest_direction,
)
from opt.problems import eval_jacobian

from conftest import isotropic_quadratics


def _objective(Q, c, lam):
    return 0.5 * lam @ Q @ lam + c @ lam


def _simplex_grid_3(step=1e-3):
    k = int(round(1 / step))
    i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    mask = i + j <= k
    l1, l2 = i[mask] * step, j[mask] * step
    return np.column_stack([l1, l2, np.clip(1.0 - l1 - l2, 0.0, None)])


# ------------------------- simplex projection ------------------------- #
def test_project_simplex_basic_cases():
    np.testing.assert_allclose(project_simplex(np.array([0.5, 0.5])), [0.5, 0.5])
    np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    np.testing.assert_allclose(project_simplex(np.array([0.0, 0.0, 0.0])), np.full(3, 1 / 3))


def test_project_simplex_lands_on_simplex(rng):
    for _ in range(50):
        p = project_simplex(rng.normal(scale=3.0, size=5))
        assert p.min() >= 0.0
        assert p.sum() == pytest.approx(1.0, abs=1e-14)


# ------------------------- simplex_qp ------------------------- #
def test_simplex_qp_singleton():
    np.testing.assert_array_equal(simplex_qp(np.array([[3.0]]), np.array([-7.0])).lam, [1.0])


def test_simplex_qp_symmetric_instance():
    np.testing.assert_allclose(simplex_qp(np.eye(3), np.zeros(3)).lam, np.full(3, 1 / 3), atol=1e-14)


def test_simplex_qp_matches_grid_brute_force(rng):
    grid = _simplex_grid_3()
    for _ in range(5):
        B = 0.5 * rng.normal(size=(3, 3))
        Q = B @ B.T
        c = rng.normal(size=3)
        lam = simplex_qp(Q, c).lam
        grid_min = np.min(0.5 * np.einsum("ki,ij,kj->k", grid, Q, grid) + grid @ c)
        assert _objective(Q, c, lam) <= grid_min + 1e-12
        assert abs(_objective(Q, c, lam) - grid_min) <= 1e-5


def test_simplex_qp_output_is_a_stationary_simplex_point(rng):
    for _ in range(20):
        P = rng.normal(size=(4, 3))
        Q, c = P.T @ P, rng.normal(size=3)
        lam = simplex_qp(Q, c).lam
        assert lam.min() >= 0.0
        assert lam.sum() == pytest.approx(1.0, abs=1e-12)
        assert simplex_stationarity(Q, c, lam) <= 1e-10


@pytest.mark.parametrize("magnitude", [1e3, 1e-3])
def test_simplex_qp_tolerance_holds_on_unscaled_problem(rng, magnitude):
    for _ in range(200):
        B = rng.normal(size=(3, 3))
        Q = magnitude * (B @ B.T)
        c = magnitude * rng.normal(size=3)
        lam = simplex_qp(Q, c, tol=1e-9).lam
        assert simplex_stationarity(Q, c, lam) <= 1e-9


def test_hull_project_reports_unscaled_residual(rng):
    for _ in range(20):
        P = 30.0 * rng.normal(size=(5, 3))
        w = 30.0 * rng.normal(size=5)
        proj = hull_project(P, w, tol=1e-9)
        Q, c = P.T @ P, -(P.T @ w)
        assert proj.qp_kkt == pytest.approx(simplex_stationarity(Q, c, proj.weights.lam), abs=1e-12)
        assert proj.qp_kkt <= 1e-9


def test_simplex_qp_never_worse_than_best_vertex(rng):
    for _ in range(20):
        P = rng.normal(size=(3, 4))
        Q, c = P.T @ P, rng.normal(size=4)
        lam = simplex_qp(Q, c).lam
        best_vertex = min(0.5 * Q[i, i] + c[i] for i in range(4))
        assert _objective(Q, c, lam) <= best_vertex + 1e-12


def test_simplex_qp_rejects_nonsymmetric_and_bad_tol():
    with pytest.raises(InvalidInputError):
        simplex_qp(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))
    with pytest.raises(InvalidInputError):
        simplex_qp(np.eye(2), np.zeros(2), tol=1e-3)
    with pytest.raises(InvalidInputError):
        simplex_qp(np.eye(2), np.zeros(2), tol=1e-16)


def test_simplex_qp_budget_exhaustion_carries_best_iterate():
    with pytest.raises(ConvergenceError) as excinfo:
        simplex_qp(np.diag([1.0, 2.0]), np.zeros(2), max_iter=0)
    err = excinfo.value
    assert err.residual > 0
    assert err.best.sum() == pytest.approx(1.0)


def test_simplex_qp_degenerate_duplicate_columns():
    P = np.array([[1.0, 1.0, 3.0], [1.0, 1.0, 0.0]])
    res = hull_project(P, np.zeros(2))
    np.testing.assert_allclose(res.point, P @ res.weights.lam, atol=1e-12)
    np.testing.assert_allclose(res.point, [1.0, 1.0], atol=1e-9)


# ------------------------- hull_project ------------------------- #
def test_hull_project_unit_segment():
    res = hull_project(np.array([[1.0, 0.0], [0.0, 1.0]]), np.zeros(2))
    np.testing.assert_allclose(res.point, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(res.weights.lam, [0.5, 0.5], atol=1e-12)


def test_hull_project_interior_point():
    res = hull_project(np.array([[-1.0, 1.0], [0.0, 0.0]]), np.zeros(2))
    np.testing.assert_allclose(res.point, [0.0, 0.0], atol=1e-12)


def test_hull_project_collinear_nearest_vertex():
    res = hull_project(np.array([[2.0, 4.0], [0.0, 0.0]]), np.zeros(2))
    np.testing.assert_allclose(res.point, [2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(res.weights.lam, [1.0, 0.0], atol=1e-12)


def test_hull_project_variational_inequality(rng):
    for _ in range(30):
        P = rng.normal(size=(3, 4))
        w = rng.normal(scale=2.0, size=3)
        res = hull_project(P, w)
        np.testing.assert_allclose(res.point, P @ res.weights.lam, atol=1e-12)
        for j in range(4):
            assert (P[:, j] - res.point) @ (w - res.point) <= 1e-9 * (1 + np.linalg.norm(w))


def test_hull_project_idempotent_and_nonexpansive(rng):
    for _ in range(20):
        P = rng.normal(size=(3, 3))
        w1, w2 = rng.normal(size=3), rng.normal(size=3)
        p1 = hull_project(P, w1).point
        p2 = hull_project(P, w2).point
        np.testing.assert_allclose(hull_project(P, p1).point, p1, atol=1e-10)
        assert np.linalg.norm(p1 - p2) <= np.linalg.norm(w1 - w2) + 1e-10


def test_translation_decomposition(rng):
    for _ in range(20):
        P = rng.normal(size=(3, 3))
        x = rng.normal(size=3)
        lhs = x + hull_project(P, -x).point
        rhs = hull_project(P + x[:, None], np.zeros(3)).point
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


# ------------------------- KKT 残差与最速下降方向 ------------------------- #
def test_kkt_residual_examples():
    single = isotropic_quadratics([[1.0, -1.0]])
    assert kkt_residual(single, np.array([1.0, -1.0])) == pytest.approx(0.0, abs=1e-14)

    # ∇f_1(0) = (1, 0)，∇f_2(0) = (0, 1)
    pair = isotropic_quadratics([[-1.0, 0.0], [0.0, -1.0]])
    assert kkt_residual(pair, np.zeros(2)) == pytest.approx(np.sqrt(2) / 2, abs=1e-12)

    opposed = isotropic_quadratics([[-1.0, 0.0], [1.0, 0.0]])
    assert kkt_residual(opposed, np.zeros(2)) == pytest.approx(0.0, abs=1e-12)


def test_steepest_direction_examples():
    pair = isotropic_quadratics([[-2.0, 0.0], [0.0, -2.0]])
    np.testing.assert_allclose(steepest_direction(pair, np.zeros(2)), [-1.0, -1.0], atol=1e-12)

    opposed = isotropic_quadratics([[-1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(steepest_direction(opposed, np.zeros(2)), [0.0, 0.0], atol=1e-12)

    single = isotropic_quadratics([[0.3, -0.7]])
    x = np.array([1.0, 2.0])
    np.testing.assert_array_equal(steepest_direction(single, x), -eval_jacobian(single, x)[:, 0])


def test_steepest_direction_is_common_descent(random_convex_pair, rng):
    for _ in range(20):
        x = rng.normal(size=5)
        d = steepest_direction(random_convex_pair, x)
        for g in eval_jacobian(random_convex_pair, x).T:
            assert g @ d <= -(d @ d) + 1e-9


# ------------------------- 线性最小化 oracle ------------------------- #
def test_hull_linear_min_examples():
    idx, v = hull_linear_min(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 2.0]))
    assert idx == 0
    np.testing.assert_array_equal(v, [1.0, 0.0])

    idx, _ = hull_linear_min(np.ones((2, 3)), np.array([0.5, -0.2]))
    assert idx == 0


def test_hull_linear_min_beats_sampled_hull_points(rng):
    P = rng.normal(size=(3, 5))
    g = rng.normal(size=3)
    _, v = hull_linear_min(P, g)
    lam = rng.dirichlet(np.ones(5), size=10_000)
    assert g @ v <= np.min((lam @ P.T) @ g) + 1e-12


def test_hull_linear_min_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        hull_linear_min(np.eye(2), np.array([np.nan, 0.0]))


# ------------------------- 隐式投影方程 ------------------------- #
def _fixed_point_residual(P, a, b, u, w, x):
    return np.linalg.norm(a * x - u + hull_project(P, w - b * x).point)


def test_resolver_singleton_hull():
    P = np.array([[1.0], [2.0]])
    u, w = np.array([3.0, -1.0]), np.array([0.5, 0.5])
    for b in (0.0, 1.0, 2.0):
        np.testing.assert_allclose(resolve_implicit_projection(P, 2.0, b, u, w), (u - P[:, 0]) / 2.0)


def test_resolver_equal_coefficients_uses_vertex():
    P = np.array([[1.0, 0.0], [0.0, 1.0]])
    w = np.array([0.0, 0.0])
    u = np.array([1.0, 2.0])
    x = resolve_implicit_projection(P, 1.0, 1.0, u, w)
    np.testing.assert_allclose(x, u - np.array([1.0, 0.0]))
    assert _fixed_point_residual(P, 1.0, 1.0, u, w, x) <= 1e-9 * (1 + np.linalg.norm(u) + np.linalg.norm(w))


def test_resolver_general_branch(rng):
    for _ in range(20):
        P = rng.normal(size=(3, 2))
        u, w = rng.normal(size=3), rng.normal(size=3)
        x = resolve_implicit_projection(P, 2.0, 1.0, u, w)
        assert _fixed_point_residual(P, 2.0, 1.0, u, w, x) <= 1e-9 * (1 + np.linalg.norm(u) + np.linalg.norm(w))


@pytest.mark.parametrize("a, b", [(1.0, 2.0), (0.0, 0.0), (-1.0, -2.0), (1.0, -0.1)])
def test_resolver_rejects_bad_coefficients(a, b):
    with pytest.raises(InvalidInputError):
        resolve_implicit_projection(np.eye(2), a, b, np.zeros(2), np.zeros(2))
