from __future__ import annotations

from typing import Sequence

import numpy as np
import pytest

from opt.problems import ObjectiveBundle, quadratic_bundle


def isotropic_quadratics(centers: Sequence[Sequence[float]], curvature: float = 1.0) -> ObjectiveBundle:
    """f_j(x) = (curvature/2)‖x − c_j‖²。"""
    centers = [np.asarray(c, dtype=float) for c in centers]
    n = centers[0].size
    return quadratic_bundle([curvature * np.eye(n) for _ in centers], centers)


def linear_bundle(directions: Sequence[Sequence[float]]) -> ObjectiveBundle:
    """f_j(x) = ⟨a_j, x⟩。"""
    A = np.asarray(directions, dtype=float)  # (m, n)
    m, n = A.shape
    return ObjectiveBundle(
        m=m,
        n=n,
        value_oracle=lambda x: A @ x,
        gradient_oracle=lambda x: A.T.copy(),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def scalar_half_square() -> ObjectiveBundle:
    """m = 1, n = 1，f(x) = ½x²。"""
    return isotropic_quadratics([[0.0]])


@pytest.fixture
def quad_pair() -> ObjectiveBundle:
    """两个单位曲率二次函数，中心 (−1, 0) 与 (1, 0)；Pareto 集是两中心之间的线段。"""
    return isotropic_quadratics([[-1.0, 0.0], [1.0, 0.0]])


@pytest.fixture
def random_convex_pair(rng: np.random.Generator) -> ObjectiveBundle:
    n = 5
    hessians = []
    for _ in range(2):
        B = rng.normal(size=(n, n))
        hessians.append(B @ B.T / n + 0.1 * np.eye(n))
    centers = rng.normal(size=(2, n))
    return quadratic_bundle(hessians, centers)
