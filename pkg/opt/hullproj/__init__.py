"""
凸包投影与单纯形约束 QP。

所有离散方法的子问题最终都归结为 min_{λ∈Δ_m} ½λᵀQλ + cᵀλ，
本包提供该 QP 的求解器以及在其之上的投影、KKT 残差与线性最小化 oracle。
"""

from .core import (
    DEFAULT_QP_MAX_ITER,
    DEFAULT_QP_TOL,
    HullProjection,
    SimplexWeights,
    hull_linear_min,
    hull_project,
    kkt_residual,
    project_simplex,
    resolve_implicit_projection,
    simplex_qp,
    simplex_stationarity,
    steepest_direction,
)

__all__ = [
    "DEFAULT_QP_MAX_ITER",
    "DEFAULT_QP_TOL",
    "HullProjection",
    "SimplexWeights",
    "hull_linear_min",
    "hull_project",
    "kkt_residual",
    "project_simplex",
    "resolve_implicit_projection",
    "simplex_qp",
    "simplex_stationarity",
    "steepest_direction",
]
