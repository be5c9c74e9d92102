from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from opt.base import ConvergenceError, InvalidInputError
from opt.problems.core import ObjectiveBundle, eval_jacobian


logger = logging.getLogger("amg_moo.hullproj")

DEFAULT_QP_TOL = 1e-12
DEFAULT_QP_MAX_ITER = 100_000
CLAMP_EPS = 1e-14
POLISH_EVERY = 10
# 原始尺度下 Qλ + c 的舍入噪声约为 eps·scale，残差无法可靠地低于该量级
ROUNDING_FLOOR = 32.0


@dataclass(frozen=True)
class SimplexWeights:
    """单位单纯形 Δ_m 中的一点 λ（所有子问题的对偶变量）。"""

    lam: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.lam < -CLAMP_EPS) or abs(float(self.lam.sum()) - 1.0) > 1e-12:
            raise InvalidInputError(f"λ 不在单纯形上：{self.lam}")


@dataclass(frozen=True)
class HullProjection:
    """投影结果：point = P·λ，qp_kkt 为子问题的驻点残差。"""

    point: np.ndarray
    weights: SimplexWeights
    qp_kkt: float


def project_simplex(v: np.ndarray) -> np.ndarray:
    """基于排序的 Δ_m 欧氏投影，O(m log m)，结果精确落在单纯形上。"""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


def simplex_stationarity(Q: np.ndarray, c: np.ndarray, lam: np.ndarray) -> float:
    """驻点残差 ‖λ − Π_Δ(λ − (Qλ + c))‖。"""
    return float(np.linalg.norm(lam - project_simplex(lam - (Q @ lam + c))))


def _face_polish(Q: np.ndarray, c: np.ndarray, support: np.ndarray) -> Optional[np.ndarray]:
    """在给定支撑集对应的面上解等式约束 KKT 系统；不可行时返回 None。"""
    k = support.size
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = Q[np.ix_(support, support)]
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    rhs = np.concatenate([-c[support], [1.0]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    lam_s = sol[:k]
    if not np.all(np.isfinite(lam_s)) or np.any(lam_s < -CLAMP_EPS):
        return None
    cand = np.zeros(c.size)
    cand[support] = np.maximum(lam_s, 0.0)
    total = cand.sum()
    if total <= 0:
        return None
    return cand / total


def _validate_qp(Q: np.ndarray, c: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or c.shape != (Q.shape[0],):
        raise InvalidInputError(f"Q 应为 m×m、c 应为长度 m，实际为 {Q.shape} 与 {c.shape}")
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(c))):
        raise InvalidInputError("Q 或 c 含非有限值")
    if not 1e-14 <= tol <= 1e-6:
        raise InvalidInputError(f"tol 必须在 [1e-14, 1e-6] 内，实际为 {tol}")
    q_scale = float(np.abs(Q).max())
    if float(np.abs(Q - Q.T).max()) > 1e-10 * max(q_scale, np.finfo(float).tiny):
        raise InvalidInputError("Q 不对称")
    return Q, c


def _solve_simplex_qp(
    Q: np.ndarray,
    c: np.ndarray,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, float]:
    Q, c = _validate_qp(Q, c, tol)
    m = c.size
    if m == 1:
        return np.ones(1), 0.0

    # 迭代在归一化后的问题上进行，停止判据与返回的残差都按原始 (Q, c) 计算
    scale = max(float(np.abs(Q).max()), float(np.abs(c).max()))
    if scale == 0.0:
        return np.full(m, 1.0 / m), 0.0
    Q = 0.5 * (Q + Q.T)
    Qs = Q / scale
    cs = c / scale
    step = 1.0 / (float(np.abs(Qs).sum(axis=0).max()) + 1e-12)
    target = max(tol, ROUNDING_FLOOR * np.finfo(float).eps * scale * m)
    if target > tol:
        logger.debug("simplex_qp: tol=%.1e 低于舍入下限，按 %.3e 判停", tol, target)

    lam = np.full(m, 1.0 / m)
    res = simplex_stationarity(Q, c, lam)
    best, best_res = lam, res
    it = 0
    while res > target and it < max_iter:
        if it % POLISH_EVERY == 0:
            grad_point = project_simplex(lam - (Qs @ lam + cs))
            for support in {tuple(np.flatnonzero(lam > 0)), tuple(np.flatnonzero(grad_point > 0))}:
                cand = _face_polish(Qs, cs, np.array(support, dtype=int))
                if cand is not None:
                    cand_res = simplex_stationarity(Q, c, cand)
                    if cand_res < res:
                        lam, res = cand, cand_res
            if res <= target:
                break
        lam = project_simplex(lam - step * (Qs @ lam + cs))
        res = simplex_stationarity(Q, c, lam)
        if res < best_res:
            best, best_res = lam, res
        it += 1

    if res > target:
        if best_res <= target:
            lam, res = best, best_res
        else:
            logger.warning("simplex_qp 未收敛：m=%d, iters=%d, residual=%.3e", m, it, best_res)
            raise ConvergenceError(
                f"simplex_qp 在 {max_iter} 次迭代内未达到 tol={target:g}（残差 {best_res:.3e}）",
                best=best,
                residual=best_res,
            )

    lam = np.where(lam < CLAMP_EPS, 0.0, lam)
    lam = lam / lam.sum()
    return lam, simplex_stationarity(Q, c, lam)


def simplex_qp(
    Q: np.ndarray,
    c: np.ndarray,
    tol: float = DEFAULT_QP_TOL,
    max_iter: int = DEFAULT_QP_MAX_ITER,
) -> SimplexWeights:
    """
    求解 min_{λ∈Δ_m} ½λᵀQλ + cᵀλ。

    说明：
    - 投影梯度法，固定步长 1/(‖Q‖₁+ε)，单纯形投影为精确的排序算法；
    - 每隔若干步在当前支撑集上做一次面上 KKT 求解，仅在可行且残差更小时采用；
    - 停止判据是原始 (Q, c) 上的驻点残差 ≤ max(tol, 32·eps·scale·m)，scale = max(|Q|, |c|)；
    - 输出中小于 1e-14 的分量置零后重新归一化。
    """
    lam, _ = _solve_simplex_qp(Q, c, tol, max_iter)
    return SimplexWeights(lam=lam)


def hull_project(
    P: np.ndarray,
    w: np.ndarray,
    tol: float = DEFAULT_QP_TOL,
    max_iter: int = DEFAULT_QP_MAX_ITER,
) -> HullProjection:
    """w 到 conv{p_1, …, p_m}（P 的列）的欧氏投影，经由 Q = PᵀP、c = −Pᵀw 的对偶 QP。"""
    P = np.asarray(P, dtype=float)
    w = np.asarray(w, dtype=float)
    if P.ndim != 2 or w.shape != (P.shape[0],):
        raise InvalidInputError(f"P 应为 n×m、w 应为长度 n，实际为 {P.shape} 与 {w.shape}")
    Q = P.T @ P
    c = -(P.T @ w)
    lam, res = _solve_simplex_qp(Q, c, tol, max_iter)
    return HullProjection(point=P @ lam, weights=SimplexWeights(lam=lam), qp_kkt=res)


def kkt_residual(bundle: ObjectiveBundle, x: np.ndarray, tol: float = DEFAULT_QP_TOL) -> float:
    """KKT 残差 ‖proj_{C(x)}(0)‖，C(x) = conv{∇f_j(x)}；为 0 当且仅当 x 是 Pareto 临界点。"""
    P = eval_jacobian(bundle, x)
    return float(np.linalg.norm(hull_project(P, np.zeros(bundle.n), tol).point))


def steepest_direction(bundle: ObjectiveBundle, x: np.ndarray, tol: float = DEFAULT_QP_TOL) -> np.ndarray:
    """多目标最速下降方向 d(x) = −proj_{C(x)}(0)。"""
    P = eval_jacobian(bundle, x)
    if bundle.m == 1:
        return -P[:, 0].copy()
    return -hull_project(P, np.zeros(bundle.n), tol).point


def hull_linear_min(P: np.ndarray, g: np.ndarray) -> Tuple[int, np.ndarray]:
    """线性最小化 oracle：返回使 ⟨g, p_j⟩ 最小的列序号（并列取最小序号）及该列。"""
    P = np.asarray(P, dtype=float)
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("g 含非有限分量")
    j = int(np.argmin(P.T @ g))
    return j, P[:, j].copy()


def resolve_implicit_projection(
    P: np.ndarray,
    a: float,
    b: float,
    u: np.ndarray,
    w: np.ndarray,
    tol: float = DEFAULT_QP_TOL,
) -> np.ndarray:
    """
    求解隐式方程 a·x = u − proj_C(w − b·x)，C = conv(P 的列)。

    - a > b：x = (u − proj_C((a·w − b·u)/(a − b)))/a；
    - a = b：x = (u − v)/a，v 取 argmin_{v∈C}⟨v, u − w⟩ 的最小序号顶点。
    """
    if not a > 0:
        raise InvalidInputError(f"a 必须为正，实际为 {a}")
    if not 0 <= b <= a:
        raise InvalidInputError(f"b 必须在 [0, a] 内，实际为 b={b}, a={a}")
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if a > b:
        v = hull_project(P, (a * w - b * u) / (a - b), tol).point
    else:
        _, v = hull_linear_min(P, u - w)
    return (u - v) / a
