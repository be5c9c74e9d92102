from __future__ import annotations

"""
离散方法的单步内核：

- SD：多目标最速下降，步长 1/M；
- APG：通过对偶 QP 求解的多目标加速近端梯度；
- AMG-QP：IMEX 格式（γ、x、z 三变量），以及倍增回溯与 SR / ResR 重启。

这里只做“一步”，迭代循环、停止准则与记录见 driver.py。
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np

from opt.base import DomainEvaluationError, InvalidInputError, RunawayBacktrackingError, SolverState
from opt.hullproj import DEFAULT_QP_TOL, hull_project, simplex_qp, steepest_direction
from opt.problems import ObjectiveBundle, eval_jacobian, eval_objectives


logger = logging.getLogger("amg_moo.solvers")

MAX_BACKTRACKS = 60
# 下降条件两侧函数值的舍入误差量级
ROUNDING_SLACK = 8.0 * np.finfo(float).eps

RestartCriterion = Literal["SR", "ResR"]


# ------------------------- 结果结构 ------------------------- #
@dataclass(frozen=True)
class AmgStepResult:
    """
    AMG-QP 一步的完整输出。

    x / z / gamma 为步前的 (x_k, z_k, γ_k)；F_y、jac_y 为 y_k 处的函数值与 Jacobian，
    回溯判据与恒等式诊断都直接复用它们。
    """

    tau: float
    gamma: float
    gamma_next: float
    mu: float
    M: float
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    z_qp: np.ndarray
    z_next: np.ndarray
    x_next: np.ndarray
    F_y: np.ndarray
    jac_y: np.ndarray


@dataclass(frozen=True)
class ApgStepResult:
    tau: float
    theta: float
    theta_next: float
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    x_next: np.ndarray
    y_next: np.ndarray
    F_y: np.ndarray
    jac_y: np.ndarray


@dataclass(frozen=True)
class SdStepResult:
    x_next: np.ndarray
    direction: np.ndarray
    M: float
    tau: float
    backtracks: int


# ------------------------- 标量递推 ------------------------- #
def apg_theta_next(theta: float) -> float:
    """θ_{k+1}⁻¹ = √(θ_k⁻² + 1/4) + 1/2。"""
    if not theta > 0:
        raise InvalidInputError(f"theta 必须为正，实际为 {theta}")
    return 1.0 / (math.sqrt(theta ** -2 + 0.25) + 0.5)


def amg_step_size(gamma: float, M: float) -> float:
    """Mτ² = γ(1+τ) 的正根。"""
    if not (gamma > 0 and M > 0):
        raise InvalidInputError(f"gamma 与 M 必须为正：gamma={gamma}, M={M}")
    return (gamma + math.sqrt(gamma * gamma + 4.0 * M * gamma)) / (2.0 * M)


def amg_gamma_next(gamma: float, mu: float, tau: float) -> float:
    """γ' = (γ + μτ)/(1+τ)，即 γ' = μ − γ 的隐式 Euler 步。"""
    return (gamma + mu * tau) / (1.0 + tau)


def theta_products(L: float, gamma0: float, mu: float, K: int) -> np.ndarray:
    """
    固定 M = L 时的 θ_k = Π_{i<k}(1+τ_i)⁻¹，k = 0..K。

    γ 按 amg_gamma_next 演化，θ_0 = 1。
    """
    thetas = np.empty(K + 1)
    thetas[0] = 1.0
    gamma = gamma0
    for k in range(K):
        tau = amg_step_size(gamma, L)
        thetas[k + 1] = thetas[k] / (1.0 + tau)
        gamma = amg_gamma_next(gamma, mu, tau)
    return thetas


def theta_rate_bound(L: float, gamma0: float, mu: float, k: int) -> float:
    """θ_k 的上界 min{4L/(2√L+√γ₀·k)², (1+√(min{μ,γ₀}/L))^{−k}}。"""
    sublinear = 4.0 * L / (2.0 * math.sqrt(L) + math.sqrt(gamma0) * k) ** 2
    linear = (1.0 + math.sqrt(min(mu, gamma0) / L)) ** (-k)
    return min(sublinear, linear)


# ------------------------- 回溯判据 ------------------------- #
def _descent_holds(
    bundle: ObjectiveBundle,
    x_plus: np.ndarray,
    y_plus: np.ndarray,
    F_y: np.ndarray,
    jac_y: np.ndarray,
    M: float,
) -> bool:
    """max_j δ_j / M ≤ ½‖x⁺−y⁺‖²，δ_j = f_j(x⁺) − f_j(y⁺) − ⟨∇f_j(y⁺), x⁺−y⁺⟩。"""
    try:
        F_plus = eval_objectives(bundle, x_plus)
    except (DomainEvaluationError, InvalidInputError):
        # x⁺ 处溢出视为判据不成立，继续加倍 M
        logger.debug("回溯：x⁺ 处目标取值非有限，M=%g 被拒绝", M)
        return False
    d = x_plus - y_plus
    delta = F_plus - F_y - jac_y.T @ d
    slack = ROUNDING_SLACK * (np.abs(F_plus) + np.abs(F_y))
    return bool(np.max(delta - slack) <= 0.5 * M * float(d @ d))


def _runaway(M_k: float, max_backtracks: int, what: str) -> RunawayBacktrackingError:
    M = M_k * 2.0 ** max_backtracks
    logger.warning("%s 回溯超过 %d 次（M 已达 %.3e），目标可能非光滑或 oracle 有误", what, max_backtracks, M)
    return RunawayBacktrackingError(
        f"{what} 回溯超过 {max_backtracks} 次，M 已达 {M:.3e}",
        M=M,
        doublings=max_backtracks + 1,
    )


# ------------------------- SD ------------------------- #
def sd_step(
    bundle: ObjectiveBundle,
    state: SolverState,
    M: float,
    qp_tol: float = DEFAULT_QP_TOL,
    max_backtracks: int = MAX_BACKTRACKS,
) -> SdStepResult:
    """
    x_{k+1} = x_k + d(x_k)/M_{k,i}，M_{k,i} = 2^i·M。

    判据取 (x⁺, y⁺) = (x_k + d/M, x_k)；方向 d 与 M 无关，只计算一次。
    """
    if not M > 0:
        raise InvalidInputError(f"M 必须为正，实际为 {M}")
    x = state.x
    d = steepest_direction(bundle, x, qp_tol)
    F_x = eval_objectives(bundle, x)
    jac_x = eval_jacobian(bundle, x)
    for i in range(max_backtracks + 1):
        M_i = M * 2.0 ** i
        x_next = x + d / M_i
        if _descent_holds(bundle, x_next, x, F_x, jac_x, M_i):
            return SdStepResult(x_next=x_next, direction=d, M=M_i, tau=1.0 / M_i, backtracks=i)
    raise _runaway(M, max_backtracks, "SD")


# ------------------------- APG ------------------------- #
def apg_step(
    bundle: ObjectiveBundle,
    x: np.ndarray,
    y: np.ndarray,
    theta: float,
    tau: float,
    qp_tol: float = DEFAULT_QP_TOL,
) -> ApgStepResult:
    """
    APG 一步：λ 由 Q = τ·DF(y)ᵀDF(y)、c = F(x) − F(y) 的单纯形 QP 给出，

        x⁺ = y − τ·DF(y)λ,  y⁺ = x⁺ + θ⁺(θ⁻¹ − 1)(x⁺ − x)。
    """
    if not tau > 0:
        raise InvalidInputError(f"tau 必须为正，实际为 {tau}")
    F_x = eval_objectives(bundle, x)
    F_y = eval_objectives(bundle, y)
    jac_y = eval_jacobian(bundle, y)
    lam = simplex_qp(tau * (jac_y.T @ jac_y), F_x - F_y, qp_tol).lam
    x_next = y - tau * (jac_y @ lam)
    theta_next = apg_theta_next(theta)
    y_next = x_next + theta_next * (1.0 / theta - 1.0) * (x_next - x)
    return ApgStepResult(
        tau=tau,
        theta=theta,
        theta_next=theta_next,
        x=x,
        y=y,
        lam=lam,
        x_next=x_next,
        y_next=y_next,
        F_y=F_y,
        jac_y=jac_y,
    )


def apg_backtrack(
    bundle: ObjectiveBundle,
    state: SolverState,
    M_k: float,
    qp_tol: float = DEFAULT_QP_TOL,
    max_backtracks: int = MAX_BACKTRACKS,
) -> Tuple[ApgStepResult, float, int]:
    """带倍增回溯的 APG 步，判据取 (x⁺, y⁺) = (x_{k+1}, y_k)。"""
    if state.y is None or state.theta is None:
        raise InvalidInputError("APG 状态缺少 y 或 theta")
    for i in range(max_backtracks + 1):
        M = M_k * 2.0 ** i
        step = apg_step(bundle, state.x, state.y, state.theta, 1.0 / M, qp_tol)
        if _descent_holds(bundle, step.x_next, step.y, step.F_y, step.jac_y, M):
            return step, M, i
    raise _runaway(M_k, max_backtracks, "APG")


# ------------------------- AMG-QP ------------------------- #
def amg_qp_step(
    bundle: ObjectiveBundle,
    mu: float,
    M: float,
    state: SolverState,
    qp_tol: float = DEFAULT_QP_TOL,
) -> AmgStepResult:
    """
    AMG-QP 的一步 IMEX 更新：

        τ = (γ + √(γ² + 4Mγ))/(2M),   γ' = (γ + μτ)/(1+τ),
        y = (x + τz)/(1+τ),
        z^QP = proj_{C(y)}(μ(y−x) + γ(z−x)/τ),
        z' = (γz + μτy − τz^QP)/(γ + μτ),   x' = (x + τz')/(1+τ)。
    """
    if mu < 0:
        raise InvalidInputError(f"mu 必须非负，实际为 {mu}")
    x, z, gamma = state.x, state.z, state.gamma
    tau = amg_step_size(gamma, M)
    gamma_next = amg_gamma_next(gamma, mu, tau)
    y = (x + tau * z) / (1.0 + tau)
    F_y = eval_objectives(bundle, y)
    jac_y = eval_jacobian(bundle, y)
    w = mu * (y - x) + gamma * (z - x) / tau
    z_qp = hull_project(jac_y, w, qp_tol).point
    z_next = (gamma * z + mu * tau * y - tau * z_qp) / (gamma + mu * tau)
    x_next = (x + tau * z_next) / (1.0 + tau)
    return AmgStepResult(
        tau=tau,
        gamma=gamma,
        gamma_next=gamma_next,
        mu=mu,
        M=M,
        x=x,
        z=z,
        y=y,
        z_qp=z_qp,
        z_next=z_next,
        x_next=x_next,
        F_y=F_y,
        jac_y=jac_y,
    )


def backtrack(
    bundle: ObjectiveBundle,
    mu: float,
    M_k: float,
    state: SolverState,
    qp_tol: float = DEFAULT_QP_TOL,
    max_backtracks: int = MAX_BACKTRACKS,
) -> Tuple[AmgStepResult, float, int]:
    """
    倍增回溯：依次尝试 M_{k,i} = 2^i·M_k，返回首个通过判据的步、M_{k+1} 与 i_k。

    判据在 (x⁺, y⁺) = (x_{k+1}, y_k) 处检查。
    """
    if not M_k > 0:
        raise InvalidInputError(f"M_k 必须为正，实际为 {M_k}")
    for i in range(max_backtracks + 1):
        M = M_k * 2.0 ** i
        step = amg_qp_step(bundle, mu, M, state, qp_tol)
        if _descent_holds(bundle, step.x_next, step.y, step.F_y, step.jac_y, M):
            if i > 0:
                logger.debug("k=%d：回溯 %d 次，M %.3e -> %.3e", state.k, i, M_k, M)
            return step, M, i
    raise _runaway(M_k, max_backtracks, "AMG-QP")


# ------------------------- 重启 ------------------------- #
def restart_check(
    criterion: RestartCriterion,
    state: SolverState,
    new_x: np.ndarray,
    new_kkt: Optional[float] = None,
) -> bool:
    """
    SR：‖x_{k+1} − x_k‖ < ‖x_k − x_{k−1}‖；
    ResR：‖proj_{C(x_{k+1})}(0)‖ > ‖proj_{C(x_k)}(0)‖。

    两者都是严格不等式，缺少比较对象时不触发。
    """
    if criterion == "SR":
        if state.prev_x is None:
            return False
        return bool(np.linalg.norm(new_x - state.x) < np.linalg.norm(state.x - state.prev_x))
    if criterion == "ResR":
        if state.kkt is None or new_kkt is None:
            return False
        return bool(new_kkt > state.kkt)
    raise InvalidInputError(f"未知重启准则 {criterion!r}")


def apply_restart(candidate: SolverState, gamma0: float) -> SolverState:
    """
    将候选状态 k+1 重置为 γ_{k+1} = γ₀、x_{k+1} = z_{k+1} = x_k。

    candidate.prev_x / prev_kkt 必须是 x_k 及其残差；M 与 τ 保留。
    """
    if candidate.prev_x is None:
        raise InvalidInputError("重启需要 prev_x（即 x_k）")
    x_k = candidate.prev_x.copy()
    return candidate.evolve(x=x_k, z=x_k.copy(), gamma=gamma0, kkt=candidate.prev_kkt)
