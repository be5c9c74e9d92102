from __future__ import annotations

"""
AMG 连续流（一阶系统形式）：

    γ' = μ − γ,   X' = Z − X,   γZ' ∈ μ(X − Z) − argmin_{v∈C(X)} ⟨X − Z, v⟩，

Z(0) = x₀ + x₁（即 Z := X + X'）。argmin 取最小序号顶点，固定步长 Euler / RK4 积分。
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from opt.base import DomainEvaluationError, FlowBlowUpError, InvalidInputError, InvalidStateError
from opt.diagnostics import gap
from opt.hullproj import DEFAULT_QP_TOL, hull_linear_min, hull_project, resolve_implicit_projection
from opt.problems import ObjectiveBundle, eval_jacobian, eval_objectives


logger = logging.getLogger("amg_moo.flow")

Scheme = Literal["euler", "rk4"]
RhsMode = Literal["vertex", "implicit"]

FREEZE_EPS = 1e-12
MAX_STEP = 1e-2
MAX_HORIZON = 50.0


@dataclass(frozen=True)
class FlowState:
    t: float
    gamma: float
    X: np.ndarray
    Z: np.ndarray


def gamma_closed_form(mu: float, gamma0: float, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """γ(t) = μ + (γ₀ − μ)e^{−t}。"""
    if np.ndim(t) == 0:
        return mu + (gamma0 - mu) * math.exp(-float(t))
    return mu + (gamma0 - mu) * np.exp(-np.asarray(t, dtype=float))


def _select_vertex(
    bundle: ObjectiveBundle,
    state: FlowState,
    P: np.ndarray,
    prev_index: Optional[int],
) -> Tuple[int, np.ndarray, bool]:
    diff = state.X - state.Z
    if prev_index is not None and float(np.linalg.norm(diff)) < FREEZE_EPS:
        hull_min = float(np.linalg.norm(hull_project(P, np.zeros(bundle.n), DEFAULT_QP_TOL).point))
        if hull_min < FREEZE_EPS:
            # Pareto 集附近冻结选择，避免抖动
            return prev_index, P[:, prev_index].copy(), True
    index, v = hull_linear_min(P, diff)
    return index, v, False


def _rhs(
    bundle: ObjectiveBundle,
    mu: float,
    state: FlowState,
    prev_index: Optional[int],
    mode: RhsMode,
) -> Tuple[float, np.ndarray, np.ndarray, int]:
    if not state.gamma > 0:
        raise InvalidStateError(f"t={state.t:g} 处 gamma={state.gamma!r} ≤ 0")
    P = eval_jacobian(bundle, state.X)
    diff = state.X - state.Z
    dgamma = mu - state.gamma
    dX = state.Z - state.X
    index, v, frozen = _select_vertex(bundle, state, P, prev_index)
    if mode == "vertex" or (mode == "implicit" and frozen):
        dZ = (mu * diff - v) / state.gamma
    elif mode == "implicit":
        # 解 γ·dZ − μ(X − Z) + proj_{C(X)}(−(X − Z) − γ·dZ) = 0
        dZ = resolve_implicit_projection(P, state.gamma, state.gamma, mu * diff, -diff)
    else:
        raise InvalidInputError(f"未知 rhs 模式 {mode!r}")
    return dgamma, dX, dZ, index


def flow_rhs(
    bundle: ObjectiveBundle,
    mu: float,
    state: FlowState,
    *,
    mode: RhsMode = "vertex",
    prev_index: Optional[int] = None,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    返回 (dγ, dX, dZ)：

    - dγ = μ − γ，dX = Z − X；
    - dZ = [μ(X − Z) − v]/γ，v 为使 ⟨X − Z, ∇f_j(X)⟩ 最小的最小序号梯度；
    - mode="implicit" 时 dZ 改由 resolve_implicit_projection（a = b = γ）给出；a = b 时该方程的解
      与顶点公式相同，两种模式只在结构上互相印证；冻结的顶点在两种模式下都沿用；
    - γ ≤ 0 抛出 InvalidStateError。
    """
    dgamma, dX, dZ, _ = _rhs(bundle, mu, state, prev_index, mode)
    return dgamma, dX, dZ


def _shift(state: FlowState, dt: float, k: Tuple[float, np.ndarray, np.ndarray]) -> FlowState:
    nxt = FlowState(
        t=state.t + dt,
        gamma=state.gamma + dt * k[0],
        X=state.X + dt * k[1],
        Z=state.Z + dt * k[2],
    )
    if not (math.isfinite(nxt.gamma) and np.all(np.isfinite(nxt.X)) and np.all(np.isfinite(nxt.Z))):
        raise FlowBlowUpError(f"t={nxt.t:g} 处状态出现非有限值", t=nxt.t)
    return nxt


def _euler(
    bundle: ObjectiveBundle,
    mu: float,
    state: FlowState,
    h: float,
    index: Optional[int],
    mode: RhsMode,
) -> Tuple[FlowState, int]:
    dg, dX, dZ, index = _rhs(bundle, mu, state, index, mode)
    return _shift(state, h, (dg, dX, dZ)), index


def _rk4(
    bundle: ObjectiveBundle,
    mu: float,
    state: FlowState,
    h: float,
    index: Optional[int],
    mode: RhsMode,
) -> Tuple[FlowState, int]:
    k1 = _rhs(bundle, mu, state, index, mode)
    index = k1[3]
    k2 = _rhs(bundle, mu, _shift(state, 0.5 * h, k1[:3]), index, mode)
    k3 = _rhs(bundle, mu, _shift(state, 0.5 * h, k2[:3]), index, mode)
    k4 = _rhs(bundle, mu, _shift(state, h, k3[:3]), index, mode)
    incr = tuple((a + 2.0 * b + 2.0 * c + d) / 6.0 for a, b, c, d in zip(k1[:3], k2[:3], k3[:3], k4[:3]))
    return _shift(state, h, incr), index


_SCHEMES = {"euler": _euler, "rk4": _rk4}


def integrate(
    bundle: ObjectiveBundle,
    mu: float,
    gamma0: float,
    x0: np.ndarray,
    x1: np.ndarray,
    T: float,
    h: float,
    scheme: Scheme = "rk4",
    *,
    mode: RhsMode = "vertex",
) -> List[FlowState]:
    """
    从 (0, γ₀, x₀, x₀ + x₁) 出发做固定步长积分，返回包含初值在内的全部状态。

    h ∈ (0, 1e-2]，0 ≤ T ≤ 50；最后一步截断到恰好落在 T。
    """
    if not 0.0 < h <= MAX_STEP:
        raise InvalidInputError(f"步长 h 必须在 (0, {MAX_STEP:g}] 内，实际为 {h}")
    if not 0.0 <= T <= MAX_HORIZON:
        raise InvalidInputError(f"T 必须在 [0, {MAX_HORIZON:g}] 内，实际为 {T}")
    if scheme not in _SCHEMES:
        raise InvalidInputError(f"未知积分格式 {scheme!r}")
    if not gamma0 > 0:
        raise InvalidStateError(f"gamma0 必须为正，实际为 {gamma0}")
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if x0.shape != (bundle.n,) or x1.shape != (bundle.n,):
        raise InvalidInputError(f"x0 / x1 形状应为 ({bundle.n},)")

    step = _SCHEMES[scheme]
    state = FlowState(t=0.0, gamma=float(gamma0), X=x0.copy(), Z=x0 + x1)
    trajectory = [state]
    n_steps = int(math.ceil(T / h - 1e-9))
    index: Optional[int] = None
    for _ in range(n_steps):
        dt = min(h, T - state.t)
        if dt <= 0:
            break
        try:
            state, index = step(bundle, mu, state, dt, index, mode)
        except (DomainEvaluationError, InvalidInputError) as exc:
            if isinstance(exc, InvalidStateError):
                raise
            raise FlowBlowUpError(f"t={state.t:g} 处 oracle 失败：{exc}", t=state.t) from exc
        trajectory.append(state)
    logger.info(
        "flow 积分完成：scheme=%s, mode=%s, steps=%d, T=%g, gamma(T)=%.6e",
        scheme,
        mode,
        len(trajectory) - 1,
        T,
        trajectory[-1].gamma,
    )
    return trajectory


def lyapunov_continuous(bundle: ObjectiveBundle, state: FlowState, z: np.ndarray) -> float:
    """E(t; z) = f(X(t); z) + (γ(t)/2)‖Z(t) − z‖²。"""
    dz = state.Z - z
    return gap(bundle, state.X, z) + 0.5 * state.gamma * float(dz @ dz)


def flow_energy(bundle: ObjectiveBundle, state: FlowState) -> np.ndarray:
    """逐目标能量 f_j(X) + (γ/2)‖Z − X‖²（Z − X 即 X'）。"""
    d = state.Z - state.X
    return eval_objectives(bundle, state.X) + 0.5 * state.gamma * float(d @ d)


def export_trajectory_csv(
    path: Union[str, Path],
    bundle: ObjectiveBundle,
    trajectory: Sequence[FlowState],
    refs: Sequence[np.ndarray],
) -> Path:
    """写出 t, gamma, E_z0.., norm_X_minus_Z 列，浮点统一为 %.12e。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    refs = [np.asarray(z, dtype=float) for z in refs]
    header = ["t", "gamma"] + [f"E_z{i}" for i in range(len(refs))] + ["norm_X_minus_Z"]
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for s in trajectory:
            row = [s.t, s.gamma] + [lyapunov_continuous(bundle, s, z) for z in refs]
            row.append(float(np.linalg.norm(s.X - s.Z)))
            writer.writerow([f"{v:.12e}" for v in row])
    logger.info("轨迹已写出：%s（%d 行）", path, len(trajectory))
    return path
