from __future__ import annotations

import logging
import time
from typing import Any, Optional, Tuple

import numpy as np

from opt.base import InvalidInputError, RunTrace, SolverRunError, SolverState, TraceRecord
from opt.hullproj import DEFAULT_QP_TOL, kkt_residual
from opt.problems import ObjectiveBundle
from opt.schema import MethodConfig

from .core import (
    MAX_BACKTRACKS,
    amg_qp_step,
    apg_backtrack,
    apply_restart,
    backtrack,
    restart_check,
    sd_step,
)


logger = logging.getLogger("amg_moo.solvers")

DEFAULT_MAX_ITERS = 500


def _initial_state(config: MethodConfig, x0: np.ndarray, kkt0: float) -> SolverState:
    apg = config.method == "APG"
    return SolverState(
        k=0,
        x=x0.copy(),
        z=x0.copy(),
        gamma=config.gamma0,
        M=config.L_or_M0,
        kkt=kkt0,
        y=x0.copy() if apg else None,
        theta=config.theta0 if apg else None,
    )


def _advance(
    bundle: ObjectiveBundle,
    config: MethodConfig,
    state: SolverState,
    qp_tol: float,
    max_backtracks: int,
) -> Tuple[SolverState, int, bool, Optional[Any]]:
    """推进一步，返回 (新状态, 回溯次数, 是否重启, 被接受的步)。"""
    method = config.method
    k = state.k + 1

    if method == "SD":
        res = sd_step(bundle, state, state.M, qp_tol, max_backtracks)
        new_state = SolverState(
            k=k,
            x=res.x_next,
            z=res.x_next,
            gamma=state.gamma,
            M=res.M,
            tau=res.tau,
            prev_x=state.x,
            prev_kkt=state.kkt,
            kkt=kkt_residual(bundle, res.x_next, qp_tol),
        )
        return new_state, res.backtracks, False, res

    if method == "APG":
        step, M, i = apg_backtrack(bundle, state, state.M, qp_tol, max_backtracks)
        new_state = SolverState(
            k=k,
            x=step.x_next,
            z=step.x_next,
            gamma=state.gamma,
            M=M,
            tau=step.tau,
            prev_x=state.x,
            prev_kkt=state.kkt,
            kkt=kkt_residual(bundle, step.x_next, qp_tol),
            y=step.y_next,
            theta=step.theta_next,
        )
        return new_state, i, False, step

    if method == "AMG_QP":
        step = amg_qp_step(bundle, config.mu, config.L_or_M0, state, qp_tol)
        M, i = config.L_or_M0, 0
    else:
        step, M, i = backtrack(bundle, config.mu, state.M, state, qp_tol, max_backtracks)

    candidate = SolverState(
        k=k,
        x=step.x_next,
        z=step.z_next,
        gamma=step.gamma_next,
        M=M,
        tau=step.tau,
        prev_x=state.x,
        prev_kkt=state.kkt,
        kkt=kkt_residual(bundle, step.x_next, qp_tol),
    )
    restarted = False
    if method == "AMG_QP_SR":
        restarted = restart_check("SR", state, candidate.x)
    elif method == "AMG_QP_ResR":
        restarted = restart_check("ResR", state, candidate.x, candidate.kkt)
    if restarted:
        logger.debug("k=%d：%s 触发重启", k, method)
        candidate = apply_restart(candidate, config.gamma0)
    return candidate, i, restarted, step


def run(
    bundle: ObjectiveBundle,
    config: MethodConfig,
    x0: np.ndarray,
    *,
    qp_tol: float = DEFAULT_QP_TOL,
    record_states: bool = False,
    max_backtracks: int = MAX_BACKTRACKS,
) -> RunTrace:
    """
    从 x0（z₀ = x₀）出发运行 config 指定的方法，逐步记录 trace。

    说明：
    - 第 k 行描述 x_k：其 KKT 残差，以及产生 x_k 的那一步的 ‖x_k − x_{k−1}‖、τ、回溯次数与重启标记；
    - 达到 max_iters 或 kkt_tol > 0 且残差 ≤ kkt_tol 时停止；
    - APG 的 gamma 列记录 θ_k，SD 的 gamma 列恒为 γ₀；
    - 任何一步失败都包装为 SolverRunError(iteration=k)，原始异常保留在 __cause__。
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (bundle.n,) or not np.all(np.isfinite(x0)):
        raise InvalidInputError(f"x0 必须是长度 {bundle.n} 的有限向量")
    max_iters = DEFAULT_MAX_ITERS if config.max_iters is None else config.max_iters
    if config.mu > bundle.mu:
        logger.warning("%s 使用 mu=%g，超过问题的强凸常数 %g", config.method, config.mu, bundle.mu)

    trace = RunTrace(
        method=config.label,
        states=[] if record_states else None,
        steps=[] if record_states else None,
    )
    t0 = time.perf_counter()

    def _gamma_column(s: SolverState) -> float:
        return float(s.theta) if s.theta is not None else float(s.gamma)

    k = 0
    n_restarts = 0
    n_backtracks = 0
    try:
        state = _initial_state(config, x0, kkt_residual(bundle, x0, qp_tol))
        trace.append(
            TraceRecord(
                k=0,
                wall_seconds=time.perf_counter() - t0,
                kkt_residual=float(state.kkt),
                iterate_gap=0.0,
                M_k=state.M,
                gamma_k=_gamma_column(state),
                tau_k=0.0,
                restart_flag=False,
                backtrack_count=0,
            )
        )
        if record_states:
            trace.states.append(state)

        while state.k < max_iters and not (config.kkt_tol > 0 and state.kkt <= config.kkt_tol):
            k = state.k + 1
            new_state, i, restarted, step = _advance(bundle, config, state, qp_tol, max_backtracks)
            trace.append(
                TraceRecord(
                    k=k,
                    wall_seconds=time.perf_counter() - t0,
                    kkt_residual=float(new_state.kkt),
                    iterate_gap=float(np.linalg.norm(new_state.x - state.x)),
                    M_k=new_state.M,
                    gamma_k=_gamma_column(new_state),
                    tau_k=new_state.tau,
                    restart_flag=restarted,
                    backtrack_count=i,
                )
            )
            if record_states:
                trace.states.append(new_state)
                trace.steps.append(step)
            n_restarts += int(restarted)
            n_backtracks += i
            state = new_state
    except Exception as exc:  # noqa: BLE001
        logger.warning("%s 在第 %d 步失败：%s", config.label, k, exc)
        raise SolverRunError(f"{config.label} 在第 {k} 步失败：{exc}", iteration=k) from exc

    trace.final_state = state
    logger.info(
        "%s 完成：iters=%d, kkt=%.3e, restarts=%d, backtracks=%d, %.3fs",
        config.label,
        state.k,
        state.kkt,
        n_restarts,
        n_backtracks,
        trace.records[-1].wall_seconds,
    )
    return trace


def record_states(
    bundle: ObjectiveBundle,
    config: MethodConfig,
    x0: np.ndarray,
    **kwargs: Any,
) -> RunTrace:
    """run(..., record_states=True) 的简写，诊断模块使用。"""
    return run(bundle, config, x0, record_states=True, **kwargs)
