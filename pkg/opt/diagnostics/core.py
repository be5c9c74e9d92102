from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from opt.base import EmptyReferenceError, InvalidInputError, RunTrace, SolverState
from opt.hullproj import DEFAULT_QP_TOL
from opt.problems import ObjectiveBundle, eval_objectives, uniform, uniform_stream
from opt.schema import MethodConfig, ReferencePointModel, ReferenceSetModel
from opt.solvers import AmgStepResult, run


logger = logging.getLogger("amg_moo.diagnostics")

REFERENCE_RESIDUAL_BAR = 1e-8
CONTRACTION_SLACK = 1e-9
ENERGY_SLACK = 1e-9


@dataclass
class ReferenceSet:
    """近似弱 Pareto 点集合：points[i] 的目标值为 values[i]，KKT 残差为 residuals[i]。"""

    points: List[np.ndarray] = field(default_factory=list)
    values: List[np.ndarray] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def add(self, x: np.ndarray, values: np.ndarray, residual: float) -> None:
        if residual > REFERENCE_RESIDUAL_BAR:
            raise InvalidInputError(f"参考点残差 {residual:.3e} 超过 {REFERENCE_RESIDUAL_BAR:g}")
        self.points.append(np.asarray(x, dtype=float).copy())
        self.values.append(np.asarray(values, dtype=float).copy())
        self.residuals.append(float(residual))


# ------------------------- gap / merit / Lyapunov ------------------------- #
def gap(bundle: ObjectiveBundle, x: np.ndarray, z: np.ndarray) -> float:
    """f(x; z) = min_j [f_j(x) − f_j(z)]，可以为负。"""
    return float(np.min(eval_objectives(bundle, x) - eval_objectives(bundle, z)))


def merit_lower_bound(bundle: ObjectiveBundle, x: np.ndarray, refs: ReferenceSet) -> float:
    """max_{z∈refs} f(x; z)，是 sup_z f(x; z) 在有限参考集上的下界。"""
    if len(refs) == 0:
        raise InvalidInputError("参考点集为空")
    F_x = eval_objectives(bundle, x)
    return float(max(np.min(F_x - v) for v in refs.values))


def lyapunov_discrete(bundle: ObjectiveBundle, state: SolverState, z: np.ndarray) -> float:
    """E_k(z) = f(x_k; z) + (γ_k/2)‖z_k − z‖²。"""
    dz = state.z - z
    return gap(bundle, state.x, z) + 0.5 * state.gamma * float(dz @ dz)


def contraction_check(bundle: ObjectiveBundle, trace: RunTrace, z: np.ndarray) -> List[int]:
    """
    返回所有违反 E_{k+1} − E_k ≤ −τ_k·E_{k+1} + 1e-9·(1+|E_k|) 的 k。

    trace 需由 run(record_states=True) 产生；被重启替换的步不参与检查。
    """
    states = trace.states or []
    if len(states) < 2:
        return []
    energies = [lyapunov_discrete(bundle, s, z) for s in states]
    violations: List[int] = []
    for k in range(len(states) - 1):
        if trace.records[k + 1].restart_flag:
            continue
        tau = states[k + 1].tau
        e0, e1 = energies[k], energies[k + 1]
        if e1 - e0 > -tau * e1 + CONTRACTION_SLACK * (1.0 + abs(e0)):
            violations.append(k)
    if violations:
        logger.info("contraction_check：%d 处违反，首个 k=%d", len(violations), violations[0])
    return violations


def qp_identity_residual(step: AmgStepResult) -> float:
    """|⟨z^QP, Δx⟩ − max_j ⟨∇f_j(y_k), Δx⟩|，Δx = x_{k+1} − x_k。"""
    dx = step.x_next - step.x
    return abs(float(step.z_qp @ dx) - float(np.max(step.jac_y.T @ dx)))


def energy_violations(bundle: ObjectiveBundle, trace: RunTrace) -> List[int]:
    """
    离散能量 f_j(x_k) + (γ_k/2)‖z_k − x_k‖² 的上升位置（对某个 j 超过 1e-9·(1+|值|)）。

    IMEX 关系下 z_k − x_k = (x_k − x_{k−1})/τ_{k−1}；返回的是上升发生的 k+1 中的 k。
    """
    states = trace.states or []
    energies = []
    for s in states:
        dz = s.z - s.x
        energies.append(eval_objectives(bundle, s.x) + 0.5 * s.gamma * float(dz @ dz))
    out: List[int] = []
    for k in range(len(energies) - 1):
        prev, nxt = energies[k], energies[k + 1]
        if np.any(nxt - prev > ENERGY_SLACK * (1.0 + np.abs(prev))):
            out.append(k)
    return out


# ------------------------- Pareto 前沿 ------------------------- #
def dominance_filter(values: Sequence[np.ndarray]) -> List[int]:
    """保留不被任何其它点严格支配的下标（逐分量 ≤ 且不全等），保持原有顺序。"""
    arr = np.asarray([np.asarray(v, dtype=float) for v in values])
    if arr.size == 0:
        return []
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("目标值含非有限分量")
    keep: List[int] = []
    for i in range(arr.shape[0]):
        le = np.all(arr <= arr[i], axis=1)
        ne = np.any(arr != arr[i], axis=1)
        if not np.any(le & ne):
            keep.append(i)
    return keep


def build_reference_set(
    bundle: ObjectiveBundle,
    n_starts: int,
    budget: int,
    *,
    seed: int = 0,
    box: Tuple[float, float] = (-2.0, 2.0),
    method: Optional[MethodConfig] = None,
    qp_tol: float = DEFAULT_QP_TOL,
) -> ReferenceSet:
    """
    多起点运行（默认带回溯的 SD）并收集终点，构造参考点集。

    - 起点由 (seed, "reference", start-i) 随机流在 box 内抽样；
    - 仅保留终点残差 ≤ 1e-8 的点，再做支配过滤；
    - 没有任何点达标时抛出 EmptyReferenceError。
    """
    if n_starts < 1:
        raise InvalidInputError(f"n_starts 必须 ≥ 1，实际为 {n_starts}")
    cfg = method or MethodConfig(method="SD", L_or_M0=10.0)
    kkt_tol = cfg.kkt_tol if 0 < cfg.kkt_tol <= 1e-10 else 1e-10
    cfg = cfg.model_copy(update={"max_iters": budget, "kkt_tol": kkt_tol})
    lo, hi = box

    xs: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    res: List[float] = []
    for i in range(n_starts):
        x0 = uniform(uniform_stream(seed, "reference", f"start-{i}"), lo, hi, bundle.n)
        trace = run(bundle, cfg, x0, qp_tol=qp_tol)
        x_end = trace.final_state.x
        r = float(trace.final_state.kkt)
        if r <= REFERENCE_RESIDUAL_BAR:
            xs.append(x_end)
            vals.append(eval_objectives(bundle, x_end))
            res.append(r)
        else:
            logger.debug("参考点起点 %d 未达标：residual=%.3e", i, r)

    if not xs:
        raise EmptyReferenceError(
            f"{n_starts} 个起点在 {budget} 步内都未达到残差 {REFERENCE_RESIDUAL_BAR:g}"
        )
    refs = ReferenceSet()
    for idx in dominance_filter(vals):
        refs.add(xs[idx], vals[idx], res[idx])
    logger.info("参考点集：%d/%d 个起点达标，过滤后保留 %d 个", len(xs), n_starts, len(refs))
    return refs


def save_reference_set(path: Union[str, Path], refs: ReferenceSet) -> None:
    model = ReferenceSetModel(
        points=[
            ReferencePointModel(x=x.tolist(), values=v.tolist(), residual=r)
            for x, v, r in zip(refs.points, refs.values, refs.residuals)
        ]
    )
    Path(path).write_text(json.dumps(model.model_dump(), ensure_ascii=False, indent=2), encoding="utf-8")


def load_reference_set(path: Union[str, Path]) -> ReferenceSet:
    model = ReferenceSetModel.model_validate_json(Path(path).read_text(encoding="utf-8"))
    refs = ReferenceSet()
    for p in model.points:
        refs.add(np.array(p.x), np.array(p.values), p.residual)
    return refs

