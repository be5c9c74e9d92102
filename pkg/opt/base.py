from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, List, Optional

import numpy as np


# ------------------------- 异常体系 ------------------------- #
class OptError(Exception):
    """本包所有数值错误的基类。"""


class InvalidInputError(OptError, ValueError):
    """输入不满足前置条件（形状、容差范围、对称性等）。"""


class InvalidSpecError(InvalidInputError):
    """ProblemSpec 无法生成目标函数组（n=0、p=0 或 family 不匹配）。"""


class InvalidStateError(InvalidInputError):
    """连续流状态非法（例如 γ ≤ 0）。"""


class DomainEvaluationError(OptError, ArithmeticError):
    """目标函数或梯度出现非有限值。index 为出错的目标序号（从 0 开始）。"""

    def __init__(self, message: str, index: int) -> None:
        super().__init__(message)
        self.index = index


class ConvergenceError(OptError):
    """单纯形 QP 在迭代预算内未达到容差，携带当前最优迭代与残差。"""

    def __init__(self, message: str, best: np.ndarray, residual: float) -> None:
        super().__init__(message)
        self.best = best
        self.residual = residual


class RunawayBacktrackingError(OptError):
    """回溯次数超过上限，通常意味着目标非光滑或 oracle 被破坏。"""

    def __init__(self, message: str, M: float, doublings: int) -> None:
        super().__init__(message)
        self.M = M
        self.doublings = doublings


class FlowBlowUpError(OptError):
    """连续流积分出现非有限状态。"""

    def __init__(self, message: str, t: float) -> None:
        super().__init__(message)
        self.t = t


class EmptyReferenceError(OptError):
    """参考点集为空，无法计算基于 gap 的诊断量。"""


class SolverRunError(OptError):
    """run() 在第 iteration 步失败时抛出，原始异常通过 __cause__ 链接。"""

    def __init__(self, message: str, iteration: int) -> None:
        super().__init__(message)
        self.iteration = iteration


# ------------------------- 状态结构 ------------------------- #
@dataclass(frozen=True)
class SolverState:
    """
    离散方法共享的单步状态 (k, γ_k, x_k, z_k, M_k, τ_k)。

    说明：
    - tau 为产生 x_k 的那一步步长，k=0 时为 0；
    - kkt 缓存 x_k 处的 KKT 残差，ResR 用它作为“上一步”的残差；
    - prev_x 为 x_{k-1}（SR 使用），prev_kkt 为 x_{k-1} 处的残差，重启时用于恢复；
    - y / theta 仅 APG 使用（外推点与 θ_k）。
    """

    k: int
    x: np.ndarray
    z: np.ndarray
    gamma: float
    M: float
    tau: float = 0.0
    prev_x: Optional[np.ndarray] = None
    prev_kkt: Optional[float] = None
    kkt: Optional[float] = None
    y: Optional[np.ndarray] = None
    theta: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise InvalidStateError(f"gamma 必须为正，实际为 {self.gamma!r}")
        if not self.M > 0:
            raise InvalidStateError(f"M 必须为正，实际为 {self.M!r}")
        if self.k >= 1 and not self.tau > 0:
            raise InvalidStateError(f"k={self.k} 时 tau 必须为正，实际为 {self.tau!r}")

    def evolve(self, **changes: Any) -> "SolverState":
        return replace(self, **changes)


@dataclass(frozen=True)
class TraceRecord:
    """RunTrace 的一行：x_k 的残差，以及产生 x_k 的那一步的步长、回溯与重启信息。"""

    k: int
    wall_seconds: float
    kkt_residual: float
    iterate_gap: float
    M_k: float
    gamma_k: float
    tau_k: float
    restart_flag: bool
    backtrack_count: int


TRACE_COLUMNS = (
    "k",
    "wall_seconds",
    "kkt_residual",
    "iterate_gap",
    "M_k",
    "gamma_k",
    "tau_k",
    "restart_flag",
    "backtrack_count",
)


@dataclass
class RunTrace:
    """
    一次求解的迭代记录。

    - records 按 k 严格递增；
    - states / steps 仅在 run(record_states=True) 时填充，供 Lyapunov 等诊断使用；
    - final_state 总是最后一个迭代状态。
    """

    method: str
    records: List[TraceRecord] = field(default_factory=list)
    states: Optional[List[SolverState]] = None
    steps: Optional[List[Any]] = None
    final_state: Optional[SolverState] = None

    def append(self, record: TraceRecord) -> None:
        if self.records:
            last = self.records[-1]
            if record.k <= last.k:
                raise InvalidInputError(f"trace 的 k 必须严格递增：{last.k} -> {record.k}")
            if record.wall_seconds < last.wall_seconds:
                record = replace(record, wall_seconds=last.wall_seconds)
        self.records.append(record)

    @property
    def iterations(self) -> int:
        return self.records[-1].k if self.records else 0

    def column(self, name: str) -> np.ndarray:
        if name not in TRACE_COLUMNS:
            raise InvalidInputError(f"未知列名 {name!r}")
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def first_k_below(self, threshold: float) -> Optional[int]:
        """返回首个 kkt_residual ≤ threshold 的 k，从未达到时返回 None。"""
        for r in self.records:
            if r.kkt_residual <= threshold:
                return r.k
        return None
