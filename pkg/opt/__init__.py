from __future__ import annotations

"""
多目标一阶方法的数值核心。

约定：
- 每个模块放在二级子目录下，入口统一为 core.py：
  - opt/problems/  向量目标与三类带种子的基准问题；
  - opt/hullproj/  凸包投影与单纯形 QP；
  - opt/solvers/   SD、APG、AMG-QP（回溯 / 重启）与 run 驱动；
  - opt/diagnostics/  gap、Lyapunov 与 Pareto 前沿；
  - opt/flow/      AMG 连续流积分。
- base.py 放共享的状态结构与异常体系，schema.py 放 JSON 结构。
- 本包不读写配置文件，也不关心命令行，批处理见 src/tools/harness.py。
"""

from .base import (
    ConvergenceError,
    DomainEvaluationError,
    EmptyReferenceError,
    FlowBlowUpError,
    InvalidInputError,
    InvalidSpecError,
    InvalidStateError,
    OptError,
    RunawayBacktrackingError,
    RunTrace,
    SolverRunError,
    SolverState,
    TRACE_COLUMNS,
    TraceRecord,
)
from .schema import MethodConfig, ProblemSpec

__all__ = [
    "ConvergenceError",
    "DomainEvaluationError",
    "EmptyReferenceError",
    "FlowBlowUpError",
    "InvalidInputError",
    "InvalidSpecError",
    "InvalidStateError",
    "MethodConfig",
    "OptError",
    "ProblemSpec",
    "RunawayBacktrackingError",
    "RunTrace",
    "SolverRunError",
    "SolverState",
    "TRACE_COLUMNS",
    "TraceRecord",
]
