"""
AMG 连续流积分器，用于数值验证 Lyapunov 函数的指数衰减。
"""

from .core import (
    FlowState,
    export_trajectory_csv,
    flow_energy,
    flow_rhs,
    gamma_closed_form,
    integrate,
    lyapunov_continuous,
)

__all__ = [
    "FlowState",
    "export_trajectory_csv",
    "flow_energy",
    "flow_rhs",
    "gamma_closed_form",
    "integrate",
    "lyapunov_continuous",
]
