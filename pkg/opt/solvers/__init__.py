"""
离散多目标方法：SD、APG、AMG-QP（固定步长 / 回溯 / SR / ResR 重启）。

core.py 为单步内核，driver.py 中的 run() 负责迭代与 trace 记录。
"""

from .core import (
    MAX_BACKTRACKS,
    AmgStepResult,
    ApgStepResult,
    SdStepResult,
    amg_gamma_next,
    amg_qp_step,
    amg_step_size,
    apg_backtrack,
    apg_step,
    apg_theta_next,
    apply_restart,
    backtrack,
    restart_check,
    sd_step,
    theta_products,
    theta_rate_bound,
)
from .driver import DEFAULT_MAX_ITERS, record_states, run

__all__ = [
    "DEFAULT_MAX_ITERS",
    "MAX_BACKTRACKS",
    "AmgStepResult",
    "ApgStepResult",
    "SdStepResult",
    "amg_gamma_next",
    "amg_qp_step",
    "amg_step_size",
    "apg_backtrack",
    "apg_step",
    "apg_theta_next",
    "apply_restart",
    "backtrack",
    "record_states",
    "restart_check",
    "run",
    "sd_step",
    "theta_products",
    "theta_rate_bound",
]
