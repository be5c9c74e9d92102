"""
gap / Lyapunov 诊断与 Pareto 前沿组装，供测试与批处理使用。
"""

from .core import (
    ReferenceSet,
    build_reference_set,
    contraction_check,
    dominance_filter,
    energy_violations,
    gap,
    load_reference_set,
    lyapunov_discrete,
    merit_lower_bound,
    qp_identity_residual,
    save_reference_set,
)

__all__ = [
    "ReferenceSet",
    "build_reference_set",
    "contraction_check",
    "dominance_filter",
    "energy_violations",
    "gap",
    "load_reference_set",
    "lyapunov_discrete",
    "merit_lower_bound",
    "qp_identity_residual",
    "save_reference_set",
]
