"""
向量目标抽象与三类带种子的基准问题族。

本包只负责“x → F(x), DF(x)”的数值定义，不依赖任何求解器。
"""

from .core import (
    ObjectiveBundle,
    eval_jacobian,
    eval_objectives,
    fd_gradient_check,
    quadratic_bundle,
)
from .families import (
    gen_leastsquares,
    gen_logsumexp,
    gen_nonconvex_pair,
    generate_bundle,
    leastsquares_bundle,
    logsumexp_bundle,
    nonconvex_pair_bundle,
    spectral_norm_sq,
)
from .rng import uniform, uniform_stream

__all__ = [
    "ObjectiveBundle",
    "eval_jacobian",
    "eval_objectives",
    "fd_gradient_check",
    "gen_leastsquares",
    "gen_logsumexp",
    "gen_nonconvex_pair",
    "generate_bundle",
    "leastsquares_bundle",
    "logsumexp_bundle",
    "nonconvex_pair_bundle",
    "quadratic_bundle",
    "spectral_norm_sq",
    "uniform",
    "uniform_stream",
]
