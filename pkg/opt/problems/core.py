from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from opt.base import DomainEvaluationError, InvalidInputError


logger = logging.getLogger("amg_moo.problems")

ValueOracle = Callable[[np.ndarray], np.ndarray]
GradientOracle = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ObjectiveBundle:
    """
    m 个光滑目标组成的向量目标 F = (f_1, …, f_m)。

    说明：
    - value_oracle(x) 返回长度 m 的向量，gradient_oracle(x) 返回 n×m 矩阵（第 j 列为 ∇f_j(x)）；
    - 两个 oracle 都必须是确定性的纯函数，构造后整个对象只读，可在并发求解中共享；
    - mu 为最小强凸常数（未知时为 0），lipschitz 为最大梯度 Lipschitz 常数（未知时为 None，此时必须回溯）。
    """

    m: int
    n: int
    value_oracle: ValueOracle
    gradient_oracle: GradientOracle
    mu: float = 0.0
    lipschitz: Optional[float] = None
    family: str = "custom"

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise InvalidInputError(f"目标个数与维度必须为正：m={self.m}, n={self.n}")
        if self.mu < 0:
            raise InvalidInputError(f"mu 必须非负，实际为 {self.mu}")
        if self.lipschitz is not None:
            if not self.lipschitz > 0:
                raise InvalidInputError(f"lipschitz 必须为正，实际为 {self.lipschitz}")
            if self.mu > self.lipschitz:
                raise InvalidInputError(f"mu={self.mu} 不能超过 lipschitz={self.lipschitz}")


def _as_point(bundle: ObjectiveBundle, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (bundle.n,):
        raise InvalidInputError(f"x 的形状应为 ({bundle.n},)，实际为 {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x 含非有限分量")
    return x


def _first_bad_column(arr: np.ndarray) -> int:
    bad = ~np.isfinite(arr)
    if arr.ndim == 2:
        bad = bad.any(axis=0)
    return int(np.flatnonzero(bad)[0])


def eval_objectives(bundle: ObjectiveBundle, x: np.ndarray) -> np.ndarray:
    """返回 [f_1(x), …, f_m(x)]。"""
    x = _as_point(bundle, x)
    values = np.asarray(bundle.value_oracle(x), dtype=float)
    if values.shape != (bundle.m,):
        raise InvalidInputError(f"value_oracle 应返回 ({bundle.m},)，实际为 {values.shape}")
    if not np.all(np.isfinite(values)):
        j = _first_bad_column(values)
        raise DomainEvaluationError(f"目标 f_{j + 1} 在 x 处取值非有限", index=j)
    return values


def eval_jacobian(bundle: ObjectiveBundle, x: np.ndarray) -> np.ndarray:
    """返回转置 Jacobian DF(x)，形状 n×m，第 j 列为 ∇f_j(x)。"""
    x = _as_point(bundle, x)
    jac = np.asarray(bundle.gradient_oracle(x), dtype=float)
    if jac.shape != (bundle.n, bundle.m):
        raise InvalidInputError(
            f"gradient_oracle 应返回 ({bundle.n}, {bundle.m})，实际为 {jac.shape}"
        )
    if not np.all(np.isfinite(jac)):
        j = _first_bad_column(jac)
        raise DomainEvaluationError(f"梯度 ∇f_{j + 1} 在 x 处非有限", index=j)
    return jac


def fd_gradient_check(bundle: ObjectiveBundle, x: np.ndarray, h: float = 1e-5) -> float:
    """
    用中心差分校验解析梯度，返回各列相对误差的最大值。

    第 j 列误差为 ‖g_j − g_j^fd‖ / max(1, ‖g_j^fd‖)，分母下限 1 避免在驻点附近放大舍入误差。
    """
    if not 0.0 < h <= 1e-2:
        raise InvalidInputError(f"差分步长 h 必须在 (0, 1e-2] 内，实际为 {h}")
    x = _as_point(bundle, x)
    analytic = eval_jacobian(bundle, x)
    fd = np.empty_like(analytic)
    for i in range(bundle.n):
        e = np.zeros(bundle.n)
        e[i] = h
        fd[i, :] = (eval_objectives(bundle, x + e) - eval_objectives(bundle, x - e)) / (2.0 * h)
    num = np.linalg.norm(analytic - fd, axis=0)
    den = np.maximum(1.0, np.linalg.norm(fd, axis=0))
    err = float(np.max(num / den))
    logger.debug("fd_gradient_check：family=%s, h=%g, err=%.3e", bundle.family, h, err)
    return err


def quadratic_bundle(
    hessians: Sequence[np.ndarray],
    centers: Sequence[np.ndarray],
    offsets: Optional[Sequence[float]] = None,
) -> ObjectiveBundle:
    """
    二次目标组 f_j(x) = ½(x−c_j)ᵀH_j(x−c_j) + o_j。

    mu / lipschitz 取各 H_j 的最小 / 最大特征值；H_j 全为零时 lipschitz 记为 None。
    """
    H = np.array([np.asarray(h, dtype=float) for h in hessians])
    C = np.array([np.asarray(c, dtype=float) for c in centers])
    m, n = C.shape
    if H.shape != (m, n, n):
        raise InvalidInputError(f"hessians 形状应为 ({m}, {n}, {n})，实际为 {H.shape}")
    if not np.allclose(H, np.transpose(H, (0, 2, 1))):
        raise InvalidInputError("hessians 必须对称")
    o = np.zeros(m) if offsets is None else np.asarray(offsets, dtype=float)

    eigs = np.linalg.eigvalsh(H)
    mu = max(0.0, float(eigs.min()))
    top = float(eigs.max())
    lipschitz = top if top > 0 else None
    if lipschitz is not None:
        mu = min(mu, lipschitz)

    def values(x: np.ndarray) -> np.ndarray:
        d = x[None, :] - C
        return 0.5 * np.einsum("ji,jik,jk->j", d, H, d) + o

    def gradients(x: np.ndarray) -> np.ndarray:
        d = x[None, :] - C
        return np.einsum("jik,jk->ij", H, d)

    return ObjectiveBundle(
        m=m,
        n=n,
        value_oracle=values,
        gradient_oracle=gradients,
        mu=mu,
        lipschitz=lipschitz,
        family="quadratic",
    )
