from __future__ import annotations

"""
三类带种子的基准问题：

- logsumexp：     f_j(x) = δ/2‖x‖² + ln Σ_i exp(⟨a_i^j, x⟩ − b_i^j)，j = 1,2,3；
- leastsquares：  f_j(x) = δ/2‖x‖² + ½‖A^j x − b^j‖²，j = 1,2；
- nonconvex_pair：两目标非凸例子，只依赖 a_1ᵀx 与 a_2ᵀx。

生成器是 ProblemSpec 的纯函数：同一 spec 给出逐位相同的数据。
"""

import logging
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from opt.base import InvalidSpecError
from opt.schema import FAMILY_OBJECTIVES, ProblemSpec

from .core import ObjectiveBundle
from .rng import uniform, uniform_stream


logger = logging.getLogger("amg_moo.problems")

POWER_ITERATIONS = 100
POWER_TOL = 1e-10


def _check_spec(spec: ProblemSpec, family: str, need_p: bool = True) -> None:
    if spec.family != family:
        raise InvalidSpecError(f"spec.family={spec.family!r}，但调用的是 {family} 生成器")
    if spec.n == 0:
        raise InvalidSpecError("n 必须为正")
    if need_p and spec.p == 0:
        raise InvalidSpecError("p 必须为正")


def spectral_norm_sq(A: np.ndarray) -> float:
    """
    幂迭代估计 ‖A‖₂²（AᵀA 的最大特征值）。

    起点固定为全 1 向量，最多 100 次迭代、相对变化 1e-10 时停止。
    """
    A = np.asarray(A, dtype=float)
    v = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    lam = 0.0
    for _ in range(POWER_ITERATIONS):
        w = A.T @ (A @ v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        lam_new = float(np.dot(A @ v, A @ v))
        if abs(lam_new - lam) <= POWER_TOL * max(lam_new, 1.0):
            lam = lam_new
            break
        lam = lam_new
    # 幂迭代从下方逼近
    return lam * (1.0 + 1e-9)


def logsumexp_bundle(
    A_list: Sequence[np.ndarray],
    b_list: Sequence[np.ndarray],
    delta: float,
) -> ObjectiveBundle:
    """由显式数据构造 log-sum-exp 目标组，A^j 的第 i 行为 a_i^j。"""
    A = np.array([np.asarray(a, dtype=float) for a in A_list])
    b = np.array([np.asarray(v, dtype=float) for v in b_list])
    m, p, n = A.shape
    delta = float(delta)

    def values(x: np.ndarray) -> np.ndarray:
        logits = A @ x - b  # (m, p)
        return 0.5 * delta * float(x @ x) + logsumexp(logits, axis=1)

    def gradients(x: np.ndarray) -> np.ndarray:
        weights = softmax(A @ x - b, axis=1)  # (m, p)
        return delta * x[:, None] + np.einsum("jpn,jp->nj", A, weights)

    return ObjectiveBundle(
        m=m,
        n=n,
        value_oracle=values,
        gradient_oracle=gradients,
        mu=delta,
        lipschitz=None,
        family="logsumexp",
    )


def leastsquares_bundle(
    A_list: Sequence[np.ndarray],
    b_list: Sequence[np.ndarray],
    delta: float,
) -> ObjectiveBundle:
    """由显式数据构造最小二乘目标组，lipschitz = δ + max_j ‖A^j‖₂²。"""
    A = np.array([np.asarray(a, dtype=float) for a in A_list])
    b = np.array([np.asarray(v, dtype=float) for v in b_list])
    m, p, n = A.shape
    delta = float(delta)

    lipschitz = delta + max(spectral_norm_sq(A[j]) for j in range(m))

    def values(x: np.ndarray) -> np.ndarray:
        r = A @ x - b
        return 0.5 * delta * float(x @ x) + 0.5 * np.einsum("jp,jp->j", r, r)

    def gradients(x: np.ndarray) -> np.ndarray:
        r = A @ x - b
        return delta * x[:, None] + np.einsum("jpn,jp->nj", A, r)

    return ObjectiveBundle(
        m=m,
        n=n,
        value_oracle=values,
        gradient_oracle=gradients,
        mu=delta,
        lipschitz=lipschitz if lipschitz > 0 else None,
        family="leastsquares",
    )


def nonconvex_pair_bundle(a1: np.ndarray, a2: np.ndarray) -> ObjectiveBundle:
    """
    两目标非凸例子：

        f_{1,2}(x) = ½(√(1+s_1²) + √(1+s_2²) ± s_2) + exp(−s_2²)，s_i = a_iᵀx。
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    n = a1.shape[0]

    def values(x: np.ndarray) -> np.ndarray:
        s1 = float(a1 @ x)
        s2 = float(a2 @ x)
        common = 0.5 * (np.sqrt(1.0 + s1 * s1) + np.sqrt(1.0 + s2 * s2)) + np.exp(-s2 * s2)
        return np.array([common + 0.5 * s2, common - 0.5 * s2])

    def gradients(x: np.ndarray) -> np.ndarray:
        s1 = float(a1 @ x)
        s2 = float(a2 @ x)
        common = (
            0.5 * s1 / np.sqrt(1.0 + s1 * s1) * a1
            + (0.5 * s2 / np.sqrt(1.0 + s2 * s2) - 2.0 * s2 * np.exp(-s2 * s2)) * a2
        )
        return np.column_stack([common + 0.5 * a2, common - 0.5 * a2])

    return ObjectiveBundle(
        m=2,
        n=n,
        value_oracle=values,
        gradient_oracle=gradients,
        mu=0.0,
        lipschitz=None,
        family="nonconvex_pair",
    )


def gen_logsumexp(spec: ProblemSpec) -> ObjectiveBundle:
    """ex1：a_i^j、b_i^j 在 [−1, 1) 上均匀抽样，m = 3。"""
    _check_spec(spec, "logsumexp")
    m = FAMILY_OBJECTIVES["logsumexp"]
    A = [uniform(uniform_stream(spec.seed, spec.family, f"A{j}"), -1.0, 1.0, (spec.p, spec.n)) for j in range(m)]
    b = [uniform(uniform_stream(spec.seed, spec.family, f"b{j}"), -1.0, 1.0, spec.p) for j in range(m)]
    logger.info("生成 logsumexp 问题：seed=%d, n=%d, p=%d, delta=%g", spec.seed, spec.n, spec.p, spec.delta)
    return logsumexp_bundle(A, b, spec.delta)


def gen_leastsquares(spec: ProblemSpec) -> ObjectiveBundle:
    """ex2：A^j ∈ R^{p×n}、b^j ∈ R^p 在 [0, 1) 上均匀抽样，m = 2。"""
    _check_spec(spec, "leastsquares")
    m = FAMILY_OBJECTIVES["leastsquares"]
    A = [uniform(uniform_stream(spec.seed, spec.family, f"A{j}"), 0.0, 1.0, (spec.p, spec.n)) for j in range(m)]
    b = [uniform(uniform_stream(spec.seed, spec.family, f"b{j}"), 0.0, 1.0, spec.p) for j in range(m)]
    logger.info("生成 leastsquares 问题：seed=%d, n=%d, p=%d, delta=%g", spec.seed, spec.n, spec.p, spec.delta)
    return leastsquares_bundle(A, b, spec.delta)


def gen_nonconvex_pair(spec: ProblemSpec) -> ObjectiveBundle:
    """ex3：a_1、a_2 在 [0, 1)^n 上均匀抽样，不做归一化；p 与 δ 不参与。"""
    _check_spec(spec, "nonconvex_pair", need_p=False)
    a1 = uniform(uniform_stream(spec.seed, spec.family, "a1"), 0.0, 1.0, spec.n)
    a2 = uniform(uniform_stream(spec.seed, spec.family, "a2"), 0.0, 1.0, spec.n)
    logger.info("生成 nonconvex_pair 问题：seed=%d, n=%d", spec.seed, spec.n)
    return nonconvex_pair_bundle(a1, a2)


_GENERATORS = {
    "logsumexp": gen_logsumexp,
    "leastsquares": gen_leastsquares,
    "nonconvex_pair": gen_nonconvex_pair,
}


def generate_bundle(spec: ProblemSpec) -> ObjectiveBundle:
    """按 spec.family 分派到对应生成器。"""
    return _GENERATORS[spec.family](spec)
