from __future__ import annotations

"""
使用 Pydantic 定义问题 / 方法 / 参考点集的 JSON 结构。

注意：
- ProblemSpec 禁止未知字段，键的顺序无关；
- n、p 只在结构层面要求非负，是否能生成目标函数组由生成器判断（InvalidSpecError）；
- 重启类方法要求 mu = 0。
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


Family = Literal["logsumexp", "leastsquares", "nonconvex_pair"]
Method = Literal["SD", "APG", "AMG_QP", "AMG_QP_BT", "AMG_QP_SR", "AMG_QP_ResR"]

RESTART_METHODS = ("AMG_QP_SR", "AMG_QP_ResR")
BACKTRACKING_METHODS = ("SD", "APG", "AMG_QP_BT", "AMG_QP_SR", "AMG_QP_ResR")

# 各 family 固定的目标个数
FAMILY_OBJECTIVES = {"logsumexp": 3, "leastsquares": 2, "nonconvex_pair": 2}


class ProblemSpec(BaseModel):
    """基准问题描述：family + 随机种子 + 维度 + 正则参数 δ。"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    family: Family
    seed: int = Field(ge=0, lt=2**64)
    n: int = Field(default=100, ge=0)
    p: int = Field(default=100, ge=0)
    delta: float = Field(default=0.05, ge=0.0)


class MethodConfig(BaseModel):
    """
    单个方法的参数。

    - L_or_M0：AMG_QP 使用的固定 L，或回溯类方法的初始 M_0；
    - theta0 仅 APG 使用；
    - max_iters 为 None 时由实验配置统一补齐；
    - kkt_tol = 0 表示不按残差提前停止。
    """

    model_config = ConfigDict(extra="forbid")

    method: Method
    mu: float = Field(default=0.0, ge=0.0)
    L_or_M0: float = Field(default=10.0, gt=0.0)
    gamma0: float = Field(default=1.0, gt=0.0)
    theta0: float = Field(default=1.0, gt=0.0)
    max_iters: Optional[int] = Field(default=None, ge=0)
    kkt_tol: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _restart_requires_convex_setting(self) -> "MethodConfig":
        if self.method in RESTART_METHODS and self.mu != 0.0:
            raise ValueError(f"{self.method} 要求 mu = 0，实际为 {self.mu}")
        return self

    @property
    def label(self) -> str:
        if self.method in ("AMG_QP", "AMG_QP_BT") and self.mu > 0:
            return f"{self.method}(mu={self.mu:g})"
        return self.method


class ReferencePointModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: List[float]
    values: List[float]
    residual: float = Field(ge=0.0)


class ReferenceSetModel(BaseModel):
    """ReferenceSet 的 JSON 形式：点、目标值与 KKT 残差。"""

    model_config = ConfigDict(extra="forbid")

    points: List[ReferencePointModel] = Field(default_factory=list)
