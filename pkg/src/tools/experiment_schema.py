from __future__ import annotations

"""
使用 Pydantic 定义实验配置（ExperimentConfig）的结构约束。

注意：
- 默认值与数值实验的基准设置一致：n_starts=100，起点盒子 [−2, 2]^n，max_iters=500；
- 方法中 max_iters 为 null 时由实验级 max_iters 补齐，补齐后的配置即 manifest.json 的内容；
- 配置文件优先按 JSON 解析，失败后回退为 YAML。
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from opt.schema import MethodConfig, ProblemSpec


logger = logging.getLogger("amg_moo.harness")


class ExperimentConfigError(ValueError):
    """实验配置文件无法读取或解析。"""


class ExperimentConfig(BaseModel):
    """一次批量实验：一个问题实例、若干方法、N 个带种子的起点。"""

    model_config = ConfigDict(extra="forbid")

    problem: ProblemSpec
    methods: List[MethodConfig] = Field(min_length=1)
    n_starts: int = Field(default=100, ge=1)
    init_box: Tuple[float, float] = (-2.0, 2.0)
    init_seed: int = Field(default=0, ge=0, lt=2**64)
    max_iters: int = Field(default=500, ge=0)
    # 为 None 时落到 AMG_OUTPUT_DIR
    output_dir: Optional[str] = None

    @field_validator("init_box")
    @classmethod
    def _box_ordered(cls, box: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = box
        if not lo < hi:
            raise ValueError(f"init_box 需满足 lo < hi，实际为 {box}")
        return box

    @model_validator(mode="after")
    def _resolve_method_budgets(self) -> "ExperimentConfig":
        self.methods = [
            m if m.max_iters is not None else m.model_copy(update={"max_iters": self.max_iters})
            for m in self.methods
        ]
        return self


def _load_raw_config(path: Path) -> Dict[str, Any]:
    """
    尝试以 JSON 读取，失败则回退为 YAML。
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ExperimentConfigError(f"无法读取配置文件 {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ExperimentConfigError(f"无法解析配置文件 {path}: {e}") from e
    if not isinstance(data, dict):
        raise ExperimentConfigError(f"配置文件 {path} 的顶层必须是对象")
    return data


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """读取并校验实验配置；pydantic 的 ValidationError 原样抛出。"""
    path = Path(path)
    cfg = ExperimentConfig.model_validate(_load_raw_config(path))
    logger.info(
        "已加载实验配置：%s（family=%s, methods=%s, n_starts=%d）",
        path,
        cfg.problem.family,
        [m.label for m in cfg.methods],
        cfg.n_starts,
    )
    return cfg
