import os
from dataclasses import dataclass, field

from dotenv import load_dotenv


# 加载 .env 文件中的环境变量
load_dotenv()


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


@dataclass
class HarnessConfig:
    """批处理与数值内核的运行期配置。

    说明：
    - 所有字段都可以通过环境变量或项目根目录的 .env 文件覆盖，变量名见 env.example；
    - 实验本身（问题、方法、起点个数）不在这里配置，而是由 --config 指定的实验文件描述。
    """

    # 单纯形 QP 的驻点容差，必须在 [1e-14, 1e-6] 内
    qp_tol: float = field(default_factory=lambda: _env_float("AMG_QP_TOL", 1e-12))

    # 回溯倍增次数上限
    max_backtracks: int = field(default_factory=lambda: _env_int("AMG_MAX_BACKTRACKS", 60))

    log_level: str = field(default_factory=lambda: os.getenv("AMG_LOG_LEVEL", "INFO"))
    log_dir: str = field(default_factory=lambda: os.getenv("AMG_LOG_DIR", "logs"))
    # 只保留最近若干个日志文件
    log_keep: int = field(default_factory=lambda: _env_int("AMG_LOG_KEEP", 10))

    output_dir: str = field(default_factory=lambda: os.getenv("AMG_OUTPUT_DIR", "data/runs"))
    jobs: int = field(default_factory=lambda: _env_int("AMG_JOBS", 1))


def get_harness_config() -> HarnessConfig:
    return HarnessConfig()
