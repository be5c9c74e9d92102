from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from opt.base import InvalidSpecError, OptError

from .config import HarnessConfig, get_harness_config
from .tools.experiment_schema import ExperimentConfigError, load_experiment_config
from .tools.harness import cmd_compare, cmd_front, cmd_run


PROJECT_ROOT = Path(__file__).resolve().parents[1]

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_FAILURE = 3

logger = logging.getLogger("amg_moo.cli")


def setup_logging(cfg: HarnessConfig) -> Path:
    """每次进程新建一个带时间戳的日志文件，只保留最近 cfg.log_keep 个。"""
    log_dir = Path(cfg.log_dir)
    if not log_dir.is_absolute():
        log_dir = PROJECT_ROOT / log_dir
    log_dir.mkdir(parents=True, exist_ok=True)

    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_file = log_dir / f"harness_{timestamp}.log"

    # 清理旧日志
    log_files = sorted(log_dir.glob("harness_*.log"), key=lambda p: p.stat().st_mtime, reverse=True)
    for old_log in log_files[max(cfg.log_keep - 1, 0):]:
        try:
            old_log.unlink()
        except Exception:  # noqa: BLE001
            pass  # 删除失败不影响主流程

    stderr_handler = logging.StreamHandler(sys.stderr)
    stderr_handler.setLevel(logging.WARNING)
    logging.basicConfig(
        level=getattr(logging, cfg.log_level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s - %(message)s",
        handlers=[
            logging.FileHandler(log_file, encoding="utf-8", mode="w"),
            stderr_handler,
        ],
        force=True,
    )
    logger.info("=== 新进程启动，日志文件：%s ===", log_file.name)
    return log_file


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="多目标加速梯度方法的批量实验")
    sub = parser.add_subparsers(dest="command", required=True)

    def _common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="实验配置路径（JSON，失败回退 YAML）")
        p.add_argument("--out", default=None, help="输出目录，覆盖配置中的 output_dir")
        p.add_argument("--jobs", type=int, default=None, help="并发起点数，默认取 AMG_JOBS")

    _common(sub.add_parser("run", help="逐 (方法, 起点) 写出迭代 trace"))
    _common(sub.add_parser("compare", help="按残差阈值汇总各方法的迭代数与用时"))
    front = sub.add_parser("front", help="在第 k 步采样近似 Pareto 前沿")
    _common(front)
    front.add_argument("--k-snapshot", type=int, default=25, help="采样的迭代步，默认为 25")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    hcfg = get_harness_config()
    setup_logging(hcfg)

    try:
        config = load_experiment_config(args.config)
        if args.command == "run":
            result = cmd_run(config, out=args.out, jobs=args.jobs, harness_cfg=hcfg)
        elif args.command == "compare":
            result = cmd_compare(config, out=args.out, jobs=args.jobs, harness_cfg=hcfg)
            print(result["table"], end="")
        else:
            result = cmd_front(config, args.k_snapshot, out=args.out, jobs=args.jobs, harness_cfg=hcfg)
    except (ExperimentConfigError, ValidationError, InvalidSpecError) as exc:
        logger.error("配置错误：%s", exc)
        print(f"[配置错误] {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OptError as exc:
        logger.exception("运行失败：%s", exc)
        print(f"[运行失败] {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE

    summary = {k: v for k, v in result.items() if k not in ("rows", "header", "table")}
    print(json.dumps(summary, ensure_ascii=False, indent=2))
    if not result["success"]:
        return EXIT_SOLVER_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
