from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from opt.base import TRACE_COLUMNS, RunTrace
from opt.diagnostics import dominance_filter
from opt.hullproj import kkt_residual
from opt.problems import ObjectiveBundle, eval_objectives, generate_bundle, uniform, uniform_stream
from opt.schema import MethodConfig
from opt.solvers import run
from src.config import HarnessConfig, get_harness_config

from .experiment_schema import ExperimentConfig, ExperimentConfigError


logger = logging.getLogger("amg_moo.harness")

THRESHOLDS = (1e-2, 1e-4, 1e-6)
INF_SENTINEL = "∞"
_INT_COLUMNS = {"k", "restart_flag", "backtrack_count"}


# ------------------------- 文件输出 ------------------------- #
def _atomic_write(path: Path, text: str) -> None:
    """先写同目录临时文件，再 os.replace，保证并发下不会留下半截文件。"""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def trace_to_csv(trace: RunTrace) -> str:
    """trace → CSV 文本：整数列原样输出，其余浮点统一 %.12e。"""
    rows = []
    for r in trace.records:
        row = []
        for name in TRACE_COLUMNS:
            v = getattr(r, name)
            row.append(str(int(v)) if name in _INT_COLUMNS else f"{float(v):.12e}")
        rows.append(row)
    return _csv_text(TRACE_COLUMNS, rows)


def method_dir(out: Path, idx: int, method: MethodConfig) -> Path:
    return out / f"{idx:02d}_{method.method}"


def start_path(out: Path, idx: int, method: MethodConfig, start: int) -> Path:
    return method_dir(out, idx, method) / f"start_{start:04d}.csv"


def initial_point(config: ExperimentConfig, start: int, n: int) -> np.ndarray:
    """第 start 个起点，取自 (init_seed, "init", start-i) 随机流，与问题数据流互不干扰。"""
    lo, hi = config.init_box
    return uniform(uniform_stream(config.init_seed, "init", f"start-{start}"), lo, hi, n)


# ------------------------- 单起点任务 ------------------------- #
def run_start_safe(
    bundle: ObjectiveBundle,
    method: MethodConfig,
    x0: np.ndarray,
    path: Optional[Path] = None,
    *,
    harness_cfg: Optional[HarnessConfig] = None,
) -> Dict[str, Any]:
    """
    单个 (方法, 起点) 任务的包装，不抛异常。

    返回值格式：
    - 成功时：
        {"success": True, "trace": RunTrace, "path": "<csv 路径或 None>"}
    - 失败时：
        {"success": False, "error": "<人类可读的错误信息>", "traceback": "..."}
    """
    hcfg = harness_cfg or get_harness_config()
    try:
        trace = run(
            bundle,
            method,
            x0,
            qp_tol=hcfg.qp_tol,
            max_backtracks=hcfg.max_backtracks,
        )
        if path is not None:
            _atomic_write(path, trace_to_csv(trace))
    except Exception as exc:  # noqa: BLE001
        logger.exception("运行失败：method=%s, path=%s", method.label, path)
        return {
            "success": False,
            "error": f"{method.label} 运行失败: {exc}",
            "traceback": traceback.format_exc(),
        }
    return {"success": True, "trace": trace, "path": str(path) if path is not None else None}


def _run_tasks(
    tasks: Sequence[Tuple[int, int]],
    fn: Callable[[int, int], Dict[str, Any]],
    jobs: int,
) -> Dict[Tuple[int, int], Dict[str, Any]]:
    """并发执行 (方法序号, 起点序号) 任务；结果按键收集，与完成顺序无关。"""
    if jobs <= 1:
        return {t: fn(*t) for t in tasks}
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {t: pool.submit(fn, *t) for t in tasks}
        return {t: fut.result() for t, fut in futures.items()}


def _prepare(
    config: ExperimentConfig,
    out: Optional[str],
    harness_cfg: Optional[HarnessConfig],
) -> Tuple[ExperimentConfig, Path, ObjectiveBundle, HarnessConfig]:
    hcfg = harness_cfg or get_harness_config()
    if out is None and config.output_dir is None:
        out = hcfg.output_dir
    if out is not None:
        config = config.model_copy(update={"output_dir": str(out)})
    out_dir = Path(config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExperimentConfigError(f"输出目录不可写：{out_dir}: {e}") from e
    bundle = generate_bundle(config.problem)
    _atomic_write(out_dir / "manifest.json", config.model_dump_json(indent=2) + "\n")
    return config, out_dir, bundle, hcfg


def _write_failures(out_dir: Path, config: ExperimentConfig, results: Dict[Tuple[int, int], Dict[str, Any]]) -> int:
    failures = [
        {
            "method_index": m,
            "method": config.methods[m].label,
            "start": s,
            "error": res["error"],
            "traceback": res["traceback"],
        }
        for (m, s), res in sorted(results.items())
        if not res["success"]
    ]
    _atomic_write(out_dir / "failures.json", json.dumps(failures, ensure_ascii=False, indent=2) + "\n")
    if failures:
        logger.warning("%d 个起点运行失败，详情见 %s", len(failures), out_dir / "failures.json")
    return len(failures)


def _run_experiment(
    config: ExperimentConfig,
    out: Optional[str],
    jobs: Optional[int],
    harness_cfg: Optional[HarnessConfig],
) -> Tuple[ExperimentConfig, Path, Dict[Tuple[int, int], Dict[str, Any]], int]:
    config, out_dir, bundle, hcfg = _prepare(config, out, harness_cfg)
    jobs = jobs if jobs is not None else hcfg.jobs
    x0s = [initial_point(config, i, bundle.n) for i in range(config.n_starts)]

    def task(m: int, s: int) -> Dict[str, Any]:
        method = config.methods[m]
        return run_start_safe(bundle, method, x0s[s], start_path(out_dir, m, method, s), harness_cfg=hcfg)

    tasks = [(m, s) for m in range(len(config.methods)) for s in range(config.n_starts)]
    logger.info("开始批量运行：%d 个方法 × %d 个起点，jobs=%d", len(config.methods), config.n_starts, jobs)
    results = _run_tasks(tasks, task, jobs)
    n_failed = _write_failures(out_dir, config, results)
    return config, out_dir, results, n_failed


# ------------------------- 子命令 ------------------------- #
def cmd_run(
    config: ExperimentConfig,
    *,
    out: Optional[str] = None,
    jobs: Optional[int] = None,
    harness_cfg: Optional[HarnessConfig] = None,
) -> Dict[str, Any]:
    """每个 (方法, 起点) 写一份 trace CSV，另写 manifest.json 与 failures.json。"""
    config, out_dir, results, n_failed = _run_experiment(config, out, jobs, harness_cfg)
    return {
        "success": n_failed == 0,
        "output_dir": str(out_dir),
        "runs": len(results),
        "failures": n_failed,
    }


def _median_or_inf(values: List[float]) -> float:
    return float(np.median(values)) if values else float("inf")


def _fmt_iters(v: float) -> str:
    return INF_SENTINEL if not np.isfinite(v) else f"{v:g}"


def _fmt_wall(v: float) -> str:
    return INF_SENTINEL if not np.isfinite(v) else f"{v:.6f}"


def _aligned(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def summarize_traces(traces: Sequence[Optional[RunTrace]]) -> Dict[float, Tuple[float, float]]:
    """
    各阈值下 (迭代数中位数, 用时中位数)。

    未达到阈值（或运行失败）的起点记为 ∞ 参与中位数。
    """
    summary: Dict[float, Tuple[float, float]] = {}
    for thr in THRESHOLDS:
        iters: List[float] = []
        walls: List[float] = []
        for trace in traces:
            k = trace.first_k_below(thr) if trace is not None else None
            if k is None:
                iters.append(float("inf"))
                walls.append(float("inf"))
            else:
                iters.append(float(k))
                walls.append(trace.records[k].wall_seconds)
        summary[thr] = (_median_or_inf(iters), _median_or_inf(walls))
    return summary


def cmd_compare(
    config: ExperimentConfig,
    *,
    out: Optional[str] = None,
    jobs: Optional[int] = None,
    harness_cfg: Optional[HarnessConfig] = None,
) -> Dict[str, Any]:
    """
    运行全部方法后按残差阈值 {1e-2, 1e-4, 1e-6} 汇总迭代数与用时的中位数。

    输出 compare.csv 与对齐的 compare.txt；从未达到的阈值记为 "∞"。
    """
    if len(config.methods) < 2:
        raise ExperimentConfigError("compare 至少需要 2 个方法")
    config, out_dir, results, n_failed = _run_experiment(config, out, jobs, harness_cfg)

    header = ["method"]
    for thr in THRESHOLDS:
        header += [f"iters_{thr:.0e}", f"wall_{thr:.0e}"]
    rows: List[List[str]] = []
    for m, method in enumerate(config.methods):
        traces = [
            results[(m, s)]["trace"] if results[(m, s)]["success"] else None
            for s in range(config.n_starts)
        ]
        summary = summarize_traces(traces)
        row = [method.label]
        for thr in THRESHOLDS:
            it, wall = summary[thr]
            row += [_fmt_iters(it), _fmt_wall(wall)]
        rows.append(row)

    _atomic_write(out_dir / "compare.csv", _csv_text(header, rows))
    table = _aligned(header, rows)
    _atomic_write(out_dir / "compare.txt", table)
    logger.info("对比结果：\n%s", table)
    return {
        "success": n_failed == 0,
        "output_dir": str(out_dir),
        "header": header,
        "rows": rows,
        "table": table,
        "failures": n_failed,
    }


def cmd_front(
    config: ExperimentConfig,
    k_snapshot: int = 25,
    *,
    out: Optional[str] = None,
    jobs: Optional[int] = None,
    harness_cfg: Optional[HarnessConfig] = None,
) -> Dict[str, Any]:
    """
    每个方法从 N 个起点运行到第 k_snapshot 步，取 F(x_k) 做支配过滤后写出前沿。

    每个方法一个文件 front_<序号>_<方法>.csv，列为 start, F_1..F_m, kkt_start, kkt_snapshot。
    """
    if k_snapshot < 0:
        raise ExperimentConfigError(f"k_snapshot 必须非负，实际为 {k_snapshot}")
    config, out_dir, bundle, hcfg = _prepare(config, out, harness_cfg)
    jobs = jobs if jobs is not None else hcfg.jobs
    x0s = [initial_point(config, i, bundle.n) for i in range(config.n_starts)]
    # 快照必须停在第 k_snapshot 步，不因残差提前停止
    snap_methods = [m.model_copy(update={"max_iters": k_snapshot, "kkt_tol": 0.0}) for m in config.methods]

    def task(m: int, s: int) -> Dict[str, Any]:
        res = run_start_safe(bundle, snap_methods[m], x0s[s], harness_cfg=hcfg)
        if not res["success"]:
            return res
        trace: RunTrace = res["trace"]
        x_k = trace.final_state.x
        try:
            res["values"] = eval_objectives(bundle, x_k)
            res["kkt_snapshot"] = kkt_residual(bundle, x_k, hcfg.qp_tol)
        except Exception as exc:  # noqa: BLE001
            logger.exception("快照求值失败：method=%s, start=%d", snap_methods[m].label, s)
            return {
                "success": False,
                "error": f"{snap_methods[m].label} 快照求值失败: {exc}",
                "traceback": traceback.format_exc(),
            }
        res["kkt_start"] = trace.records[0].kkt_residual
        return res

    tasks = [(m, s) for m in range(len(config.methods)) for s in range(config.n_starts)]
    results = _run_tasks(tasks, task, jobs)
    n_failed = _write_failures(out_dir, config, results)

    header = ["start"] + [f"F_{j + 1}" for j in range(bundle.m)] + ["kkt_start", "kkt_snapshot"]
    files: List[str] = []
    for m, method in enumerate(config.methods):
        ok = [s for s in range(config.n_starts) if results[(m, s)]["success"]]
        keep = dominance_filter([results[(m, s)]["values"] for s in ok]) if ok else []
        rows = []
        for idx in keep:
            s = ok[idx]
            res = results[(m, s)]
            rows.append(
                [str(s)]
                + [f"{v:.12e}" for v in res["values"]]
                + [f"{res['kkt_start']:.12e}", f"{res['kkt_snapshot']:.12e}"]
            )
        path = out_dir / f"front_{m:02d}_{method.method}.csv"
        _atomic_write(path, _csv_text(header, rows))
        files.append(str(path))
        logger.info("%s：k=%d 时非支配点 %d/%d 个", method.label, k_snapshot, len(rows), len(ok))
    return {"success": n_failed == 0, "output_dir": str(out_dir), "files": files, "failures": n_failed}
