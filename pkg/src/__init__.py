"""
批处理与命令行层。

`main.py` 定义命令行入口（run / compare / front），
具体的多起点调度与 CSV / JSON 输出在 `tools/harness.py` 中。
"""
