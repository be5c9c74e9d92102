"""
与实验批处理相关的工具函数。

目前主要包含：
- `experiment_schema.load_experiment_config`：读取并校验实验配置（JSON，失败回退 YAML）；
- `harness.cmd_run / cmd_compare / cmd_front`：多起点运行与结果汇总。
"""
