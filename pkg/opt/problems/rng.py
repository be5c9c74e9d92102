"""
按 (seed, family, 数组名) 拆分的 Philox 随机流。

约定：
- Philox 是计数器型 64 位生成器，跨平台逐位可复现；
- 每个数组使用独立的流，改变其它数组或起点个数不会扰动已有数据；
- 均匀分布取 [lo, hi)，由 53 位尾数的 [0, 1) 双精度抽样线性映射得到。
"""

from __future__ import annotations

import zlib
from typing import Tuple, Union

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def uniform_stream(seed: int, family: str, name: str) -> np.random.Generator:
    """返回 (seed, family, name) 对应的独立随机流。"""
    seq = np.random.SeedSequence(
        entropy=int(seed),
        spawn_key=(_name_key(family), _name_key(name)),
    )
    return np.random.Generator(np.random.Philox(seq))


def uniform(
    gen: np.random.Generator,
    lo: float,
    hi: float,
    shape: Union[int, Tuple[int, ...]],
) -> np.ndarray:
    """在 [lo, hi) 上均匀抽样。"""
    u = gen.random(shape)
    return lo + (hi - lo) * u
