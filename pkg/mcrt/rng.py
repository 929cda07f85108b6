"""
随机数流与并行工具。

- trial_rng(master_seed, index)：由 (主种子, 序号) 派生独立的 Philox 生成器，无共享可变状态
- parallel_map(fn, items)：线程池有序映射，结果顺序与输入一致，保证归约可复现
- thread_limit()：读取环境变量 MCRT_THREADS
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "MCRT_THREADS"


def spawn_seed(master_seed: int, *path: int) -> np.random.SeedSequence:
    """由主种子和路径序号构造 SeedSequence。"""
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *[int(p) for p in path]])


def trial_rng(master_seed: int, *path: int) -> np.random.Generator:
    """计数器式生成器：相同 (主种子, 序号) 得到相同的随机流。"""
    return np.random.Generator(np.random.Philox(spawn_seed(master_seed, *path)))


def derive_seed(master_seed: int, *path: int) -> int:
    """派生一个 63 位整数子种子，便于写入报告。"""
    state = spawn_seed(master_seed, *path).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & 0x7FFFFFFFFFFFFFFF


def thread_limit(default: Optional[int] = None) -> int:
    """MCRT_THREADS 优先，否则取 CPU 数。"""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
            if value >= 1:
                return value
        except ValueError:
            pass
    return max(1, default or os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """有序并行映射；单线程时直接顺序执行。"""
    items = list(items)
    workers = min(threads or thread_limit(), max(1, len(items)))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
