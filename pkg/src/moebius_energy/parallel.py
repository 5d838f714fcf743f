"""Fixed-block pair loops whose results do not depend on the thread count.

Rows are cut into blocks of a fixed size. Blocks may run on a thread pool
(numpy releases the GIL inside its kernels), and the per-block partials are
always combined in block order, so the reduction is bit-identical for any
number of threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

BLOCK_ROWS = 128

_threads: int | None = None


def set_threads(n: int | None) -> None:
    global _threads
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = n


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("ENERGY_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _blocks(n_rows: int, block: int) -> list[tuple[int, int]]:
    return [(s, min(s + block, n_rows)) for s in range(0, n_rows, block)]


def map_blocks(fn: Callable[[int, int], object], n_rows: int, block: int = BLOCK_ROWS) -> list:
    """Evaluate ``fn(start, stop)`` on every row block, results in block order."""
    spans = _blocks(n_rows, block)
    threads = get_threads()
    if threads == 1 or len(spans) == 1:
        return [fn(s, e) for s, e in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda se: fn(*se), spans))


def block_sum(fn: Callable[[int, int], float], n_rows: int, block: int = BLOCK_ROWS) -> float:
    """Exactly rounded sum of per-block float partials."""
    return math.fsum(map_blocks(fn, n_rows, block))


def block_sum_arrays(fn: Callable[[int, int], np.ndarray], n_rows: int, block: int = BLOCK_ROWS) -> np.ndarray:
    parts = map_blocks(fn, n_rows, block)
    out = np.zeros_like(parts[0])
    for p in parts:
        out = out + p
    return out
