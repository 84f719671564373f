"""Order-preserving map over a process pool.

Jobs carry their own seeds, so results do not depend on the worker count.
"""

from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    workers = min(workers, len(items))
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
        return list(ex.map(fn, items))


def chunk_indices(n: int, pieces: int) -> list[range]:
    """Split ``range(n)`` into at most ``pieces`` contiguous ranges."""
    pieces = max(1, min(pieces, n)) if n else 1
    bounds = [round(i * n / pieces) for i in range(pieces + 1)]
    return [range(bounds[i], bounds[i + 1]) for i in range(pieces) if bounds[i] < bounds[i + 1]]
