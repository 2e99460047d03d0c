"""Order-preserving thread pool capped by ``NEWTONIAN_LAB_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "NEWTONIAN_LAB_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_THREADS, "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    default = min(8, os.cpu_count() or 1)
    return max(1, cap) if cap else default


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``list(map(fn, items))``, concurrently when more than one worker is
    allowed. Results keep input order, so output is deterministic."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
