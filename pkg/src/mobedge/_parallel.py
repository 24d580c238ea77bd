"""Deterministic thread-pool map used by the sweep-style routines."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "MOBEDGE_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def pmap(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """``[fn(x) for x in items]``; results are written by index so order never depends on scheduling."""
    items = list(items)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    out: list = [None] * len(items)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(fn, x): i for i, x in enumerate(items)}
        for fut, i in futures.items():
            out[i] = fut.result()
    return out
