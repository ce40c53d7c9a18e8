"""Thread-count policy shared by the parallel helpers."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def max_workers(requested: int | None = None) -> int:
    """Worker count, capped by the ``NCC_THREADS`` environment variable."""
    cap = os.environ.get("NCC_THREADS")
    n = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def ordered_map(fn, items, n_jobs: int | None = None) -> list:
    """``list(map(fn, items))``, optionally in worker processes; output order is input order."""
    items = list(items)
    workers = min(max_workers(n_jobs), max(1, len(items)))
    if workers == 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
