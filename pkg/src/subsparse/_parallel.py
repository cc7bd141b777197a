"""Process-wide worker cap shared by every parallel section.

Parallel sections always merge results in input order, so any cap
reproduces the single-threaded output exactly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "SUBSPARSE_THREADS"

_threads: int | None = None


def get_threads() -> int:
    if _threads is not None:
        return _threads
    try:
        return max(1, int(os.environ.get(ENV_VAR, "1")))
    except ValueError:
        return 1


def set_threads(n: int | None) -> None:
    global _threads
    _threads = None if n is None else max(1, int(n))


def ordered_map(fn, items):
    items = list(items)
    workers = min(get_threads(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
