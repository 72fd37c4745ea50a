"""Order-preserving map over trials, capped by ``GAITPD_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial


def worker_count() -> int:
    try:
        n = int(os.environ.get("GAITPD_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def pmap(fn, items, *args):
    """``[fn(item, *args) for item in items]``, in input order."""
    items = list(items)
    call = partial(_apply, fn, args)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [call(item) for item in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(call, items))


def _apply(fn, args, item):
    return fn(item, *args)
