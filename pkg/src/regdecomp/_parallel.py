"""Thread-pool map honouring the ``REGDECOMP_THREADS`` cap."""

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import PreconditionError


def worker_count() -> int:
    raw = os.environ.get("REGDECOMP_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise PreconditionError(f"REGDECOMP_THREADS must be a nonnegative integer, got {raw!r}") from None
    if n < 0:
        raise PreconditionError(f"REGDECOMP_THREADS must be a nonnegative integer, got {raw!r}")
    if n == 0:
        n = os.cpu_count() or 1
    return n


def parallel_map(fn, items):
    """``list(map(fn, items))``, run on up to ``worker_count()`` threads.

    Output order always follows input order.
    """
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
