"""Process-pool helper: order-preserving map with a fork context."""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor


def parallel_map(fn, items, workers: int):
    """Map fn over items, results in input order.

    workers <= 1 runs inline. Forked workers inherit module globals, which the
    evaluation tasks use to receive their shared read-only context; results
    are keyed by position so the worker count never changes the output.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(workers, len(items)), mp_context=ctx) as ex:
        return list(ex.map(fn, items))
