"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

Per-sample work runs in a thread pool; results always come back in input order
so a run with threads=1 and a run with threads=N agree.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

logger = logging.getLogger(__name__)


def ordered_map(fn, items, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    logger.debug("ordered_map: %d items on %d threads", len(items), threads)
    with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="purikit") as pool:
        futures = [pool.submit(fn, item) for item in items]
        results = []
        for future in futures:
            try:
                results.append(future.result())
            except Exception:
                logger.exception("unhandled exception in worker thread")
                raise
        return results
