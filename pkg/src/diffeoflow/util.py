"""Small shared helpers: thread cap, chunked node-parallel map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_THREADS_ENV = "DIFFEOFLOW_THREADS"


def max_threads() -> int:
    """Worker-thread cap from the DIFFEOFLOW_THREADS env var (default 1)."""
    raw = os.environ.get(_THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


def map_node_chunks(fn, points: np.ndarray, threads: int | None = None) -> np.ndarray:
    """Apply ``fn`` to row-chunks of ``points`` and concatenate the results.

    Rows are independent (one grid node each), so chunking never changes
    per-row arithmetic; results are reassembled in chunk order, keeping the
    output bit-identical to the single-threaded evaluation.
    """
    n_threads = max_threads() if threads is None else max(1, threads)
    m = points.shape[0]
    if n_threads == 1 or m < 2 * n_threads:
        return fn(points)
    bounds = np.linspace(0, m, n_threads + 1).astype(int)
    chunks = [points[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=0)
