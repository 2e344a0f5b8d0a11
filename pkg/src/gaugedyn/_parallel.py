"""Deterministic chunked execution.

Work is split into chunks whose boundaries depend only on the problem
size, never on the number of workers, and results are reassembled in
chunk order. Output is therefore bit-identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

CHUNK = 1 << 15
ENV_VAR = "GAUGEDYN_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Return the worker count: explicit value, then env var, then CPU count."""
    if threads is None:
        env = os.environ.get(ENV_VAR, "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError:
                threads = None
    if threads is None:
        threads = os.cpu_count() or 1
    return max(1, int(threads))


def chunk_bounds(n: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(i, min(i + chunk, n)) for i in range(0, n, chunk)]


def ordered_map(fn: Callable[..., T], tasks: Sequence, threads: int | None = None) -> list[T]:
    """Apply ``fn`` to every task, returning results in task order."""
    nthreads = resolve_threads(threads)
    if nthreads == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(fn, tasks))
