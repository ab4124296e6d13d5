"""Deterministic random substreams.

Every random draw in the package comes from a PCG64 generator seeded by a
``numpy.random.SeedSequence`` whose spawn key names the consumer (a stream
tag plus block or day indices).  A given ``(seed, key)`` always reproduces
the same numbers no matter how work is split across threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# stream tags, one per consumer
LAMBDA = 1
CONSTANT_SIGMA = 2
SV_PRICE = 3
SV_VOLATILITY = 4
TICKS = 5
IRREGULAR = 6

_SEED_MASK = (1 << 64) - 1


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def default_workers() -> int:
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Map ``fn`` over ``items`` on a thread pool, keeping input order.

    numpy releases the GIL in bulk generation and reductions, so threads give
    real speedup for the block workloads here.
    """
    items = list(items)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
