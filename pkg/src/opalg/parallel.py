"""Seeded trial loops. Each trial gets its own RNG stream spawned from the run
seed, so results do not depend on how many workers execute them."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

T = TypeVar("T")


def thread_count() -> int:
    raw = os.environ.get("OPALG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def trial_map(fn: Callable[[np.random.Generator], T], trials: int, seed: int) -> list[T]:
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]
    workers = thread_count()
    if workers == 1 or trials < 2:
        return [fn(r) for r in streams]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, streams))
