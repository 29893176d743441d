"""Reproducible chunked sampling.

Work is cut into fixed-size chunks; chunk i draws from a generator seeded by
SeedSequence((seed, i)).  Results are concatenated in chunk order, so output
depends only on (seed, chunk_size), never on the number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

DEFAULT_CHUNK = 8192


def resolve_workers(workers: int | None = None) -> int:
    env = os.environ.get("LLG_THREADS")
    if env:
        return max(1, int(env))
    return max(1, int(workers or 1))


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def chunk_sizes(n: int, chunk: int = DEFAULT_CHUNK) -> list[int]:
    full, rest = divmod(int(n), int(chunk))
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(fn: Callable[[np.random.Generator, int], object], n: int, seed: int,
               chunk: int = DEFAULT_CHUNK, workers: int | None = None) -> list:
    """[fn(rng_i, size_i) for each chunk], evaluated on a thread pool."""
    sizes = chunk_sizes(n, chunk)
    workers = resolve_workers(workers)
    jobs = [(chunk_rng(seed, i), s) for i, s in enumerate(sizes)]
    if workers == 1 or len(jobs) <= 1:
        return [fn(rng, s) for rng, s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def concat_chunks(fn, n, seed, chunk=DEFAULT_CHUNK, workers=None) -> np.ndarray:
    parts = map_chunks(fn, n, seed, chunk, workers)
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)
