"""Cell marching along a ray in integer coordinates (any dimension).

The ray is given in lattice-coefficient coordinates u(t) = u0 + t du.  Space is
cut into the cells j + [-1/2, 1/2)^d, j integer, and the ray visits them in
order (Amanatides-Woo stepping).  For a tube radius r every integer point within
distance r of the ray lies within sup-distance floor(r + 1/2) of a visited cell
center, so emitting that neighborhood is a superset of all candidates.
"""
from __future__ import annotations

import itertools
import math
from typing import Iterator

import numpy as np


def neighborhood(d: int, radius: float) -> np.ndarray:
    k = int(math.floor(radius + 0.5))
    return np.array(list(itertools.product(range(-k, k + 1), repeat=d)), dtype=np.int64)


def visited_cells(u0, du, t_max: float) -> Iterator[tuple[float, np.ndarray]]:
    """Yield (t_enter, j) for the cells j + [-1/2, 1/2)^d met by u0 + t du, 0 <= t <= t_max."""
    u0 = np.asarray(u0, dtype=float)
    du = np.asarray(du, dtype=float)
    j = np.floor(u0 + 0.5).astype(np.int64)
    step = np.where(du > 0, 1, np.where(du < 0, -1, 0))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        boundary = j + 0.5 * step
        t_next = np.where(step != 0, (boundary - u0) / du, math.inf)
        t_delta = np.where(step != 0, 1.0 / np.abs(du), math.inf)
    t = 0.0
    while t <= t_max:
        yield t, j.copy()
        i = int(np.argmin(t_next))
        t = float(t_next[i])
        if not math.isfinite(t):
            return
        j[i] += step[i]
        t_next[i] += t_delta[i]


def traverse_cells(u0, du, t_max: float, radius: float) -> Iterator[tuple[float, np.ndarray]]:
    """Yield (t_enter, candidates) per visited cell; candidates has shape (k, d)."""
    nb = neighborhood(len(u0), radius)
    for t, j in visited_cells(u0, du, t_max):
        yield t, j + nb


def tube_candidates(u0, du, t_max: float, radius: float) -> np.ndarray:
    """All distinct candidates of ``traverse_cells`` stacked into one array."""
    chunks = [c for _, c in traverse_cells(u0, du, t_max, radius)]
    if not chunks:
        return np.empty((0, len(u0)), dtype=np.int64)
    return np.unique(np.concatenate(chunks), axis=0)


def slab_tube_2d(u0, du, t0: float, t1: float, radius: float) -> np.ndarray:
    """Integer points within ``radius`` of the segment u0 + t du, t0 <= t <= t1 (d=2).

    Vectorized sweep over the lines u_k = n of the dominant axis k; each line
    contributes the integers within radius |du| / |du_k| of the crossing point.
    """
    u0 = np.asarray(u0, dtype=float)
    du = np.asarray(du, dtype=float)
    k = 0 if abs(du[0]) >= abs(du[1]) else 1
    o = 1 - k
    w = radius * np.hypot(du[0], du[1]) / abs(du[k])
    a, b = u0[k] + t0 * du[k], u0[k] + t1 * du[k]
    lo, hi = min(a, b) - radius, max(a, b) + radius
    n = np.arange(math.ceil(lo), math.floor(hi) + 1)
    po = u0[o] + (n - u0[k]) / du[k] * du[o]
    jlo = np.ceil(po - w).astype(np.int64)
    width = int(math.floor(2 * w)) + 1
    j = jlo[:, None] + np.arange(width)[None, :]
    keep = j <= np.floor(po + w)[:, None]
    out = np.empty((int(keep.sum()), 2), dtype=np.int64)
    out[:, k] = np.broadcast_to(n[:, None], j.shape)[keep]
    out[:, o] = j[keep]
    return out
