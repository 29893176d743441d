"""Directions of lattice points: sorted samples, gaps, disc counts, equidistribution."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .lattice import (AffineLatticeSpec, Rational, ShellSpec, enumerate_shell, kappa,
                      primitive_key, unit_ball_volume, visible_mask)
from .parallel import DEFAULT_CHUNK, concat_chunks
from .stats import Estimate, binomial_estimate, weighted_fraction


@dataclass(frozen=True, eq=False)
class DirectionSample:
    """Sorted values in (-1/2, 1/2]; ``keys`` are primitive integer directions
    (rational shifts only) aligned with ``values``."""

    values: np.ndarray
    keys: np.ndarray | None = None

    @property
    def N(self) -> int:
        return len(self.values)

    @property
    def wrap(self) -> float:
        """xi_{N,0} = xi_{N,N} - 1."""
        return float(self.values[-1]) - 1.0

    def distinct(self) -> "DirectionSample":
        """Drop repeated directions (same primitive key)."""
        if self.keys is None:
            raise ValueError("repetitions are only defined for rational shifts")
        _, first = np.unique(self.keys, axis=0, return_index=True)
        first = np.sort(first)
        return DirectionSample(self.values[first], self.keys[first])


def to_half_open_turns(angle: np.ndarray) -> np.ndarray:
    """Radians to turns, reduced into (-1/2, 1/2]."""
    x = angle / (2 * math.pi)
    x = x - np.round(x)
    return np.where(x <= -0.5, x + 1.0, x)


def directions_2d(lat: AffineLatticeSpec, shell: ShellSpec, visible_only: bool = False,
                  half_plane: bool = False) -> DirectionSample:
    """Sorted arg(y) / 2pi over the shell.

    ``half_plane`` keeps y_2 >= 0 and uses arg(y) / pi mod 1 instead, i.e.
    directions modulo the antipodal map.
    """
    if lat.dim != 2:
        raise ValueError("directions_2d needs d=2")
    rational = isinstance(lat.alpha, Rational)
    if visible_only and not rational:
        raise ValueError("visibility is defined for rational shifts only")
    pts, m = enumerate_shell(lat, shell, return_coeffs=True)
    if len(pts) == 0:
        return DirectionSample(np.empty(0), np.empty((0, 2), dtype=np.int64) if rational else None)
    if half_plane:
        keep = pts[:, 1] >= 0
        pts, m = pts[keep], m[keep]
    scale = 2.0 if half_plane else 1.0
    keys = None
    if rational:
        if visible_only:
            keep = visible_mask(m, lat.alpha)
            pts, m = pts[keep], m[keep]
        keys = primitive_key(m, lat.alpha)
        # collinear points get bit-identical angles
        kv = keys @ lat.basis.rows
        vals = to_half_open_turns(scale * np.arctan2(kv[:, 1], kv[:, 0]))
    else:
        vals = to_half_open_turns(scale * np.arctan2(pts[:, 1], pts[:, 0]))
    order = np.lexsort((pts[:, 1], pts[:, 0], vals))
    return DirectionSample(vals[order], None if keys is None else keys[order])


def sqrt_mod_one(N_max: int) -> DirectionSample:
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    n = np.arange(1, N_max + 1)
    root = np.sqrt(n.astype(float))
    whole = np.floor(root)
    frac = root - whole
    frac[whole.astype(np.int64) ** 2 == n] = 0.0
    vals = np.where(frac > 0.5, frac - 1.0, frac)
    return DirectionSample(np.sort(vals, kind="stable"))


def normalized_gaps(sample: DirectionSample) -> np.ndarray:
    v = sample.values
    if sample.N == 0:
        raise ValueError("empty sample")
    prev = np.concatenate([[sample.wrap], v[:-1]])
    return sample.N * (v - prev)


def gap_distribution(sample: DirectionSample, s_grid) -> tuple[np.ndarray, np.ndarray]:
    """(P_hat(s), stderr) with P_hat(s) = fraction of normalized gaps >= s."""
    g = np.sort(normalized_gaps(sample))
    s = np.asarray(s_grid, dtype=float)
    p = 1.0 - np.searchsorted(g, s, side="left") / len(g)
    return p, np.sqrt(p * (1 - p) / len(g))


# ---------------------------------------------------------------------------
# disc counts


def disc_volume(sigma: float, c: float, T: float, d: int) -> float:
    return sigma * d / ((1 - c**d) * T**d)


def sphere_area(d: int) -> float:
    """Surface measure of S^{d-1}."""
    return d * unit_ball_volume(d)


class DiscCounter:
    """Counts shell points with direction in an open disc D_T(sigma, v).

    The shell is enumerated once; queries are O(log N) in d=2 and use a k-d
    tree on unit vectors in d=3.
    """

    def __init__(self, lat: AffineLatticeSpec, shell: ShellSpec, visible_only: bool = False):
        if lat.dim not in (2, 3):
            raise ValueError("disc counts are implemented for d=2 and d=3")
        self.lat, self.shell, self.d = lat, shell, lat.dim
        self.visible_only = visible_only
        if self.d == 2:
            self.sample = directions_2d(lat, shell, visible_only)
            self.size = self.sample.N
        else:
            pts, m = enumerate_shell(lat, shell, return_coeffs=True)
            if visible_only:
                pts = pts[visible_mask(m, lat.alpha)]
            self.units = pts / np.linalg.norm(pts, axis=1)[:, None]
            self.tree = cKDTree(self.units)
            self.size = len(pts)

    def radius(self, sigma: float) -> float:
        """Angular radius of D_T(sigma, .)."""
        vol = disc_volume(sigma, self.shell.c, self.shell.T, self.d)
        if vol > sphere_area(self.d):
            raise ValueError(f"disc volume {vol:.4g} exceeds the sphere; increase T")
        if self.d == 2:
            return vol / 2
        # spherical cap area 2 pi (1 - cos theta)
        return math.acos(1 - vol / (2 * math.pi))

    def counts(self, sigma: float, vs: np.ndarray) -> np.ndarray:
        vs = np.atleast_2d(np.asarray(vs, dtype=float))
        theta = self.radius(sigma)
        if theta == 0 or self.size == 0:
            return np.zeros(len(vs), dtype=np.int64)
        if self.d == 2:
            centers = to_half_open_turns(np.arctan2(vs[:, 1], vs[:, 0]))
            h = theta / (2 * math.pi)
            out = np.zeros(len(vs), dtype=np.int64)
            for k in (-1.0, 0.0, 1.0):
                out += _kernels.sorted_window_counts(self.sample.values, centers - h + k, centers + h + k)
            return out
        chord = 2 * math.sin(theta / 2)
        cos_t = math.cos(theta)
        out = np.empty(len(vs), dtype=np.int64)
        for i, v in enumerate(vs):
            idx = self.tree.query_ball_point(v, chord * (1 + 1e-12))
            out[i] = np.count_nonzero(self.units[idx] @ v > cos_t) if idx else 0
        return out


def disc_count(lat: AffineLatticeSpec, shell: ShellSpec, sigma: float, v) -> int:
    return int(DiscCounter(lat, shell).counts(sigma, np.asarray(v, dtype=float))[0])


def random_directions(rng: np.random.Generator, n: int, d: int = 2) -> np.ndarray:
    if d == 2:
        phi = rng.uniform(0.0, 2 * math.pi, n)
        return np.column_stack([np.cos(phi), np.sin(phi)])
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1)[:, None]


def count_sample(counter: DiscCounter, sigma: float, n_dirs: int, seed: int,
                 chunk: int = DEFAULT_CHUNK, workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(directions, counts) for n_dirs uniform directions."""
    d = counter.d
    dirs = concat_chunks(lambda rng, s: random_directions(rng, s, d), n_dirs, seed, chunk, workers)
    dirs = dirs.reshape(-1, d)
    return dirs, counter.counts(sigma, dirs)


def empirical_E(lat: AffineLatticeSpec, r: int, sigma: float, c: float, T: float, n_dirs: int,
                seed: int, visible_only: bool = False, weight: Callable | None = None,
                counter: DiscCounter | None = None, workers: int | None = None) -> Estimate:
    """Fraction of directions v with exactly r shell points in D_T(sigma, v).

    With ``visible_only`` the disc is D_T(sigma / kappa_q, v) over visible
    points.  ``weight`` is an optional density of the direction measure with
    respect to the uniform one, applied by importance sampling.
    """
    return empirical_E_curve(lat, [r], sigma, c, T, n_dirs, seed, visible_only, weight,
                             counter, workers)[0]


def empirical_E_curve(lat, rs, sigma, c, T, n_dirs, seed, visible_only=False, weight=None,
                      counter=None, workers=None) -> list[Estimate]:
    shell = ShellSpec(c, T)
    if counter is None:
        counter = DiscCounter(lat, shell, visible_only)
    eff_sigma = sigma
    if visible_only:
        eff_sigma = sigma / kappa(lat.alpha.q, lat.dim)
    dirs, counts = count_sample(counter, eff_sigma, n_dirs, seed, workers=workers)
    out = []
    for r in rs:
        hit = counts == int(r)
        if weight is None:
            out.append(binomial_estimate(np.count_nonzero(hit), len(hit)))
        else:
            out.append(weighted_fraction(hit, np.apply_along_axis(weight, 1, dirs)))
    return out


def sector_equidistribution(lat: AffineLatticeSpec | None, shell: ShellSpec | None, n_sectors: int,
                            sample: DirectionSample | None = None) -> float:
    """max_k |count_k / total - 1/n| * n over n equal sectors of (-1/2, 1/2]."""
    if n_sectors < 2:
        raise ValueError("need at least 2 sectors")
    if sample is None:
        sample = directions_2d(lat, shell)
    if sample.N == 0:
        raise ValueError("empty sample")
    idx = np.ceil((sample.values + 0.5) * n_sectors).astype(np.int64) - 1
    idx = np.clip(idx, 0, n_sectors - 1)
    frac = np.bincount(idx, minlength=n_sectors) / sample.N
    return float(np.max(np.abs(frac - 1.0 / n_sectors)) * n_sectors)
