"""Exact geometry of the periodic Lorentz gas with spherical scatterers at L_alpha."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from . import _kernels
from .directions import random_directions
from .lattice import (AffineLatticeSpec, ConvexPolygon, ShellSpec,
                      UnimodularBasis, _prepared_2d, unit_ball_volume)
from .parallel import DEFAULT_CHUNK, concat_chunks
from .traversal import slab_tube_2d, traverse_cells

RHO_GUARD = 0.45
UNIT_TOL = 1e-12


class StartInsideScatterer(ValueError):
    pass


class RadiusTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RayQuery:
    start: np.ndarray
    v: np.ndarray
    rho: float
    t_max: float

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if start.shape != v.shape or v.ndim != 1:
            raise ValueError("start and v must be vectors of equal length")
        if abs(np.linalg.norm(v) - 1) > UNIT_TOL:
            raise ValueError(f"direction must be a unit vector, |v| = {np.linalg.norm(v)!r}")
        if not self.rho > 0 or not self.t_max > 0:
            raise ValueError("rho and t_max must be positive")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True, eq=False)
class CollisionRecord:
    tau1: float
    center: np.ndarray
    w1: np.ndarray
    v1: np.ndarray
    coeffs: np.ndarray | None = None


@dataclass(frozen=True)
class HorizonExceeded:
    """No scatterer met within t_max."""

    t_max: float


# ---------------------------------------------------------------------------
# pointwise geometry


def reflect(v0, w1) -> np.ndarray:
    v0 = np.asarray(v0, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    return v0 - 2 * np.dot(v0, w1) * w1


def rodrigues_E(w) -> np.ndarray:
    """exp([[0, w], [-w^T, 0]]) via the closed form for a rank-two generator."""
    w = np.asarray(w, dtype=float)
    d = len(w) + 1
    A = np.zeros((d, d))
    A[0, 1:] = w
    A[1:, 0] = -w
    th = np.linalg.norm(w)
    if th == 0:
        return np.eye(d)
    return np.eye(d) + math.sin(th) / th * A + (1 - math.cos(th)) / th**2 * (A @ A)


def K_of_v(v) -> np.ndarray:
    """Rotation K(v) in SO(d) with v K(v) = e_1 (row-vector convention).

    K(e_1) = I.  At the singular point -e_1 the result is -I for even d and
    diag(-1, -1, 1, ..., 1) for odd d, where -I is not a rotation.
    """
    v = np.asarray(v, dtype=float)
    d = len(v)
    if d == 2:
        c, s = v[0], v[1]
        return np.array([[c, -s], [s, c]])
    vp = v[1:]
    nvp = np.linalg.norm(vp)
    if nvp == 0:
        if v[0] > 0:
            return np.eye(d)
        return -np.eye(d) if d % 2 == 0 else np.diag([-1.0, -1.0] + [1.0] * (d - 2))
    e1 = np.zeros(d)
    e1[0] = 1.0
    theta = 2 * math.asin(min(1.0, np.linalg.norm(v - e1) / 2))
    return rodrigues_E(-theta / nvp * vp)


def is_singular_direction(v) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(np.all(v[1:] == 0) and v[0] < 0)


# ---------------------------------------------------------------------------
# lattice helpers


@lru_cache(maxsize=256)
def _min_distance(basis: UnimodularBasis) -> float:
    from .lattice import shortest_vector_length
    return shortest_vector_length(basis)


def check_radius(lat: AffineLatticeSpec, rho: float):
    bound = RHO_GUARD * _min_distance(lat.basis)
    if rho > bound:
        raise RadiusTooLarge(f"rho={rho} exceeds {RHO_GUARD} * (minimum distance) = {bound:.6g}")


def _coefficient_ray(lat: AffineLatticeSpec, start, v):
    Minv = lat.basis.inverse
    return start @ Minv - lat.shift, v @ Minv, float(np.linalg.norm(Minv, 2))


def _entries(centers, start, v, rho):
    """Entry times of the ray into the open balls (inf where there is none)."""
    dx = centers - start
    b = dx @ v
    perp = dx - b[:, None] * v
    h2 = np.einsum("ij,ij->i", perp, perp)
    disc = rho * rho - h2
    dd = np.einsum("ij,ij->i", dx, dx)
    ok = (b > 0) & (disc > _kernels.TANGENT_TOL * rho * rho)
    out = np.full(len(centers), np.inf)
    out[ok] = (dd[ok] - rho * rho) / (b[ok] + np.sqrt(disc[ok]))
    return out, dd


def _free_path_generic(lat: AffineLatticeSpec, q: RayQuery):
    u0, du, scale = _coefficient_ray(lat, q.start, q.v)
    radius = q.rho * scale
    best, best_m = math.inf, None
    for t_cell, cand in traverse_cells(u0, du, q.t_max + q.rho, radius):
        if t_cell > best:
            break
        centers = (cand + lat.shift) @ lat.basis.rows
        te, dd = _entries(centers, q.start, q.v, q.rho)
        if np.any(dd < q.rho**2):
            raise StartInsideScatterer("start point lies inside a scatterer")
        i = int(np.argmin(te))
        if te[i] < best:
            best, best_m = float(te[i]), cand[i]
    if best_m is None or best > q.t_max:
        return None
    return best, best_m


def _free_path_2d(lat: AffineLatticeSpec, q: RayQuery):
    red, redinv, s_red, U = _prepared_2d(lat)
    rprime = q.rho * float(np.linalg.norm(redinv, 2))
    t, m1, m2, status = _kernels.first_hit_2d(red, redinv, s_red, q.start, q.v, q.rho, rprime, q.t_max)
    if status == _kernels.STATUS_INSIDE:
        raise StartInsideScatterer("start point lies inside a scatterer")
    if status == _kernels.STATUS_HORIZON:
        return None
    m = np.array([m1, m2]) @ U
    return t, m


def free_path(lat: AffineLatticeSpec, q: RayQuery, method: str = "auto") -> CollisionRecord | HorizonExceeded:
    """First entry of start + t v (0 < t <= t_max) into a ball B_rho + y, y in L_alpha.

    ``method`` is "kernel" (d=2 compiled sweep), "cells" (generic cell march) or
    "auto".
    """
    if len(q.start) != lat.dim:
        raise ValueError("dimension mismatch between query and lattice")
    check_radius(lat, q.rho)
    if method == "auto":
        method = "kernel" if lat.dim == 2 else "cells"
    if method == "kernel":
        if lat.dim != 2:
            raise ValueError("the compiled sweep is d=2 only")
        hit = _free_path_2d(lat, q)
    elif method == "cells":
        hit = _free_path_generic(lat, q)
    else:
        raise ValueError(f"unknown method {method!r}")
    if hit is None:
        return HorizonExceeded(q.t_max)
    t, m = hit
    center = (m + lat.shift) @ lat.basis.rows
    w1 = q.start + t * q.v - center
    w1 = w1 / np.linalg.norm(w1)
    return CollisionRecord(t, center, w1, reflect(q.v, w1), np.asarray(m))


# ---------------------------------------------------------------------------
# ray counts


def ray_hit_count(lat: AffineLatticeSpec, shell: ShellSpec, rho: float, v, w_offset=None) -> int:
    """Shell centers y != 0 whose open ball B_rho + y meets rho w + R_{>0} v."""
    v = np.asarray(v, dtype=float)
    if rho == 0:
        return 0
    start = np.zeros(lat.dim) if w_offset is None else rho * np.asarray(w_offset, dtype=float)
    if lat.dim == 2:
        return int(ray_hit_counts_2d(lat, shell, rho, v[None, :], start[None, :])[0])
    check_radius(lat, rho)
    u0, du, scale = _coefficient_ray(lat, start, v)
    t_end = shell.T + np.linalg.norm(start) + rho
    cand = np.unique(np.concatenate([c for _, c in traverse_cells(u0, du, t_end, rho * scale)]), axis=0)
    centers = (cand + lat.shift) @ lat.basis.rows
    r2 = np.einsum("ij,ij->i", centers, centers)
    nonzero = r2 > 0
    te, dd = _entries(centers, start, v, rho)
    if np.any((dd < rho**2) & nonzero):
        raise StartInsideScatterer("ray start lies inside a scatterer")
    keep = nonzero & (r2 >= shell.r_in**2) & (r2 < shell.T**2) & np.isfinite(te)
    return int(np.count_nonzero(keep))


def ray_hit_counts_2d(lat: AffineLatticeSpec, shell: ShellSpec, rho: float, vs, starts) -> np.ndarray:
    check_radius(lat, rho)
    red, redinv, s_red, _ = _prepared_2d(lat)
    rprime = rho * float(np.linalg.norm(redinv, 2))
    vs = np.ascontiguousarray(vs, dtype=float)
    starts = np.ascontiguousarray(np.broadcast_to(starts, vs.shape), dtype=float)
    out = _kernels.hit_count_batch_2d(red, redinv, s_red, starts, vs, rho, rprime, shell.r_in, shell.T)
    if np.any(out < 0):
        raise StartInsideScatterer("ray start lies inside a scatterer")
    return out


def ray_count_sample(lat: AffineLatticeSpec, shell: ShellSpec, rho: float, n_dirs: int, seed: int,
                     w_offset=None, chunk: int = DEFAULT_CHUNK, workers: int | None = None) -> np.ndarray:
    """ray_hit_count for n_dirs uniform directions (d=2), chunked and seeded."""
    start = np.zeros(2) if w_offset is None else rho * np.asarray(w_offset, dtype=float)

    def job(rng, size):
        return ray_hit_counts_2d(lat, shell, rho, random_directions(rng, size, 2), start)

    return concat_chunks(job, n_dirs, seed, chunk, workers).astype(np.int64)


def expected_ray_count(rho: float, c: float, T: float, d: int) -> float:
    return unit_ball_volume(d - 1) * (1 - c) * rho ** (d - 1) * T


# ---------------------------------------------------------------------------
# non-spherical scatterers (d=2)


def _ray_meets_polygon(verts_shifted: np.ndarray, v: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """verts_shifted: (K, E, 2) polygon copies; ray R_{>0} v; open interiors."""
    # inside edge i iff n_i . (t v - a_i) > 0, i.e. t (n_i . v) > n_i . a_i
    nv = normals @ v
    na = np.einsum("ej,kej->ke", normals, verts_shifted)
    lo = np.zeros(na.shape[0])
    hi = np.full(na.shape[0], np.inf)
    pos, neg = nv > 0, nv < 0
    if np.any(pos):
        lo = np.maximum(lo, np.max(na[:, pos] / nv[pos], axis=1))
    if np.any(neg):
        hi = np.minimum(hi, np.min(na[:, neg] / nv[neg], axis=1))
    zero = ~(pos | neg)
    ok = lo < hi
    if np.any(zero):
        ok &= np.all(na[:, zero] < 0, axis=1)
    return ok


def convex_scatterer_hit_count(lat: AffineLatticeSpec, shell: ShellSpec, Q: ConvexPolygon, T: float, v) -> int:
    """Shell centers y != 0 with R_{>0} v meeting Q_T + y, Q_T = Q / T (d=2)."""
    if lat.dim != 2:
        raise ValueError("polygonal scatterers are d=2 only")
    v = np.asarray(v, dtype=float)
    verts = Q.array / T
    reach = float(np.max(np.linalg.norm(verts, axis=1)))
    if reach == 0:
        return 0
    Minv = lat.basis.inverse
    u0 = -lat.shift
    du = v @ Minv
    cand = slab_tube_2d(u0, du, 0.0, shell.T + reach, reach * float(np.linalg.norm(Minv, 2)))
    centers = (cand + lat.shift) @ lat.basis.rows
    r2 = np.einsum("ij,ij->i", centers, centers)
    keep = (r2 > 0) & (r2 >= shell.r_in**2) & (r2 < shell.T**2)
    centers = centers[keep]
    if len(centers) == 0:
        return 0
    edges = np.roll(verts, -1, axis=0) - verts
    normals = np.column_stack([-edges[:, 1], edges[:, 0]])  # inward for counter-clockwise
    shifted = centers[:, None, :] + verts[None, :, :]
    return int(np.count_nonzero(_ray_meets_polygon(shifted, v, normals)))


# ---------------------------------------------------------------------------
# free path statistics


class TabulatedBeta:
    """beta(v) for d=2, tabulated on angles with periodic linear interpolation."""

    def __init__(self, angles, values):
        self.angles = np.asarray(angles, dtype=float) % (2 * math.pi)
        order = np.argsort(self.angles)
        self.angles = self.angles[order]
        self.values = np.asarray(values, dtype=float)[order]

    def __call__(self, vs):
        vs = np.atleast_2d(vs)
        phi = np.arctan2(vs[:, 1], vs[:, 0]) % (2 * math.pi)
        return np.column_stack([np.interp(phi, self.angles, self.values[:, j], period=2 * math.pi)
                                for j in range(self.values.shape[1])])


BetaLike = Union[None, np.ndarray, Callable, TabulatedBeta]


def eval_beta(beta: BetaLike, vs: np.ndarray) -> np.ndarray:
    if beta is None:
        return np.zeros_like(vs)
    if callable(beta):
        out = np.asarray(beta(vs), dtype=float)
        return np.broadcast_to(out, vs.shape).copy()
    return np.broadcast_to(np.asarray(beta, dtype=float), vs.shape).copy()


def point_in_lattice(lat: AffineLatticeSpec, q0, tol: float = 1e-9) -> bool:
    u = np.asarray(q0, dtype=float) @ lat.basis.inverse - lat.shift
    return bool(np.all(np.abs(u - np.rint(u)) < tol))


def check_beta(lat: AffineLatticeSpec, q0, beta: BetaLike, n_grid: int = 3600):
    """If q0 is a scatterer center, beta(v) + R_{>0} v must avoid the unit ball."""
    if not point_in_lattice(lat, q0):
        return
    if lat.dim != 2:
        raise NotImplementedError("the beta grid check is implemented for d=2")
    phi = np.arange(n_grid) * 2 * math.pi / n_grid
    vs = np.column_stack([np.cos(phi), np.sin(phi)])
    b = eval_beta(beta, vs)
    t = np.maximum(-np.einsum("ij,ij->i", b, vs), 0.0)
    closest = np.linalg.norm(b + t[:, None] * vs, axis=1)
    bad = closest < 1 - 1e-12
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValueError(f"beta(v) + R_{{>0}} v meets the unit ball at v = {vs[i].tolist()}")


@dataclass(frozen=True, eq=False)
class FreePathSample:
    directions: np.ndarray
    xi: np.ndarray            # rho^{d-1} tau_1, inf if censored
    w1: np.ndarray            # nan rows if censored
    rho: float
    t_max: float

    @property
    def n(self) -> int:
        return len(self.xi)

    @property
    def censored(self) -> np.ndarray:
        return ~np.isfinite(self.xi)

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.censored))

    def survival(self, xi_grid) -> tuple[np.ndarray, np.ndarray]:
        """Fraction with rho^{d-1} tau_1 >= xi; censored runs count as >= every grid value."""
        x = np.sort(self.xi)
        g = np.asarray(xi_grid, dtype=float)
        p = 1.0 - np.searchsorted(x, g, side="left") / self.n
        return p, np.sqrt(p * (1 - p) / self.n)

    def finite_survival(self, xi_grid) -> np.ndarray:
        x = np.sort(self.xi[np.isfinite(self.xi)])
        if len(x) == 0:
            return np.zeros(len(np.atleast_1d(xi_grid)))
        return 1.0 - np.searchsorted(x, np.asarray(xi_grid, dtype=float), side="left") / len(x)


def sample_free_paths(lat: AffineLatticeSpec, q0, beta: BetaLike, rho: float, n_dirs: int, seed: int,
                      t_max: float, chunk: int = DEFAULT_CHUNK, workers: int | None = None,
                      check: bool = True) -> FreePathSample:
    """Free paths from q0 + rho beta(v) for n_dirs uniform directions (d=2)."""
    if lat.dim != 2:
        raise ValueError("sampled free paths are d=2 only")
    check_radius(lat, rho)
    q0 = np.asarray(q0, dtype=float)
    if check:
        check_beta(lat, q0, beta)
    red, redinv, s_red, _ = _prepared_2d(lat)
    rprime = rho * float(np.linalg.norm(redinv, 2))

    def job(rng, size):
        vs = random_directions(rng, size, 2)
        starts = q0 + rho * eval_beta(beta, vs)
        ts, ms, st = _kernels.first_hit_batch_2d(red, redinv, s_red, starts, vs, rho, rprime, t_max)
        if np.any(st == _kernels.STATUS_INSIDE):
            raise StartInsideScatterer("a start point lies inside a scatterer")
        centers = (ms + s_red) @ red
        w = starts + ts[:, None] * vs - centers
        with np.errstate(invalid="ignore"):
            w /= np.linalg.norm(w, axis=1)[:, None]
        hor = st == _kernels.STATUS_HORIZON
        w[hor] = np.nan
        return np.column_stack([vs, ts, w])

    rows = concat_chunks(job, n_dirs, seed, chunk, workers).reshape(-1, 5)
    return FreePathSample(rows[:, :2], rho * rows[:, 2], rows[:, 3:], rho, t_max)


def empirical_free_path_cdf(lat: AffineLatticeSpec, q0, beta: BetaLike, rho: float, xi_grid, n_dirs: int,
                            seed: int, workers: int | None = None):
    """(survival, stderr, sample) of rho^{d-1} tau_1 on ``xi_grid``."""
    xi_grid = np.asarray(xi_grid, dtype=float)
    t_max = float(np.max(xi_grid)) * rho ** (1 - lat.dim) * 1.05
    sample = sample_free_paths(lat, q0, beta, rho, n_dirs, seed, t_max, workers=workers)
    p, se = sample.survival(xi_grid)
    return p, se, sample


def joint_tau_w1_sample(lat: AffineLatticeSpec, q0, beta: BetaLike, rho: float, n_dirs: int, seed: int,
                        t_max: float | None = None, workers: int | None = None):
    """Records (v, rho^{d-1} tau_1, -w_1 K(v)) and the number of dropped (censored) directions."""
    if t_max is None:
        t_max = 20.0 * rho ** (1 - lat.dim)
    s = sample_free_paths(lat, q0, beta, rho, n_dirs, seed, t_max, workers=workers)
    ok = ~s.censored
    v, w = s.directions[ok], s.w1[ok]
    # K(v) = [[c, -s], [s, c]] for v = (c, s)
    rot = np.column_stack([w[:, 0] * v[:, 0] + w[:, 1] * v[:, 1], -w[:, 0] * v[:, 1] + w[:, 1] * v[:, 0]])
    return v, s.xi[ok], -rot, int(np.count_nonzero(~ok))


def sample_free_paths_averaged(lat: AffineLatticeSpec, rho: float, n: int, seed: int, t_max: float,
                               direction=None, chunk: int = DEFAULT_CHUNK,
                               workers: int | None = None) -> FreePathSample:
    """Free paths with start uniform in a fundamental cell outside the scatterers (d=2).

    Directions are uniform unless ``direction`` fixes one.
    """
    check_radius(lat, rho)
    red, redinv, s_red, _ = _prepared_2d(lat)
    rprime = rho * float(np.linalg.norm(redinv, 2))
    fixed = None if direction is None else np.asarray(direction, dtype=float)

    def job(rng, size):
        rows = np.empty((0, 5))
        while len(rows) < size:
            m = size - len(rows)
            vs = random_directions(rng, m, 2) if fixed is None else np.tile(fixed, (m, 1))
            starts = rng.random((m, 2)) @ lat.basis.rows
            ts, ms, st = _kernels.first_hit_batch_2d(red, redinv, s_red, starts, vs, rho, rprime, t_max)
            ok = st != _kernels.STATUS_INSIDE
            centers = (ms + s_red) @ red
            w = starts + ts[:, None] * vs - centers
            with np.errstate(invalid="ignore"):
                w /= np.linalg.norm(w, axis=1)[:, None]
            w[st == _kernels.STATUS_HORIZON] = np.nan
            rows = np.concatenate([rows, np.column_stack([vs, ts, w])[ok]])
        return rows

    rows = concat_chunks(job, n, seed, chunk, workers).reshape(-1, 5)
    return FreePathSample(rows[:, :2], rho * rows[:, 2], rows[:, 3:], rho, t_max)


def sample_free_paths_fixed(lat: AffineLatticeSpec, q0, beta: BetaLike, rho: float, direction, n: int,
                            t_max: float) -> FreePathSample:
    """n identical queries along one direction (used by channel checks)."""
    v = np.asarray(direction, dtype=float)
    v = v / np.linalg.norm(v)
    q = RayQuery(np.asarray(q0, dtype=float) + rho * eval_beta(beta, v[None, :])[0], v, rho, t_max)
    rec = free_path(lat, q)
    xi = math.inf if isinstance(rec, HorizonExceeded) else rho ** (lat.dim - 1) * rec.tau1
    w = np.full(lat.dim, np.nan) if isinstance(rec, HorizonExceeded) else rec.w1
    return FreePathSample(np.tile(v, (n, 1)), np.full(n, xi), np.tile(w, (n, 1)), rho, t_max)
