"""Monte Carlo over random lattices: cylinder/cone counts, F, E, Phi and p.

Every estimator draws one batch of lattices per chunk and evaluates all grid
points (sigma, xi, w, ...) on that same batch, so curves share random numbers.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _kernels
from .haar import sample_X1_batch, xq_shifts
from .lattice import Irrational, Rational, cone_aperture, unit_ball_volume
from .lorentz import K_of_v
from .parallel import DEFAULT_CHUNK, map_chunks
from .stats import Estimate, binomial_estimate, mean_estimate

AlphaKind = Rational | Irrational | None


def _is_integral(alpha: AlphaKind) -> bool:
    return alpha is None or (isinstance(alpha, Rational) and alpha.is_integral)


def draw_affine_lattices(rng: np.random.Generator, size: int, alpha: AlphaKind = None):
    """Bases (size, 2, 2) and coefficient shifts (size, 2).

    alpha None or integral: X_1;  Rational p/q: X_q via a uniform gamma in
    SL(2, Z/q);  Irrational: X via a uniform shift of the fundamental cell.
    """
    bases = sample_X1_batch(rng, size)
    if _is_integral(alpha):
        shifts = np.zeros((size, 2))
    elif isinstance(alpha, Rational):
        shifts = xq_shifts(rng, alpha, size)
    elif isinstance(alpha, Irrational):
        shifts = rng.random((size, 2))
    else:
        raise TypeError(f"unsupported alpha {alpha!r}")
    return bases, shifts


def points_in_box_batch(bases, shifts, box, exclude_origin: bool, translations=None):
    """(offsets, xy) of every sample's points inside the closed box [x0,x1]x[y0,y1]."""
    n = len(bases)
    ts = np.zeros((n, 2)) if translations is None else np.ascontiguousarray(
        np.broadcast_to(translations, (n, 2)), dtype=float)
    offsets, xy, _ = _kernels.batch_box_points_2d(
        np.ascontiguousarray(bases), np.ascontiguousarray(np.linalg.inv(bases)),
        np.ascontiguousarray(shifts, dtype=float), ts, np.asarray(box, dtype=float), exclude_origin)
    return offsets, xy


def sample_points(rng, size, box, alpha: AlphaKind = None, y=None):
    """Draw ``size`` random (affine) lattices and return their points in ``box``.

    With ``y`` the configuration is the fiber sample Z^2 M + y (origin kept).
    """
    if y is not None:
        bases = sample_X1_batch(rng, size)
        return points_in_box_batch(bases, np.zeros((size, 2)), box, False, np.asarray(y, dtype=float))
    bases, shifts = draw_affine_lattices(rng, size, alpha)
    return points_in_box_batch(bases, shifts, box, _is_integral(alpha))


def _owner(offsets):
    return np.repeat(np.arange(len(offsets) - 1), np.diff(offsets))


# ---------------------------------------------------------------------------
# cylinder and cone counts


def cylinder_counts(sigmas: Sequence[float], c: float = 0.0, alpha: AlphaKind = None, n: int = 10_000,
                    seed: int = 0, z: float = 0.0, c2: float = 1.0, chunk: int = DEFAULT_CHUNK,
                    workers: int | None = None) -> np.ndarray:
    """counts[i, k] = #(points of sample i in {c < x_1 < c2, |x_2 - z| < sigma_k})."""
    sigmas = np.asarray(sigmas, dtype=float)
    smax = float(sigmas.max()) if len(sigmas) else 0.0
    box = [c, c2, z - smax, z + smax]

    def job(rng, size):
        off, xy = sample_points(rng, size, box, alpha)
        inside = (xy[:, 0] > c) & (xy[:, 0] < c2)
        lat = np.abs(xy[:, 1] - z)
        own = _owner(off)
        out = np.zeros((size, len(sigmas)), dtype=np.int64)
        for k, s in enumerate(sigmas):
            out[:, k] = np.bincount(own[inside & (lat < s)], minlength=size)
        return out

    return np.concatenate(map_chunks(job, n, seed, chunk, workers), axis=0)


def cone_counts(sigmas: Sequence[float], c: float = 0.0, alpha: AlphaKind = None, n: int = 10_000,
                seed: int = 0, chunk: int = DEFAULT_CHUNK, workers: int | None = None) -> np.ndarray:
    """counts[i, k] = #(points of sample i in the cone C(c, sigma_k)), d=2."""
    sigmas = np.asarray(sigmas, dtype=float)
    apertures = np.array([cone_aperture(c, s, 2) for s in sigmas])
    amax = float(apertures.max()) if len(apertures) else 0.0
    box = [c, 1.0, -amax, amax]

    def job(rng, size):
        off, xy = sample_points(rng, size, box, alpha)
        inside = (xy[:, 0] > c) & (xy[:, 0] < 1.0)
        own = _owner(off)
        out = np.zeros((size, len(sigmas)), dtype=np.int64)
        for k, a in enumerate(apertures):
            out[:, k] = np.bincount(own[inside & (np.abs(xy[:, 1]) <= xy[:, 0] * a)], minlength=size)
        return out

    return np.concatenate(map_chunks(job, n, seed, chunk, workers), axis=0)


def count_distribution(counts: np.ndarray, rs: Sequence[int]) -> list[Estimate]:
    return [binomial_estimate(np.count_nonzero(counts == int(r)), len(counts)) for r in rs]


def mc_F(r: int, sigma: float, c: float = 0.0, alpha: AlphaKind = None, beta_perp: float = 0.0,
         n: int = 10_000, seed: int = 0, workers: int | None = None) -> Estimate:
    """P(exactly r points in Z(c, sigma) + sigma * beta_perp e_2)."""
    counts = cylinder_counts([sigma], c, alpha, n, seed, z=sigma * beta_perp, workers=workers)[:, 0]
    return count_distribution(counts, [r])[0]


def mc_F_table(sigmas, rs, c: float = 0.0, alpha: AlphaKind = None, n: int = 10_000, seed: int = 0,
               workers: int | None = None) -> list[tuple[float, int, Estimate]]:
    """(sigma, r, F_hat) over a grid, all from one common sample."""
    counts = cylinder_counts(sigmas, c, alpha, n, seed, workers=workers)
    return [(float(s), int(r), e) for k, s in enumerate(sigmas)
            for r, e in zip(rs, count_distribution(counts[:, k], rs))]


def mc_E(r: int, sigma: float, c: float = 0.0, alpha: AlphaKind = None, n: int = 10_000, seed: int = 0,
         workers: int | None = None) -> Estimate:
    """P(exactly r points in the cone C(c, sigma))."""
    counts = cone_counts([sigma], c, alpha, n, seed, workers=workers)[:, 0]
    return count_distribution(counts, [r])[0]


def bound_value(sigma: float, c: float, d: int = 2) -> float:
    """v_d (1 - c) sigma^{d-1} with v_d = vol(B_1^{d-1})."""
    return unit_ball_volume(d - 1) * (1 - c) * sigma ** (d - 1)


# ---------------------------------------------------------------------------
# Phi


def strip_gaps(n: int, seed: int, span: float, alpha: AlphaKind = None, c: float = 0.0,
               chunk: int = DEFAULT_CHUNK, workers: int | None = None) -> np.ndarray:
    """Per sample, min |x_2| over points with c < x_1 < 1 (capped at ``span``).

    F(0, s) = P(gap >= s) for every s < span, so one sample gives the whole curve.
    """
    box = [c, 1.0, -span, span]

    def job(rng, size):
        off, xy = sample_points(rng, size, box, alpha)
        inside = (xy[:, 0] > c) & (xy[:, 0] < 1.0)
        out = np.full(size, span)
        np.minimum.at(out, _owner(off)[inside], np.abs(xy[inside, 1]))
        return out

    return np.concatenate(map_chunks(job, n, seed, chunk, workers))


@dataclass(frozen=True, eq=False)
class PhiCurve:
    xi: np.ndarray
    phi: np.ndarray
    stderr: np.ndarray
    h: float
    recommended_h: float
    F: np.ndarray          # F_hat(0, xi)


def recommend_h(F, phi, n, floor=0.02) -> float:
    se_F = np.sqrt(np.clip(F * (1 - F), 0, None) / n)
    slope = np.abs(phi)
    ok = slope > 0
    if not np.any(ok):
        return floor
    return float(max(floor, np.max(4 * se_F[ok] / slope[ok])))


def mc_Phi_density(xi_grid, n: int = 10_000, seed: int = 0, h: float | None = None, alpha: AlphaKind = None,
                   workers: int | None = None) -> PhiCurve:
    """Central differences (F(xi - h) - F(xi + h)) / 2h of F_hat(0, .), d=2.

    Both ends come from the same samples, so each difference is the binomial
    fraction P(xi - h <= gap < xi + h) / 2h.
    """
    xi = np.asarray(xi_grid, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi grid must be positive")
    user_h = h
    h = 0.02 if h is None else float(h)
    if h <= 0:
        raise ValueError("h must be positive")
    gaps = np.sort(strip_gaps(n, seed, float(xi.max()) + h + 1.0, alpha, workers=workers))
    lo = np.searchsorted(gaps, np.maximum(xi - h, 0.0), side="left")
    hi = np.searchsorted(gaps, xi + h, side="left")
    frac = (hi - lo) / n
    phi = frac / (2 * h)
    se = np.sqrt(frac * (1 - frac) / n) / (2 * h)
    F = 1.0 - np.searchsorted(gaps, xi, side="left") / n
    rec = recommend_h(F, phi, n)
    if user_h is not None and h < rec:
        warnings.warn(f"h={h} is below the Monte Carlo noise floor; recommended h={rec:.4g}", stacklevel=2)
    return PhiCurve(xi, phi, se, h, rec, F)


def mc_F0_curve(xi_grid, n: int = 10_000, seed: int = 0, alpha: AlphaKind = None,
                workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """F_hat(0, xi) with standard errors on a grid (d=2 so xi^{1/(d-1)} = xi)."""
    xi = np.asarray(xi_grid, dtype=float)
    gaps = np.sort(strip_gaps(n, seed, float(xi.max()) + 1.0, alpha, workers=workers))
    F = 1.0 - np.searchsorted(gaps, xi, side="left") / n
    return F, np.sqrt(F * (1 - F) / n)


def mc_Phi_joint(xi: float, w: float, z: float, n: int = 10_000, seed: int = 0,
                 workers: int | None = None) -> Estimate:
    """Fraction of fiber samples Z^2 M + y, y = (xi, w + z), missing Z(0, xi, 1) + z e_2."""
    y = np.array([xi, w + z])
    box = [0.0, xi, z - 1.0, z + 1.0]

    def job(rng, size):
        off, xy = sample_points(rng, size, box, y=y)
        inside = (xy[:, 0] > 0) & (xy[:, 0] < xi) & (np.abs(xy[:, 1] - z) < 1.0)
        hit = np.bincount(_owner(off)[inside], minlength=size) > 0
        return (~hit).astype(np.int64)

    empty = np.concatenate(map_chunks(job, n, seed, workers=workers))
    return binomial_estimate(int(empty.sum()), n)


def joint_first_x(w_grid, n: int, seed: int, xi_max: float, chunk: int = DEFAULT_CHUNK,
                  workers: int | None = None) -> np.ndarray:
    """first[i, k] = min x_1 > 0 over points of Z_*^2 M_i with |x_2 - w_k| < 1 (capped at xi_max).

    Phi(xi, w) = P(first >= xi): the fiber picture translated by -y and reflected.
    """
    w_grid = np.asarray(w_grid, dtype=float)
    box = [0.0, xi_max, float(w_grid.min()) - 1.0, float(w_grid.max()) + 1.0]

    def job(rng, size):
        off, xy = sample_points(rng, size, box)
        own = _owner(off)
        pos = xy[:, 0] > 0
        out = np.full((size, len(w_grid)), xi_max)
        for k, w in enumerate(w_grid):
            m = pos & (np.abs(xy[:, 1] - w) < 1.0)
            np.minimum.at(out[:, k], own[m], xy[m, 0])
        return out

    return np.concatenate(map_chunks(job, n, seed, chunk, workers), axis=0)


class PhiTable:
    """Phi(xi, w) on a grid of (xi, |w|), linearly interpolated (irrational shifts)."""

    def __init__(self, xi_grid, w_grid, values, stderr=None):
        self.xi = np.asarray(xi_grid, dtype=float)
        self.w = np.asarray(w_grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.stderr = None if stderr is None else np.asarray(stderr, dtype=float)
        self._interp = RegularGridInterpolator((self.xi, self.w), self.values, bounds_error=False,
                                               fill_value=0.0)

    @classmethod
    def estimate(cls, xi_grid, w_grid, n: int = 10_000, seed: int = 0, workers: int | None = None):
        xi = np.asarray(xi_grid, dtype=float)
        w = np.asarray(w_grid, dtype=float)
        first = joint_first_x(w, n, seed, float(xi.max()) + 1.0, workers=workers)
        vals = np.stack([(first >= x).mean(axis=0) for x in xi])
        se = np.sqrt(vals * (1 - vals) / n)
        return cls(xi, w, vals, se)

    def __call__(self, xi, w, z=None):
        wn = np.linalg.norm(np.atleast_1d(np.asarray(w, dtype=float)))
        if wn >= 1.0:
            return 0.0
        return float(self._interp([[float(xi), wn]])[0])


def phi_arguments(v0, v1, beta_v0=None):
    """(w, z) vectors fed to Phi in the transition density."""
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    K = K_of_v(v0)
    dist = np.linalg.norm(v1 - v0)
    w = -(v1 @ K)[1:] / dist
    z = np.zeros(len(v0) - 1) if beta_v0 is None else (np.asarray(beta_v0, dtype=float) @ K)[1:]
    return w, z


def transition_density(v0, xi: float, v1, phi: Callable, beta_v0=None) -> float:
    """p(v0, xi, v1) = 1/4 |v1 - v0|^{3-d} Phi(xi, w, z)."""
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    dist = np.linalg.norm(v1 - v0)
    if dist < 1e-12:
        raise ValueError("transition density is singular at v1 = v0")
    d = len(v0)
    w, z = phi_arguments(v0, v1, beta_v0)
    return 0.25 * dist ** (3 - d) * phi(xi, w, z)


# ---------------------------------------------------------------------------
# Siegel-type calibration


def box_mean_counts(rects, n: int, seed: int, alpha: AlphaKind = None, y=None,
                    chunk: int = DEFAULT_CHUNK, workers: int | None = None) -> list[Estimate]:
    """Mean number of points in each half-open rect [x0,x1)x[y0,y1), one shared sample."""
    rects = np.asarray(rects, dtype=float)
    box = [rects[:, 0].min(), rects[:, 1].max(), rects[:, 2].min(), rects[:, 3].max()]

    def job(rng, size):
        off, xy = sample_points(rng, size, box, alpha, y)
        return _kernels.count_in_rects(off, xy, rects)

    counts = np.concatenate(map_chunks(job, n, seed, chunk, workers), axis=0)
    return [mean_estimate(counts[:, j]) for j in range(len(rects))]
