"""Affine lattices (Z^d + alpha) M: enumeration, visibility, reduction, constants."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce
from pathlib import Path
from typing import Sequence, Union

import mpmath
import numpy as np

from . import _kernels

DET_TOL = 1e-9
BOUNDARY_TOL = 1e-12
DEFAULT_CAP = 10**8


class CapacityError(RuntimeError):
    """Raised when an enumeration would produce more points than allowed."""


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True, eq=False)
class UnimodularBasis:
    """Rows of a d x d real matrix M with det M = 1; the lattice is Z^d M."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1] or rows.shape[0] < 2:
            raise ValueError(f"basis must be a square matrix of size >= 2, got {rows.shape}")
        det = np.linalg.det(rows)
        if abs(det - 1.0) > DET_TOL:
            raise ValueError(f"basis determinant is {det!r}, expected 1")
        rows.setflags(write=False)
        inv = np.linalg.inv(rows)
        inv.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_inv", inv)

    @property
    def dim(self) -> int:
        return self.rows.shape[0]

    @property
    def inverse(self) -> np.ndarray:
        return self._inv

    @classmethod
    def identity(cls, d: int = 2) -> "UnimodularBasis":
        return cls(np.eye(d))

    @classmethod
    def normalized(cls, rows) -> "UnimodularBasis":
        """Rescale an invertible matrix to determinant one (flipping the last
        row if the determinant is negative)."""
        rows = np.array(rows, dtype=float)
        det = np.linalg.det(rows)
        if abs(det) < 1e-14:
            raise ValueError("degenerate basis")
        if det < 0:
            rows[-1] *= -1
            det = -det
        return cls(rows / det ** (1.0 / rows.shape[0]))

    def __repr__(self):
        return f"UnimodularBasis({self.rows.tolist()!r})"


@dataclass(frozen=True)
class Rational:
    """alpha = p / q with q minimal."""

    p: tuple
    q: int

    def __post_init__(self):
        p = tuple(int(x) for x in self.p)
        q = int(self.q)
        if q <= 0:
            raise ValueError("denominator must be positive")
        g = reduce(math.gcd, p, q)
        object.__setattr__(self, "p", tuple(x // g for x in p))
        object.__setattr__(self, "q", q // g)

    @property
    def value(self) -> np.ndarray:
        return np.array(self.p, dtype=float) / self.q

    @property
    def is_integral(self) -> bool:
        return self.q == 1

    @classmethod
    def zero(cls, d: int = 2) -> "Rational":
        return cls((0,) * d, 1)

    @classmethod
    def from_fractions(cls, fracs: Sequence[Fraction]) -> "Rational":
        q = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fracs), 1)
        return cls(tuple(int(f * q) for f in fracs), q)


@dataclass(frozen=True)
class Irrational:
    """A shift treated as generic (not in Q^d)."""

    x: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))

    @property
    def value(self) -> np.ndarray:
        return np.array(self.x, dtype=float)


Alpha = Union[Rational, Irrational]


@dataclass(frozen=True, eq=False)
class AffineLatticeSpec:
    """The point set (Z^d + alpha) M."""

    basis: UnimodularBasis
    alpha: Alpha = None

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", Rational.zero(self.basis.dim))
        if len(self.alpha.value) != self.basis.dim:
            raise ValueError("alpha has the wrong dimension")

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def shift(self) -> np.ndarray:
        return self.alpha.value

    @property
    def contains_origin(self) -> bool:
        return isinstance(self.alpha, Rational) and self.alpha.is_integral

    def points(self, m: np.ndarray) -> np.ndarray:
        return (np.asarray(m, dtype=float) + self.shift) @ self.basis.rows


def square_lattice(alpha=None, d: int = 2) -> AffineLatticeSpec:
    return AffineLatticeSpec(UnimodularBasis.identity(d), alpha)


@dataclass(frozen=True)
class ShellSpec:
    """B_T(c) = {x : cT <= |x| < T}."""

    c: float
    T: float

    def __post_init__(self):
        if not 0.0 <= self.c < 1.0:
            raise ValueError(f"shell requires 0 <= c < 1, got c={self.c}")
        if not self.T > 0:
            raise ValueError(f"shell requires T > 0, got T={self.T}")

    @property
    def r_in(self) -> float:
        return self.c * self.T

    def contains(self, pts: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(pts, axis=-1)
        return (r >= self.r_in) & (r < self.T)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Cylinder:
    """{c1 < x_1 < c2, |x_perp - z| < sigma}; z is the lateral offset."""

    c1: float
    c2: float
    sigma: float
    z: tuple = (0.0,)

    def __post_init__(self):
        if not self.c1 < self.c2:
            raise ValueError("cylinder needs c1 < c2")
        if self.sigma < 0:
            raise ValueError("cylinder needs sigma >= 0")
        object.__setattr__(self, "z", tuple(float(v) for v in np.atleast_1d(self.z)))

    def _lateral(self, pts):
        z = np.zeros(pts.shape[1] - 1)
        z[: len(self.z)] = self.z
        return np.linalg.norm(pts[:, 1:] - z, axis=1)

    def contains(self, pts):
        return (pts[:, 0] > self.c1) & (pts[:, 0] < self.c2) & (self._lateral(pts) < self.sigma)

    def boundary_distance(self, pts):
        lat = self._lateral(pts)
        return np.minimum.reduce([np.abs(pts[:, 0] - self.c1), np.abs(pts[:, 0] - self.c2),
                                  np.abs(lat - self.sigma)])

    def bbox(self, d):
        z = np.zeros(d - 1)
        z[: len(self.z)] = self.z
        lo = np.concatenate([[self.c1], z - self.sigma])
        hi = np.concatenate([[self.c2], z + self.sigma])
        return lo, hi


@dataclass(frozen=True)
class Cone:
    """{c < x_1 < 1, |x_perp| <= x_1 A(c, sigma)}."""

    c: float
    sigma: float
    d: int = 2

    def __post_init__(self):
        if not 0 <= self.c < 1 or self.sigma < 0:
            raise ValueError("cone needs 0 <= c < 1 and sigma >= 0")

    @property
    def aperture(self) -> float:
        return cone_aperture(self.c, self.sigma, self.d)

    def contains(self, pts):
        x1 = pts[:, 0]
        lat = np.linalg.norm(pts[:, 1:], axis=1)
        return (x1 > self.c) & (x1 < 1.0) & (lat <= x1 * self.aperture)

    def boundary_distance(self, pts):
        x1 = pts[:, 0]
        lat = np.linalg.norm(pts[:, 1:], axis=1)
        return np.minimum.reduce([np.abs(x1 - self.c), np.abs(x1 - 1.0),
                                  np.abs(lat - x1 * self.aperture)])

    def bbox(self, d):
        a = self.aperture
        return (np.concatenate([[self.c], -a * np.ones(d - 1)]),
                np.concatenate([[1.0], a * np.ones(d - 1)]))


@dataclass(frozen=True)
class Rect:
    """Half-open box [lo, hi)."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise ValueError("rect needs lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, pts):
        return np.all((pts >= np.array(self.lo)) & (pts < np.array(self.hi)), axis=1)

    def boundary_distance(self, pts):
        return np.min(np.minimum(np.abs(pts - np.array(self.lo)), np.abs(pts - np.array(self.hi))),
                      axis=1)

    def bbox(self, d):
        return np.array(self.lo), np.array(self.hi)


@dataclass(frozen=True)
class ConvexPolygon:
    """Open interior of a convex polygon (d=2), vertices in either orientation."""

    vertices: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least 3 planar vertices")
        if _signed_area(v) < 0:
            v = v[::-1]
        object.__setattr__(self, "vertices", tuple(map(tuple, v)))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.vertices)

    def _edge_values(self, pts):
        v = self.array
        e = np.roll(v, -1, axis=0) - v
        # cross(e_i, p - v_i) > 0 inside for counter-clockwise polygons
        return (e[:, 0][None, :] * (pts[:, 1][:, None] - v[:, 1][None, :])
                - e[:, 1][None, :] * (pts[:, 0][:, None] - v[:, 0][None, :])) / np.linalg.norm(e, axis=1)

    def contains(self, pts):
        return np.all(self._edge_values(pts) > 0, axis=1)

    def boundary_distance(self, pts):
        return np.min(np.abs(self._edge_values(pts)), axis=1)

    def bbox(self, d):
        v = self.array
        return v.min(axis=0), v.max(axis=0)


def _signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


Region = Union[Cylinder, Cone, Rect, ConvexPolygon]


@dataclass
class BoundaryTally:
    """Counts lattice points found within BOUNDARY_TOL of a region boundary."""

    events: int = 0
    queries: int = 0

    def record(self, n_events: int):
        self.events += int(n_events)
        self.queries += 1


# ---------------------------------------------------------------------------
# constants


def unit_ball_volume(d: int) -> float:
    """vol(B_1^d) = pi^(d/2) / Gamma(d/2 + 1)."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def cone_aperture(c: float, sigma: float, d: int) -> float:
    if not 0 <= c < 1 or sigma < 0:
        raise ValueError("cone_aperture needs 0 <= c < 1 and sigma >= 0")
    return (sigma * d / ((1 - c**d) * unit_ball_volume(d - 1))) ** (1.0 / (d - 1))


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


@lru_cache(maxsize=None)
def _kappa_forms(q: int, d: int) -> tuple[float, float]:
    with mpmath.workdps(40):
        units = [t for t in range(1, q + 1) if math.gcd(t, q) == 1]
        head = mpmath.fsum(mpmath.mpf(t) ** (-d) for t in units)
        local = mpmath.fprod(1 - mpmath.mpf(p) ** (-d) for p in _prime_factors(q))
        # sum over (n,q)=1 of mu(n) n^-d as an Euler product over p not dividing q
        mobius_sum = 1 / (mpmath.zeta(d) * local)
        # sum over (n,q)=1 of n^-d via Hurwitz zeta over the unit residues
        coprime_sum = mpmath.fsum(mpmath.zeta(d, mpmath.mpf(r) / q) for r in units) / mpmath.mpf(q) ** d
        return float(mobius_sum * head), float(head / coprime_sum)


def kappa(q: int, d: int) -> float:
    """Density of visible points of Z^d + p/q relative to all points."""
    if q < 1 or d < 2:
        raise ValueError("kappa needs q >= 1 and d >= 2")
    return _kappa_forms(int(q), int(d))[0]


def kappa_both_forms(q: int, d: int) -> tuple[float, float]:
    return _kappa_forms(int(q), int(d))


# ---------------------------------------------------------------------------
# visibility


def is_visible(m, alpha: Rational) -> bool:
    """gcd(q (m + p/q)) <= q, i.e. no other lattice point on the segment to 0."""
    qx = [alpha.q * int(mi) + pi for mi, pi in zip(m, alpha.p)]
    if all(v == 0 for v in qx):
        raise ValueError("the origin is not a visible point")
    return reduce(math.gcd, qx, 0) <= alpha.q


def visible_mask(m: np.ndarray, alpha: Rational) -> np.ndarray:
    qx = alpha.q * np.asarray(m, dtype=np.int64) + np.array(alpha.p, dtype=np.int64)
    g = np.gcd.reduce(qx, axis=1)
    return (g <= alpha.q) & (g > 0)


def primitive_key(m: np.ndarray, alpha: Rational) -> np.ndarray:
    """Integer direction q x / gcd(q x); equal keys mean equal directions."""
    qx = alpha.q * np.asarray(m, dtype=np.int64) + np.array(alpha.p, dtype=np.int64)
    g = np.gcd.reduce(qx, axis=1)
    return qx // g[:, None]


# ---------------------------------------------------------------------------
# reduction


def reduce_basis_2d(rows, return_transform: bool = False):
    """Lagrange-Gauss reduction: |b1| <= |b2| and |b1.b2| <= |b1|^2 / 2.

    The result has the same orientation as the input (det U = +1).

    With ``return_transform`` also returns the integer matrix U such that
    reduced = U @ rows.
    """
    B = np.array(rows, dtype=float)
    if B.shape != (2, 2):
        raise ValueError("reduce_basis_2d needs a 2x2 basis")
    scale = max(np.abs(B).max(), 1e-300)
    if abs(np.linalg.det(B)) < 1e-12 * scale**2:
        raise ValueError("degenerate basis")
    U = np.eye(2, dtype=np.int64)
    b1, b2 = B[0].copy(), B[1].copy()
    u1, u2 = U[0].copy(), U[1].copy()
    if b1 @ b1 > b2 @ b2:
        b1, b2, u1, u2 = b2, b1, u2, u1
    for _ in range(10_000):
        k = int(round((b1 @ b2) / (b1 @ b1)))
        b2 = b2 - k * b1
        u2 = u2 - k * u1
        if b2 @ b2 < b1 @ b1:
            b1, b2, u1, u2 = b2, b1, u2, u1
        else:
            break
    else:
        raise RuntimeError("Lagrange-Gauss reduction did not terminate")
    if round(np.linalg.det(np.array([u1, u2]))) < 0:
        u2 = -u2    # keep the orientation; flipping b2 leaves both conditions intact
    # recompute from the integer transform so the lattice is reproduced exactly
    Uf = np.array([u1, u2])
    red = Uf.astype(float) @ B
    if return_transform:
        return red, Uf
    return red


def shortest_vector_length(basis: UnimodularBasis) -> float:
    """Length of the shortest nonzero vector of Z^d M."""
    if basis.dim == 2:
        red = reduce_basis_2d(basis.rows)
        return float(np.linalg.norm(red[0]))
    R = float(np.min(np.linalg.norm(basis.rows, axis=1)))
    pts = _enumerate_box_generic(basis.rows, basis.inverse, np.zeros(basis.dim),
                                 -R * np.ones(basis.dim), R * np.ones(basis.dim))[0]
    r = np.linalg.norm(pts, axis=1)
    return float(r[r > 0].min())


def min_norm(lat: AffineLatticeSpec) -> float:
    """m(L_alpha): smallest norm of a nonzero point."""
    rows = reduce_basis_2d(lat.basis.rows) if lat.dim == 2 else lat.basis.rows
    # a ball of radius sum |b_i| always holds a nonzero point of any translate
    R = float(np.linalg.norm(rows, axis=1).sum()) * 1.001
    pts = enumerate_shell(lat, ShellSpec(0.0, R))
    return float(np.linalg.norm(pts, axis=1).min())


def lattice_min_distance(lat: AffineLatticeSpec) -> float:
    """Smallest distance between two points of L_alpha (translation invariant)."""
    return shortest_vector_length(lat.basis)


# ---------------------------------------------------------------------------
# enumeration


def _coefficient_box(Minv, s, lo, hi):
    """Integer ranges of m such that (m + s) M can lie in [lo, hi]."""
    d = len(lo)
    corners = np.array(np.meshgrid(*[[lo[i], hi[i]] for i in range(d)], indexing="ij")).reshape(d, -1).T
    u = corners @ Minv - s
    return np.ceil(u.min(axis=0) - 1e-7).astype(np.int64), np.floor(u.max(axis=0) + 1e-7).astype(np.int64)


def _enumerate_box_generic(M, Minv, s, lo, hi, cap=DEFAULT_CAP, chunk=2_000_000):
    """Points of (Z^d + s) M inside the closed box [lo, hi] for any d."""
    d = M.shape[0]
    mlo, mhi = _coefficient_box(Minv, s, lo, hi)
    sizes = mhi - mlo + 1
    if np.any(sizes <= 0):
        return np.empty((0, d)), np.empty((0, d), dtype=np.int64)
    pts_out, m_out, total = [], [], 0
    inner = [np.arange(mlo[i], mhi[i] + 1) for i in range(1, d)]
    inner_grid = np.array(np.meshgrid(*inner, indexing="ij")).reshape(d - 1, -1).T
    per = max(1, chunk // max(1, len(inner_grid)))
    for a0 in range(mlo[0], mhi[0] + 1, per):
        first = np.arange(a0, min(a0 + per, mhi[0] + 1))
        m = np.concatenate([np.repeat(first, len(inner_grid))[:, None],
                            np.tile(inner_grid, (len(first), 1))], axis=1)
        pts = (m + s) @ M
        keep = np.all((pts >= lo) & (pts <= hi), axis=1)
        total += int(keep.sum())
        if total > cap:
            raise CapacityError(f"more than {cap} lattice points")
        pts_out.append(pts[keep])
        m_out.append(m[keep])
    return np.concatenate(pts_out), np.concatenate(m_out)


def _prepared_2d(lat: AffineLatticeSpec):
    """Reduced basis, its inverse, the shift in reduced coordinates and U."""
    red, U = reduce_basis_2d(lat.basis.rows, return_transform=True)
    # (m + a) M = (m + a) U^-1 (U M) and U^-1 is integral
    Uinv = np.rint(np.linalg.inv(U)).astype(np.int64)
    s_red = lat.shift @ Uinv
    return red, np.linalg.inv(red), s_red, U


def _points_in_box(lat: AffineLatticeSpec, lo, hi, cap=DEFAULT_CAP):
    """(points, coefficients m in the original basis) inside the closed box."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lat.dim == 2:
        red, redinv, s_red, U = _prepared_2d(lat)
        box = np.array([lo[0], hi[0], lo[1], hi[1]])
        n = _kernels.box_count_2d(red, redinv, s_red, np.zeros(2), box, False)
        if n > cap:
            raise CapacityError(f"{n} lattice points exceed the cap {cap}")
        xy, mm = _kernels.box_points_2d(red, redinv, s_red, np.zeros(2), box, False)
        # reduced coefficients m' + s_red = (m + a) U^-1, so m = m' U + (s_red U - a)
        m = mm @ U + np.rint(s_red @ U - lat.shift).astype(np.int64)
        return xy, m
    return _enumerate_box_generic(lat.basis.rows, lat.basis.inverse, lat.shift, lo, hi, cap)


def enumerate_shell(lat: AffineLatticeSpec, shell: ShellSpec, cap: int = DEFAULT_CAP,
                    return_coeffs: bool = False):
    """All y in (Z^d + alpha) M with cT <= |y| < T, y != 0."""
    d = lat.dim
    T = shell.T
    if d == 2:
        est = math.pi * T * T * (1 - shell.c**2)
        if est > 1.05 * cap + 100:
            raise CapacityError(f"about {est:.3g} lattice points exceed the cap {cap}")
        red, redinv, s_red, U = _prepared_2d(lat)
        xy, mm = _kernels.disc_points_2d(red, redinv, s_red, float(T))
        m = mm @ U + np.rint(s_red @ U - lat.shift).astype(np.int64) if return_coeffs else None
    else:
        xy, m = _enumerate_box_generic(lat.basis.rows, lat.basis.inverse, lat.shift,
                                       -T * np.ones(d), T * np.ones(d), cap=cap * 4)
    r2 = np.einsum("ij,ij->i", xy, xy)
    keep = (r2 >= shell.r_in**2) & (r2 < T * T) & (r2 > 0)
    if keep.sum() > cap:
        raise CapacityError(f"{int(keep.sum())} lattice points exceed the cap {cap}")
    if return_coeffs:
        return xy[keep], m[keep]
    return xy[keep]


def points_in_region(lat: AffineLatticeSpec, region: Region, cap: int = DEFAULT_CAP,
                     exclude_origin: bool = False, tally: BoundaryTally | None = None,
                     return_coeffs: bool = False):
    """Exact list of lattice points inside ``region`` (its own open/closed rules)."""
    lo, hi = region.bbox(lat.dim)
    pts, m = _points_in_box(lat, lo, hi, cap)
    keep = region.contains(pts) if len(pts) else np.zeros(0, dtype=bool)
    if exclude_origin:
        keep &= np.any(pts != 0, axis=1)
    if tally is not None and len(pts):
        tally.record(np.count_nonzero(region.boundary_distance(pts) < BOUNDARY_TOL))
    if return_coeffs:
        return pts[keep], m[keep]
    return pts[keep]


# ---------------------------------------------------------------------------
# plain-text lattice files


def parse_alpha(text: str, d: int = 2) -> Alpha:
    """'p1/q p2/q' (rational) or 'irrational x y'."""
    tok = text.split()
    if not tok:
        return Rational.zero(d)
    if tok[0].lower() == "irrational":
        vals = [float(mpmath.mpf(eval_real(t))) for t in tok[1:]]
        return Irrational(tuple(vals))
    return Rational.from_fractions([Fraction(t) for t in tok])


def eval_real(token: str) -> float:
    """Decimal or a few named constants ('sqrt2', 'pi', '-sqrt3/3', ...)."""
    names = {"sqrt2": math.sqrt(2), "sqrt3": math.sqrt(3), "sqrt5": math.sqrt(5), "pi": math.pi,
             "e": math.e}
    t = token.strip()
    sign = -1.0 if t.startswith("-") else 1.0
    t = t.lstrip("+-")
    num, _, den = t.partition("/")
    val = names[num] if num in names else float(num)
    if den:
        val /= names[den] if den in names else float(den)
    return sign * val


def load_lattice(path: str | Path) -> AffineLatticeSpec:
    """Read basis rows (one per line) and an optional 'alpha ...' line."""
    rows, alpha_text = [], ""
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("alpha"):
            alpha_text = line[5:].strip()
            continue
        rows.append([eval_real(t) for t in line.split()])
    basis = UnimodularBasis(np.array(rows))
    return AffineLatticeSpec(basis, parse_alpha(alpha_text, basis.dim))


def format_lattice(lat: AffineLatticeSpec) -> str:
    lines = [" ".join(repr(float(x)) for x in row) for row in lat.basis.rows]
    if isinstance(lat.alpha, Rational):
        lines.append("alpha " + " ".join(f"{p}/{lat.alpha.q}" for p in lat.alpha.p))
    else:
        lines.append("alpha irrational " + " ".join(repr(x) for x in lat.alpha.x))
    return "\n".join(lines) + "\n"
