"""Haar-random lattices in d=2: X_1, X (affine), X_q and the fibers X(y)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Rational, UnimodularBasis

Y0 = math.sqrt(3) / 2
MAX_Q = 50
# hyperbolic area of the fundamental domain over the proposal area
ACCEPTANCE = (math.pi / 3) / (2 / math.sqrt(3))


@dataclass(frozen=True, eq=False)
class HaarLatticeSample:
    basis: UnimodularBasis
    x: float
    y: float
    theta: float


@dataclass(frozen=True, eq=False)
class AffineHaarSample:
    lattice: HaarLatticeSample
    shift: np.ndarray          # coefficient shift u in [0, 1)^2; points (Z^2 + u) M

    @property
    def xi(self) -> np.ndarray:
        return self.shift @ self.lattice.basis.rows


@dataclass(frozen=True, eq=False)
class XqSample:
    lattice: HaarLatticeSample
    gamma: np.ndarray
    alpha: Rational

    @property
    def shift(self) -> np.ndarray:
        """alpha gamma reduced mod 1; points (Z^2 + alpha gamma) M."""
        return (np.array(self.alpha.p) @ self.gamma % self.alpha.q) / self.alpha.q


@dataclass(frozen=True, eq=False)
class XySample:
    lattice: HaarLatticeSample
    y: np.ndarray              # points Z^2 M + y


def basis_from_params(x, y, theta) -> np.ndarray:
    """Rows (1/sqrt y, 0), (x/sqrt y, sqrt y), then rotated by theta.  Shapes broadcast."""
    x, y, theta = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(theta, float))
    sy = np.sqrt(y)
    B = np.zeros(x.shape + (2, 2))
    B[..., 0, 0] = 1 / sy
    B[..., 1, 0] = x / sy
    B[..., 1, 1] = sy
    c, s = np.cos(theta), np.sin(theta)
    R = np.zeros(x.shape + (2, 2))
    R[..., 0, 0], R[..., 0, 1], R[..., 1, 0], R[..., 1, 1] = c, s, -s, c
    return B @ R


def sample_tau(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray, int]:
    """n points of the modular fundamental domain with density ~ y^-2; also the proposal count."""
    xs, ys, proposals, have = [], [], 0, 0
    while have < n:
        m = max(16, int((n - have) / ACCEPTANCE * 1.05) + 8)
        x = rng.uniform(-0.5, 0.5, m)
        y = Y0 / (1.0 - rng.random(m))   # inverse CDF of y0 y^-2 on [y0, inf)
        ok = x * x + y * y >= 1.0
        idx = np.flatnonzero(ok)[: n - have]
        # proposals consumed up to and including the last accepted one
        proposals += (int(idx[-1]) + 1) if have + len(idx) == n and len(idx) else m
        xs.append(x[idx])
        ys.append(y[idx])
        have += len(idx)
    return np.concatenate(xs), np.concatenate(ys), proposals


def sample_X1_params(rng: np.random.Generator, n: int):
    x, y, _ = sample_tau(rng, n)
    theta = rng.uniform(0.0, 2 * math.pi, n)
    return x, y, theta


def sample_X1_batch(rng: np.random.Generator, n: int) -> np.ndarray:
    """(n, 2, 2) Haar-random unimodular bases (already Gauss reduced)."""
    return basis_from_params(*sample_X1_params(rng, n))


def sample_X1(rng: np.random.Generator) -> HaarLatticeSample:
    x, y, theta = sample_X1_params(rng, 1)
    return HaarLatticeSample(UnimodularBasis(basis_from_params(x[0], y[0], theta[0])), x[0], y[0], theta[0])


def sample_X(rng: np.random.Generator) -> AffineHaarSample:
    lat = sample_X1(rng)
    return AffineHaarSample(lat, rng.random(2))


def sample_sl2_mod_q(rng: np.random.Generator, q: int, n: int) -> np.ndarray:
    """n uniform elements of SL(2, Z/q) by rejection from uniform 2x2 matrices mod q."""
    if q < 1 or q > MAX_Q:
        raise ValueError(f"q must be in [1, {MAX_Q}], got {q}")
    rate = sl2_order(q) / q**4
    parts, have = [], 0
    while have < n:
        size = min(1_000_000, max(64, int((n - have) / rate * 1.2)))
        m = rng.integers(0, q, size=(size, 2, 2))
        det = (m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]) % q
        m = m[det == 1 % q][: n - have]
        parts.append(m)
        have += len(m)
    return np.concatenate(parts)


def sl2_order(q: int) -> int:
    """|SL(2, Z/q)| = q^3 prod_{p | q} (1 - p^-2)."""
    order = q**3
    n, p = q, 2
    while n > 1:
        if n % p == 0:
            order = order // (p * p) * (p * p - 1)
            while n % p == 0:
                n //= p
        p += 1
    return order


def sample_Xq(rng: np.random.Generator, alpha: Rational) -> XqSample:
    lat = sample_X1(rng)
    return XqSample(lat, sample_sl2_mod_q(rng, alpha.q, 1)[0], alpha)


def xq_shifts(rng: np.random.Generator, alpha: Rational, n: int) -> np.ndarray:
    """Coefficient shifts alpha gamma mod 1 for n uniform gamma."""
    g = sample_sl2_mod_q(rng, alpha.q, n)
    p = np.array(alpha.p, dtype=np.int64)
    return (np.einsum("i,nij->nj", p, g) % alpha.q) / alpha.q


def sample_X_given_y(rng: np.random.Generator, y) -> XySample:
    return XySample(sample_X1(rng), np.asarray(y, dtype=float))
