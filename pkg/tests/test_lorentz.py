import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from llg.lattice import (AffineLatticeSpec, ConvexPolygon, Irrational, ShellSpec,
                         UnimodularBasis, reduce_basis_2d, square_lattice)
from llg.lorentz import (CollisionRecord, HorizonExceeded, K_of_v, RadiusTooLarge, RayQuery,
                         StartInsideScatterer, TabulatedBeta, check_beta, convex_scatterer_hit_count,
                         empirical_free_path_cdf, expected_ray_count, free_path, is_singular_direction,
                         joint_tau_w1_sample, ray_count_sample, ray_hit_count, reflect, rodrigues_E,
                         sample_free_paths, sample_free_paths_averaged)

from conftest import random_basis
import oracles

Z2 = square_lattice()


def unit(rng, d):
    x = rng.normal(size=d)
    return x / np.linalg.norm(x)


# --- queries -------------------------------------------------------------------

def test_ray_query_validation():
    with pytest.raises(ValueError):
        RayQuery((0, 0), (1, 1), 0.1, 10)
    with pytest.raises(ValueError):
        RayQuery((0, 0), (1, 0), 0.0, 10)


def test_free_path_examples():
    rec = free_path(Z2, RayQuery((0.5, 0), (1, 0), 0.1, 100))
    assert isinstance(rec, CollisionRecord)
    assert rec.tau1 == pytest.approx(0.4)
    assert np.allclose(rec.center, (1, 0)) and np.allclose(rec.w1, (-1, 0))
    assert isinstance(free_path(Z2, RayQuery((0.5, 0.5), (1, 0), 0.1, 1e6)), HorizonExceeded)


def test_free_path_diagonal_example_matches_oracle():
    v = np.array([0.6, 0.8])
    for t_max in (50.0, 1000.0):
        rec = free_path(Z2, RayQuery((0.2, 0.1), v, 0.05, t_max))
        t, m = oracles.free_path(np.eye(2), (0, 0), (0.2, 0.1), v, 0.05, t_max)
        if math.isinf(t):
            assert isinstance(rec, HorizonExceeded)
        else:
            assert rec.tau1 == pytest.approx(t, abs=1e-9)


def test_free_path_errors():
    with pytest.raises(StartInsideScatterer):
        free_path(Z2, RayQuery((0.05, 0), (1, 0), 0.1, 10))
    with pytest.raises(RadiusTooLarge):
        free_path(Z2, RayQuery((0.5, 0.5), (1, 0), 0.46, 10))
    with pytest.raises(ValueError):
        free_path(Z2, RayQuery((0.5, 0.5, 0.5), (1, 0, 0), 0.1, 10))


def _random_query(rng, B, alpha, d=2):
    rho = rng.uniform(0.01, 0.2) * min(np.linalg.norm(reduce_basis_2d(B)[0]), 1) if d == 2 else rng.uniform(0.02, 0.2)
    lat = AffineLatticeSpec(UnimodularBasis(B), Irrational(alpha))
    while True:
        start = rng.uniform(-1, 1, d)
        pts, _ = oracles.all_points(B, alpha, 3)
        if np.min(np.linalg.norm(pts - start, axis=1)) > rho * 1.01:
            break
    return lat, RayQuery(start, unit(rng, d), rho, rng.uniform(1, 40))


@pytest.mark.parametrize("method", ["kernel", "cells"])
def test_free_path_matches_oracle(method):
    rng = np.random.default_rng(11)
    for _ in range(150):
        B = random_basis(rng, max_skew=3)
        alpha = tuple(rng.uniform(-1, 1, 2))
        lat, q = _random_query(rng, B, alpha)
        rec = free_path(lat, q, method=method)
        t, m = oracles.free_path(B, alpha, q.start, q.v, q.rho, q.t_max)
        if math.isinf(t):
            assert isinstance(rec, HorizonExceeded)
        else:
            assert rec.tau1 == pytest.approx(t, abs=1e-9)
            assert np.array_equal(rec.coeffs, m)


def test_free_path_three_dimensions_matches_oracle():
    rng = np.random.default_rng(2)
    B = np.eye(3)
    for _ in range(40):
        alpha = tuple(rng.uniform(-1, 1, 3))
        lat, q = _random_query(rng, B, alpha, d=3)
        q = RayQuery(q.start, q.v, q.rho, min(q.t_max, 12))
        rec = free_path(lat, q)
        t, _ = oracles.free_path(B, alpha, q.start, q.v, q.rho, q.t_max)
        if math.isinf(t):
            assert isinstance(rec, HorizonExceeded)
        else:
            assert rec.tau1 == pytest.approx(t, abs=1e-9)


@given(seed=st.integers(0, 10**6))
def test_collision_record_invariants(seed):
    rng = np.random.default_rng(seed)
    lat, q = _random_query(rng, random_basis(rng), tuple(rng.uniform(-1, 1, 2)))
    q = RayQuery(q.start, q.v, q.rho, 500)
    rec = free_path(lat, q)
    if isinstance(rec, HorizonExceeded):
        return
    assert np.allclose(q.start + rec.tau1 * q.v, rec.center + q.rho * rec.w1, atol=1e-9)
    assert q.v @ rec.w1 < 0
    assert np.linalg.norm(rec.v1) == pytest.approx(1, abs=1e-12)
    # the open segment before the hit stays outside every ball
    ts = np.linspace(0, rec.tau1, 1000, endpoint=False)[1:]
    path = q.start + ts[:, None] * q.v
    pts, _ = oracles.all_points(lat.basis.rows, lat.alpha.x, rec.tau1 + np.linalg.norm(q.start) + 1)
    near = pts[np.linalg.norm(pts - q.start, axis=1) <= rec.tau1 + 1]
    dist = np.min(np.linalg.norm(path[:, None, :] - near[None, :, :], axis=2), axis=1)
    assert np.all(dist > q.rho - 1e-12)


# --- reflection and K(v) ----------------------------------------------------------

def test_reflect_examples():
    assert np.allclose(reflect((1, 0), (-1, 0)), (-1, 0))
    assert np.allclose(reflect((1, 0), -np.array([1, 1]) / math.sqrt(2)), (0, -1))


@given(seed=st.integers(0, 10**6), d=st.integers(2, 4))
def test_reflect_properties(seed, d):
    rng = np.random.default_rng(seed)
    v0, w1 = unit(rng, d), unit(rng, d)
    v1 = reflect(v0, w1)
    assert np.linalg.norm(v1) == pytest.approx(1, abs=1e-12)
    assert v1 @ w1 == pytest.approx(-(v0 @ w1), abs=1e-12)
    assert np.allclose(reflect(v1, w1), v0, atol=1e-12)


def test_K_examples():
    for d in (2, 3, 4):
        e1 = np.eye(d)[0]
        assert np.allclose(K_of_v(e1), np.eye(d))
    assert np.allclose(K_of_v((-1, 0)), -np.eye(2))
    assert np.allclose(K_of_v((-1, 0, 0, 0)), -np.eye(4))
    K3 = K_of_v((-1, 0, 0))
    assert np.allclose(np.array([-1, 0, 0]) @ K3, (1, 0, 0)) and np.linalg.det(K3) == pytest.approx(1)
    assert is_singular_direction((-1, 0, 0)) and not is_singular_direction((1, 0, 0))


@given(seed=st.integers(0, 10**6), d=st.integers(2, 5))
def test_K_defining_property(seed, d):
    v = unit(np.random.default_rng(seed), d)
    K = K_of_v(v)
    assert np.allclose(v @ K, np.eye(d)[0], atol=1e-12)
    assert np.linalg.det(K) == pytest.approx(1, abs=1e-12)
    assert np.allclose(K @ K.T, np.eye(d), atol=1e-12)


def test_rodrigues_matches_matrix_exponential():
    from scipy.linalg import expm
    w = np.array([0.3, -1.1, 0.4])
    A = np.zeros((4, 4))
    A[0, 1:], A[1:, 0] = w, -w
    assert np.allclose(rodrigues_E(w), expm(A), atol=1e-12)


# --- ray counts -----------------------------------------------------------------------

def test_ray_hit_count_examples():
    assert ray_hit_count(Z2, ShellSpec(0, 5), 0.1, (1, 0)) == 4
    assert ray_hit_count(Z2, ShellSpec(0, 5), 0.0, (1, 0)) == 0
    Z3 = square_lattice(d=3)
    assert ray_hit_count(Z3, ShellSpec(0, 5), 0.1, (1, 0, 0)) == 4


def test_ray_hit_count_matches_oracle():
    rng = np.random.default_rng(6)
    for _ in range(100):
        B = random_basis(rng)
        alpha = tuple(rng.uniform(-1, 1, 2))
        lat = AffineLatticeSpec(UnimodularBasis(B), Irrational(alpha))
        rho = 0.2 * np.linalg.norm(reduce_basis_2d(B)[0])
        v = unit(rng, 2)
        c, T = rng.uniform(0, 0.9), rng.uniform(2, 20)
        try:
            got = ray_hit_count(lat, ShellSpec(c, T), rho, v)
        except StartInsideScatterer:
            continue
        assert got == oracles.ray_hits(B, alpha, np.zeros(2), v, rho, c, T)


def test_ray_hit_count_3d_matches_oracle():
    rng = np.random.default_rng(1)
    lat = square_lattice(Irrational((0.3, 0.1, 0.45)), d=3)
    for _ in range(30):
        v = unit(rng, 3)
        assert ray_hit_count(lat, ShellSpec(0.2, 8), 0.15, v) == oracles.ray_hits(
            np.eye(3), (0.3, 0.1, 0.45), np.zeros(3), v, 0.15, 0.2, 8)


def test_mean_ray_count():
    rho, T = 0.05, 1000.0
    counts = ray_count_sample(Z2, ShellSpec(0, T), rho, 10**4, seed=3)
    assert abs(counts.mean() - expected_ray_count(rho, 0, T, 2)) < 4 * counts.std() / 100
    assert expected_ray_count(rho, 0, T, 2) == pytest.approx(2 * rho * T)


def test_sandwich_property():
    rng = np.random.default_rng(4)
    lat = square_lattice(Irrational((math.sqrt(2) / 2, math.sqrt(3) / 3)))
    rho, T = 0.02, 30.0
    for _ in range(300):
        v = unit(rng, 2)
        rec = free_path(lat, RayQuery(np.zeros(2), v, rho, 10 * T))
        tau = math.inf if isinstance(rec, HorizonExceeded) else rec.tau1
        if ray_hit_count(lat, ShellSpec(0, T + rho), rho, v) == 0:
            assert tau >= T
        if tau >= T:
            assert ray_hit_count(lat, ShellSpec(0, T - rho), rho, v) == 0


# --- polygons --------------------------------------------------------------------------

def _ngon(n, r, phase=0.0):
    a = phase + 2 * math.pi * np.arange(n) / n
    return ConvexPolygon(tuple(zip(r * np.cos(a), r * np.sin(a))))


def test_polygon_sandwich_between_square_and_circle():
    rng = np.random.default_rng(5)
    lat = square_lattice(Irrational((0.31, 0.17)))
    T, rho = 200.0, 0.1     # Q_T = Q / T, so a radius-rho * T shape gives radius rho
    inner = _ngon(4, rho * T)                      # inscribed square
    outer = _ngon(4, rho * T * math.sqrt(2), math.pi / 4)   # circumscribed square
    shell = ShellSpec(0, T)
    for _ in range(200):
        v = unit(rng, 2)
        a = convex_scatterer_hit_count(lat, shell, inner, T, v)
        b = ray_hit_count(lat, shell, rho, v)
        c = convex_scatterer_hit_count(lat, shell, outer, T, v)
        assert a <= b <= c


def test_tiny_polygon_gives_zero():
    Q = _ngon(5, 1e-9)
    assert convex_scatterer_hit_count(Z2, ShellSpec(0, 50), Q, 50, unit(np.random.default_rng(0), 2)) == 0


def test_polygon_against_segment_oracle():
    rng = np.random.default_rng(9)
    lat = square_lattice(Irrational((0.2, 0.7)))
    Q = ConvexPolygon(((-0.3, -0.2), (0.5, -0.1), (0.2, 0.4), (-0.4, 0.3)))
    T = 8.0
    shell = ShellSpec(0.1, T)
    pts = oracles.shell_points(np.eye(2), (0.2, 0.7), 0.1, T)
    for _ in range(40):
        v = unit(rng, 2)
        ref = sum(oracles.segment_meets_open_polygon(Q.array / T + y, v, T + 1, 40000) for y in pts)
        assert convex_scatterer_hit_count(lat, shell, Q, T, v) == ref


# --- free path samples ---------------------------------------------------------------------

Q0 = (math.sqrt(2) / 2, math.sqrt(3) / 3)


def test_cdf_edges():
    grid = np.array([0.0, 0.5, 1.0, 3.0])
    p, se, sample = empirical_free_path_cdf(Z2, Q0, None, 1e-2, grid, 2000, seed=1)
    assert p[0] == 1.0
    assert np.all(np.diff(p) <= 0)
    big = np.nanmax(sample.xi[np.isfinite(sample.xi)]) * 1.01
    assert sample.finite_survival([big])[0] == 0.0


def test_sample_is_deterministic_across_workers():
    a = sample_free_paths(Z2, Q0, None, 1e-2, 20000, seed=5, t_max=1000, workers=1)
    b = sample_free_paths(Z2, Q0, None, 1e-2, 20000, seed=5, t_max=1000, workers=3)
    assert np.array_equal(a.xi, b.xi)


def test_sample_matches_single_queries():
    s = sample_free_paths(Z2, Q0, None, 0.02, 50, seed=2, t_max=2000)
    for v, xi in zip(s.directions, s.xi):
        rec = free_path(Z2, RayQuery(np.array(Q0), v, 0.02, 2000))
        if isinstance(rec, HorizonExceeded):
            assert math.isinf(xi)
        else:
            assert xi == pytest.approx(0.02 * rec.tau1, rel=1e-12)


def test_joint_sample_hemisphere_and_marginal():
    v, xi, u, dropped = joint_tau_w1_sample(Z2, Q0, None, 0.01, 5000, seed=3)
    assert np.all(u[:, 0] > 0)
    assert np.allclose(np.linalg.norm(u, axis=1), 1)
    grid = np.linspace(0, 2, 11)
    p, _, s = empirical_free_path_cdf(Z2, Q0, None, 0.01, grid, 5000, seed=3)
    marg = (np.array([np.count_nonzero(xi >= g) for g in grid]) + dropped) / 5000
    assert np.allclose(marg, p)


def test_joint_sample_trivial_record():
    # start (0.5, 0), v = e_1: the impact is head on, so -w_1 K(v) = e_1
    from llg.lorentz import sample_free_paths_fixed
    s = sample_free_paths_fixed(Z2, (0.5, 0), None, 0.1, (1, 0), 1, 10)
    assert s.xi[0] == pytest.approx(0.1 * 0.4)
    w = s.w1[0]
    u = -(w @ K_of_v((1.0, 0.0)))
    assert np.allclose(u, (1, 0))


def test_beta_precondition():
    with pytest.raises(ValueError):
        check_beta(Z2, (0, 0), np.array([0.5, 0.0]))
    check_beta(Z2, (0, 0), lambda vs: 1.5 * vs)   # starts on the far side, moving away
    check_beta(Z2, Q0, None)                       # q0 is not a center


def test_tabulated_beta_interpolates_periodically():
    ang = np.array([0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
    vals = np.column_stack([np.cos(ang), np.sin(ang)]) * 2
    beta = TabulatedBeta(ang, vals)
    out = beta(np.array([[1.0, 0.0], [math.cos(7 * math.pi / 4), math.sin(7 * math.pi / 4)]]))
    assert np.allclose(out[0], (2, 0))
    assert np.allclose(out[1], (1, -1))


def test_averaged_starts_are_outside():
    s = sample_free_paths_averaged(Z2, 0.05, 3000, seed=1, t_max=500)
    assert s.n == 3000
    assert np.all(s.xi > 0)


def test_free_path_law_independent_of_lattice():
    rng = np.random.default_rng(8)
    B = reduce_basis_2d(random_basis(rng))
    other = AffineLatticeSpec(UnimodularBasis(B))
    grid = np.linspace(0, 4, 41)
    rho = 1e-3
    a = sample_free_paths(Z2, Q0, None, rho, 10**4, seed=1, t_max=4.2 / rho)
    b = sample_free_paths(other, Q0, None, rho, 10**4, seed=2, t_max=4.2 / rho)
    assert np.max(np.abs(a.survival(grid)[0] - b.survival(grid)[0])) <= 0.02
