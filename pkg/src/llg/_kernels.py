"""Compiled inner loops for d=2.

Lattice points are always written as (m + s) M + t with m integer, s a shift in
coefficient coordinates and t a real translation.  Rays are swept slab by slab
along the dominant coefficient axis (see ``llg.traversal``).
"""
import math

import numpy as np
from numba import njit

# |disc| <= TANGENT_TOL * rho**2 is treated as tangency (no entry)
TANGENT_TOL = 1e-14
SLACK = 1e-7

STATUS_HIT = 0
STATUS_HORIZON = 1
STATUS_INSIDE = 2


@njit(cache=True, nogil=True)
def _m2_range(Minv, s, t, box):
    lo = math.inf
    hi = -math.inf
    for cx in (box[0], box[1]):
        for cy in (box[2], box[3]):
            u = (cx - t[0]) * Minv[0, 1] + (cy - t[1]) * Minv[1, 1] - s[1]
            lo = min(lo, u)
            hi = max(hi, u)
    return int(math.ceil(lo - SLACK)), int(math.floor(hi + SLACK))


@njit(cache=True, nogil=True)
def _m1_range(M, s, t, m2, box):
    p0x = s[0] * M[0, 0] + (m2 + s[1]) * M[1, 0] + t[0]
    p0y = s[0] * M[0, 1] + (m2 + s[1]) * M[1, 1] + t[1]
    lo = -math.inf
    hi = math.inf
    for j in range(2):
        p0 = p0x if j == 0 else p0y
        a = box[2 * j]
        b = box[2 * j + 1]
        step = M[0, j]
        if abs(step) < 1e-300:
            if p0 < a - SLACK or p0 > b + SLACK:
                return 1, 0
            continue
        l = (a - p0) / step
        h = (b - p0) / step
        if l > h:
            l, h = h, l
        lo = max(lo, l)
        hi = min(hi, h)
    if lo > hi:
        return 1, 0
    return int(math.ceil(lo - SLACK)), int(math.floor(hi + SLACK))


@njit(cache=True, nogil=True)
def _box_scan(M, Minv, s, t, box, exclude_origin, xy, mm, pos, fill):
    """Count (fill=False) or write (fill=True) lattice points in a closed box."""
    n2lo, n2hi = _m2_range(Minv, s, t, box)
    count = 0
    for m2 in range(n2lo, n2hi + 1):
        n1lo, n1hi = _m1_range(M, s, t, m2, box)
        c2 = m2 + s[1]
        for m1 in range(n1lo, n1hi + 1):
            c1 = m1 + s[0]
            if exclude_origin and c1 == 0.0 and c2 == 0.0:
                continue
            x = c1 * M[0, 0] + c2 * M[1, 0] + t[0]
            y = c1 * M[0, 1] + c2 * M[1, 1] + t[1]
            if x < box[0] or x > box[1] or y < box[2] or y > box[3]:
                continue
            if fill:
                xy[pos + count, 0] = x
                xy[pos + count, 1] = y
                mm[pos + count, 0] = m1
                mm[pos + count, 1] = m2
            count += 1
    return count


@njit(cache=True, nogil=True)
def box_count_2d(M, Minv, s, t, box, exclude_origin):
    xy = np.empty((0, 2))
    mm = np.empty((0, 2), dtype=np.int64)
    return _box_scan(M, Minv, s, t, box, exclude_origin, xy, mm, 0, False)


@njit(cache=True, nogil=True)
def box_points_2d(M, Minv, s, t, box, exclude_origin):
    n = box_count_2d(M, Minv, s, t, box, exclude_origin)
    xy = np.empty((n, 2))
    mm = np.empty((n, 2), dtype=np.int64)
    _box_scan(M, Minv, s, t, box, exclude_origin, xy, mm, 0, True)
    return xy, mm


@njit(cache=True, nogil=True)
def batch_box_points_2d(Ms, Minvs, ss, ts, box, exclude_origin):
    """Points of many affine lattices in one box; offsets index the flat output."""
    n = Ms.shape[0]
    offsets = np.zeros(n + 1, dtype=np.int64)
    xy = np.empty((0, 2))
    mm = np.empty((0, 2), dtype=np.int64)
    for i in range(n):
        offsets[i + 1] = offsets[i] + _box_scan(
            Ms[i], Minvs[i], ss[i], ts[i], box, exclude_origin, xy, mm, 0, False)
    xy = np.empty((offsets[n], 2))
    mm = np.empty((offsets[n], 2), dtype=np.int64)
    for i in range(n):
        _box_scan(Ms[i], Minvs[i], ss[i], ts[i], box, exclude_origin, xy, mm,
                  offsets[i], True)
    return offsets, xy, mm


@njit(cache=True, nogil=True)
def _disc_scan(M, Minv, s, R, xy, mm, fill):
    # points with |x| < R, chord-wise per lattice line
    box = np.array([-R, R, -R, R])
    t = np.zeros(2)
    n2lo, n2hi = _m2_range(Minv, s, t, box)
    b1x = M[0, 0]
    b1y = M[0, 1]
    aa = b1x * b1x + b1y * b1y
    count = 0
    for m2 in range(n2lo, n2hi + 1):
        c2 = m2 + s[1]
        p0x = s[0] * b1x + c2 * M[1, 0]
        p0y = s[0] * b1y + c2 * M[1, 1]
        # |p0 + k b1|^2 < R^2
        bb = p0x * b1x + p0y * b1y
        cc = p0x * p0x + p0y * p0y - R * R
        disc = bb * bb - aa * cc
        if disc < 0.0:
            continue
        sq = math.sqrt(disc)
        klo = int(math.ceil((-bb - sq) / aa - SLACK))
        khi = int(math.floor((-bb + sq) / aa + SLACK))
        for m1 in range(klo, khi + 1):
            c1 = m1 + s[0]
            x = c1 * b1x + c2 * M[1, 0]
            y = c1 * b1y + c2 * M[1, 1]
            if x * x + y * y >= R * R:
                continue
            if fill:
                xy[count, 0] = x
                xy[count, 1] = y
                mm[count, 0] = m1
                mm[count, 1] = m2
            count += 1
    return count


@njit(cache=True, nogil=True)
def disc_points_2d(M, Minv, s, R):
    xy = np.empty((0, 2))
    mm = np.empty((0, 2), dtype=np.int64)
    n = _disc_scan(M, Minv, s, R, xy, mm, False)
    xy = np.empty((n, 2))
    mm = np.empty((n, 2), dtype=np.int64)
    _disc_scan(M, Minv, s, R, xy, mm, True)
    return xy, mm


@njit(cache=True, nogil=True)
def disc_count_2d(M, Minv, s, R):
    xy = np.empty((0, 2))
    mm = np.empty((0, 2), dtype=np.int64)
    return _disc_scan(M, Minv, s, R, xy, mm, False)


@njit(cache=True, nogil=True)
def _entry(cx, cy, sx, sy, vx, vy, rho2):
    """Entry parameter of the ray s + t v into the open disc at c, or inf."""
    dx = cx - sx
    dy = cy - sy
    b = dx * vx + dy * vy
    if b <= 0.0:
        return math.inf
    h = dx * vy - dy * vx
    disc = rho2 - h * h
    if disc <= TANGENT_TOL * rho2:
        return math.inf
    dd = dx * dx + dy * dy
    return (dd - rho2) / (b + math.sqrt(disc))


@njit(cache=True, nogil=True)
def _sweep_setup(Minv, alpha, start, v, rprime):
    u0x = start[0] * Minv[0, 0] + start[1] * Minv[1, 0] - alpha[0]
    u0y = start[0] * Minv[0, 1] + start[1] * Minv[1, 1] - alpha[1]
    dvx = v[0] * Minv[0, 0] + v[1] * Minv[1, 0]
    dvy = v[0] * Minv[0, 1] + v[1] * Minv[1, 1]
    if abs(dvx) >= abs(dvy):
        k = 0
        u0k, u0o, dk, do = u0x, u0y, dvx, dvy
    else:
        k = 1
        u0k, u0o, dk, do = u0y, u0x, dvy, dvx
    w = rprime * math.sqrt(dvx * dvx + dvy * dvy) / abs(dk)
    return k, u0k, u0o, dk, do, w


@njit(cache=True, nogil=True)
def first_hit_2d(M, Minv, alpha, start, v, rho, rprime, t_max):
    """Free path from ``start`` along unit ``v``: (t, m1, m2, status)."""
    rho2 = rho * rho
    k, u0k, u0o, dk, do, w = _sweep_setup(Minv, alpha, start, v, rprime)
    delta = rprime / abs(dk)
    u1k = u0k + t_max * dk
    if dk > 0:
        n_first = int(math.ceil(u0k - rprime))
        n_last = int(math.floor(u1k + rprime))
        step = 1
    else:
        n_first = int(math.floor(u0k + rprime))
        n_last = int(math.ceil(u1k - rprime))
        step = -1
    best = math.inf
    bm1 = 0
    bm2 = 0
    n = n_first
    while (n - n_last) * step <= 0:
        tn = (n - u0k) / dk
        if tn - delta > best:
            break
        po = u0o + tn * do
        jlo = int(math.ceil(po - w))
        jhi = int(math.floor(po + w))
        for j in range(jlo, jhi + 1):
            if k == 0:
                m1 = n
                m2 = j
            else:
                m1 = j
                m2 = n
            c1 = m1 + alpha[0]
            c2 = m2 + alpha[1]
            cx = c1 * M[0, 0] + c2 * M[1, 0]
            cy = c1 * M[0, 1] + c2 * M[1, 1]
            dx = cx - start[0]
            dy = cy - start[1]
            if dx * dx + dy * dy < rho2:
                return 0.0, m1, m2, STATUS_INSIDE
            te = _entry(cx, cy, start[0], start[1], v[0], v[1], rho2)
            if te < best:
                best = te
                bm1 = m1
                bm2 = m2
        n += step
    if best <= t_max:
        return best, bm1, bm2, STATUS_HIT
    return math.inf, 0, 0, STATUS_HORIZON


@njit(cache=True, nogil=True)
def first_hit_batch_2d(M, Minv, alpha, starts, vs, rho, rprime, t_max):
    n = starts.shape[0]
    ts = np.empty(n)
    ms = np.empty((n, 2), dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    for i in range(n):
        t, m1, m2, st = first_hit_2d(M, Minv, alpha, starts[i], vs[i], rho, rprime, t_max)
        ts[i] = t
        ms[i, 0] = m1
        ms[i, 1] = m2
        status[i] = st
    return ts, ms, status


@njit(cache=True, nogil=True)
def hit_count_2d(M, Minv, alpha, start, v, rho, rprime, r_in, r_out):
    """Number of centers y, r_in <= |y| < r_out, y != 0, whose open disc meets
    the ray start + R_{>0} v.  Returns -1 if ``start`` lies inside a disc."""
    rho2 = rho * rho
    k, u0k, u0o, dk, do, w = _sweep_setup(Minv, alpha, start, v, rprime)
    t_end = r_out + math.sqrt(start[0] ** 2 + start[1] ** 2) + rho
    u1k = u0k + t_end * dk
    if dk > 0:
        n_first = int(math.ceil(u0k - rprime))
        n_last = int(math.floor(u1k + rprime))
        step = 1
    else:
        n_first = int(math.floor(u0k + rprime))
        n_last = int(math.ceil(u1k - rprime))
        step = -1
    r_in2 = r_in * r_in
    r_out2 = r_out * r_out
    count = 0
    n = n_first
    while (n - n_last) * step <= 0:
        tn = (n - u0k) / dk
        po = u0o + tn * do
        jlo = int(math.ceil(po - w))
        jhi = int(math.floor(po + w))
        for j in range(jlo, jhi + 1):
            if k == 0:
                m1 = n
                m2 = j
            else:
                m1 = j
                m2 = n
            c1 = m1 + alpha[0]
            c2 = m2 + alpha[1]
            if c1 == 0.0 and c2 == 0.0:
                continue
            cx = c1 * M[0, 0] + c2 * M[1, 0]
            cy = c1 * M[0, 1] + c2 * M[1, 1]
            dx = cx - start[0]
            dy = cy - start[1]
            if dx * dx + dy * dy < rho2:
                return -1
            r2 = cx * cx + cy * cy
            if r2 < r_in2 or r2 >= r_out2:
                continue
            b = dx * v[0] + dy * v[1]
            if b <= 0.0:
                continue
            h = dx * v[1] - dy * v[0]
            if rho2 - h * h > TANGENT_TOL * rho2:
                count += 1
        n += step
    return count


@njit(cache=True, nogil=True)
def hit_count_batch_2d(M, Minv, alpha, starts, vs, rho, rprime, r_in, r_out):
    n = starts.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = hit_count_2d(M, Minv, alpha, starts[i], vs[i], rho, rprime, r_in, r_out)
    return out


@njit(cache=True, nogil=True)
def count_in_rects(offsets, xy, rects):
    """counts[i, j] = #points of sample i in half-open rect j = [x0,x1) x [y0,y1)."""
    n = offsets.shape[0] - 1
    nr = rects.shape[0]
    counts = np.zeros((n, nr), dtype=np.int64)
    for i in range(n):
        for p in range(offsets[i], offsets[i + 1]):
            x = xy[p, 0]
            y = xy[p, 1]
            for j in range(nr):
                if rects[j, 0] <= x < rects[j, 1] and rects[j, 2] <= y < rects[j, 3]:
                    counts[i, j] += 1
    return counts


@njit(cache=True, nogil=True)
def sorted_window_counts(sorted_vals, lo, hi):
    """#{x : lo < x < hi} for each (lo, hi) pair, given sorted values."""
    out = np.empty(lo.shape[0], dtype=np.int64)
    a = np.searchsorted(sorted_vals, hi, side="left")
    b = np.searchsorted(sorted_vals, lo, side="right")
    for i in range(lo.shape[0]):
        out[i] = max(0, a[i] - b[i])
    return out
