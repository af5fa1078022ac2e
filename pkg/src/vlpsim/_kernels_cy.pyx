# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled solver kernels.

Mirror of ``_kernels_py`` (same entry points, same arithmetic order); see
that module for the semantics. Anchor counts are capped at 64 to keep all
per-call scratch on the stack.
"""

from libc.math cimport fabs, sqrt, pow, sin, cos, INFINITY, isfinite

import numpy as np

backend_name = "compiled"

DEF MAX_ANCHORS = 64

cdef double _INVPHI = (sqrt(5.0) - 1.0) / 2.0


cdef inline double _powi(double x, long n) noexcept nogil:
    cdef double result = 1.0
    cdef double base = x
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


cdef inline double _pow_general(double x, double p) noexcept nogil:
    cdef long n = <long> p
    if (<double> n) == p and n >= 0:
        return _powi(x, n)
    return pow(x, p)


# anchors_xy may have 2 or 3 columns; only the first two are read.
cdef int _trilaterate(const double[:, :] anchors_xy, const double* rho2, int n,
                      double* out_x, double* out_y, double* out_residual) noexcept nogil:
    cdef double axr = anchors_xy[n - 1, 0]
    cdef double ayr = anchors_xy[n - 1, 1]
    cdef double cref = axr * axr + ayr * ayr - rho2[n - 1]
    cdef double m00 = 0.0, m01 = 0.0, m11 = 0.0, v0 = 0.0, v1 = 0.0
    cdef double ax, ay, a0, a1, b, det, x, y, r, residual, floor_det
    cdef int j
    for j in range(n - 1):
        ax = anchors_xy[j, 0]
        ay = anchors_xy[j, 1]
        a0 = 2.0 * (ax - axr)
        a1 = 2.0 * (ay - ayr)
        b = (ax * ax + ay * ay - rho2[j]) - cref
        m00 += a0 * a0
        m01 += a0 * a1
        m11 += a1 * a1
        v0 += a0 * b
        v1 += a1 * b
    det = m00 * m11 - m01 * m01
    floor_det = m00 * m11
    if floor_det < 1e-30:
        floor_det = 1e-30
    if fabs(det) <= 1e-12 * floor_det:
        return 0
    x = (m11 * v0 - m01 * v1) / det
    y = (m00 * v1 - m01 * v0) / det
    residual = 0.0
    for j in range(n - 1):
        ax = anchors_xy[j, 0]
        ay = anchors_xy[j, 1]
        a0 = 2.0 * (ax - axr)
        a1 = 2.0 * (ay - ayr)
        b = (ax * ax + ay * ay - rho2[j]) - cref
        r = a0 * x + a1 * y - b
        residual += r * r
    out_x[0] = x
    out_y[0] = y
    out_residual[0] = residual
    return 1


def trilaterate(anchors_xy, rho2):
    cdef double[:, :] a = np.ascontiguousarray(anchors_xy, dtype=np.float64)
    cdef double[:] r = np.ascontiguousarray(rho2, dtype=np.float64)
    cdef int n = a.shape[0]
    if n > MAX_ANCHORS:
        raise ValueError("too many anchors for the compiled kernel")
    cdef double buf[MAX_ANCHORS]
    cdef int j
    for j in range(n):
        buf[j] = r[j]
    cdef double x = 0.0, y = 0.0, residual = 0.0
    cdef int ok = _trilaterate(a, buf, n, &x, &y, &residual)
    if not ok:
        return 0.0, 0.0, 0.0, 0
    return x, y, residual, 1


cdef double _indirect_cost(const double[:, :] anchors, const double[:] coeffs,
                           const double[:] powers, double m, double h,
                           double* out_x, double* out_y) noexcept nogil:
    cdef int n = anchors.shape[0]
    cdef double d[MAX_ANCHORS]
    cdef double hh[MAX_ANCHORS]
    cdef double rho2[MAX_ANCHORS]
    cdef double exp_num = m + 1.0
    cdef double exp_root = 1.0 / (m + 3.0)
    cdef double hi, di, r2, x, y, residual, cost, dx, dy, r
    cdef int i
    for i in range(n):
        hi = fabs(h - anchors[i, 2])
        if hi < 1e-9:
            hi = 1e-9
        di = pow(coeffs[i] * _pow_general(hi, exp_num) / powers[i], exp_root)
        r2 = di * di - hi * hi
        if r2 < 0.0:
            r2 = 0.0
        d[i] = di
        hh[i] = hi
        rho2[i] = r2
    if not _trilaterate(anchors, rho2, n, &x, &y, &residual):
        return INFINITY
    cost = 0.0
    for i in range(n):
        dx = x - anchors[i, 0]
        dy = y - anchors[i, 1]
        r = sqrt(dx * dx + dy * dy + hh[i] * hh[i]) - d[i]
        cost += r * r
    out_x[0] = x
    out_y[0] = y
    return cost


def indirect_h_solve(anchors, coeffs, powers, double m, double h_lo, double h_hi,
                     double resolution, int fast):
    cdef double[:, :] anc = np.ascontiguousarray(anchors, dtype=np.float64)
    cdef double[:] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef double[:] pw = np.ascontiguousarray(powers, dtype=np.float64)
    cdef int n = anc.shape[0]
    if n > MAX_ANCHORS:
        raise ValueError("too many anchors for the compiled kernel")

    cdef double best_cost = INFINITY
    cdef double best_h = 0.0, best_x = 0.0, best_y = 0.0
    cdef double x = 0.0, y = 0.0
    cdef long evals = 0
    cdef long n_c, k
    cdef int best_k = 0
    cdef double step, h, cost
    cdef double a, b, c, d_pt, fc, fd, xc, yc, xd, yd

    if not fast:
        n_c = <long> ((h_hi - h_lo) / resolution + 0.5)
        if n_c < 1:
            n_c = 1
        step = (h_hi - h_lo) / n_c
        for k in range(n_c):
            h = h_lo + (k + 0.5) * step
            cost = _indirect_cost(anc, cf, pw, m, h, &x, &y)
            evals += 1
            if cost < best_cost:
                best_cost = cost
                best_h = h
                best_x = x
                best_y = y
        if not isfinite(best_cost):
            return 0.0, 0.0, 0.0, 0.0, evals, 0
        return best_x, best_y, best_h, best_cost, evals, 1

    step = (h_hi - h_lo) / 32.0
    for k in range(32):
        h = h_lo + (k + 0.5) * step
        cost = _indirect_cost(anc, cf, pw, m, h, &x, &y)
        evals += 1
        if cost < best_cost:
            best_cost = cost
            best_h = h
            best_x = x
            best_y = y
            best_k = <int> k
    a = h_lo + (best_k - 0.5) * step
    if a < h_lo:
        a = h_lo
    b = h_lo + (best_k + 1.5) * step
    if b > h_hi:
        b = h_hi

    c = b - _INVPHI * (b - a)
    d_pt = a + _INVPHI * (b - a)
    xc = yc = xd = yd = 0.0
    fc = _indirect_cost(anc, cf, pw, m, c, &xc, &yc)
    fd = _indirect_cost(anc, cf, pw, m, d_pt, &xd, &yd)
    evals += 2
    if fc < best_cost:
        best_cost = fc
        best_h = c
        best_x = xc
        best_y = yc
    if fd < best_cost:
        best_cost = fd
        best_h = d_pt
        best_x = xd
        best_y = yd
    while (b - a) > resolution:
        if fc < fd:
            b = d_pt
            d_pt = c
            fd = fc
            c = b - _INVPHI * (b - a)
            fc = _indirect_cost(anc, cf, pw, m, c, &xc, &yc)
            evals += 1
            if fc < best_cost:
                best_cost = fc
                best_h = c
                best_x = xc
                best_y = yc
        else:
            a = c
            c = d_pt
            fc = fd
            d_pt = a + _INVPHI * (b - a)
            fd = _indirect_cost(anc, cf, pw, m, d_pt, &xd, &yd)
            evals += 1
            if fd < best_cost:
                best_cost = fd
                best_h = d_pt
                best_x = xd
                best_y = yd
    if not isfinite(best_cost):
        return 0.0, 0.0, 0.0, 0.0, evals, 0
    return best_x, best_y, best_h, best_cost, evals, 1


def firefly_solve(anchors, coeffs, powers, double m, double z_r, double roll, double pitch):
    cdef double[:, :] anc = np.ascontiguousarray(anchors, dtype=np.float64)
    cdef double[:] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef double[:] pw = np.ascontiguousarray(powers, dtype=np.float64)
    cdef int n = anc.shape[0]
    if n > MAX_ANCHORS:
        raise ValueError("too many anchors for the compiled kernel")

    cdef double exp_num = m + 1.0
    cdef double exp_root = 1.0 / (m + 3.0)
    cdef long evals = 0

    cdef double hh[MAX_ANCHORS]
    cdef double d1[MAX_ANCHORS]
    cdef double rho2[MAX_ANCHORS]
    cdef int keep_idx[MAX_ANCHORS]
    cdef int n_keep = 0
    cdef int i, k
    cdef double hi, di, r2

    for i in range(n):
        hi = fabs(z_r - anc[i, 2])
        if hi <= 1e-9:
            continue
        di = pow(cf[i] * _pow_general(hi, exp_num) / pw[i], exp_root)
        evals += 1
        r2 = di * di - hi * hi
        if r2 < 0.0:
            r2 = 0.0
        hh[n_keep] = hi
        d1[n_keep] = di
        rho2[n_keep] = r2
        keep_idx[n_keep] = i
        n_keep += 1
    if n_keep < 3:
        return 0.0, 0.0, z_r, 0.0, evals, 0

    cdef double x1 = 0.0, y1 = 0.0, residual = 0.0
    xy_np = np.empty((n_keep, 2))
    cdef double[:, :] xy = xy_np
    for k in range(n_keep):
        xy[k, 0] = anc[keep_idx[k], 0]
        xy[k, 1] = anc[keep_idx[k], 1]
    evals += 1
    if not _trilaterate(xy, rho2, n_keep, &x1, &y1, &residual):
        return 0.0, 0.0, z_r, 0.0, evals, 0

    # Tilted re-inversion via the cos(theta)/cos(psi) ratio; the pass-1 range
    # cancels out of the ratio, so the fix never feeds back through cos**m.
    cdef double sin_b = sin(pitch)
    cdef double cos_b = cos(pitch)
    cdef double cos_g = cos(roll)
    cdef double sin_g = sin(roll)
    cdef double rho2b[MAX_ANCHORS]
    cdef int keep2[MAX_ANCHORS]
    cdef int n_keep2 = 0
    cdef double eta, d2

    for k in range(n_keep):
        i = keep_idx[k]
        eta = ((x1 - anc[i, 0]) * cos_g * sin_b
               + (y1 - anc[i, 1]) * sin_g * sin_b
               + hh[k] * cos_b) / hh[k]
        if eta <= 0.0:
            continue
        d2 = d1[k] * pow(eta, exp_root)
        evals += 1
        r2 = d2 * d2 - hh[k] * hh[k]
        if r2 < 0.0:
            r2 = 0.0
        rho2b[n_keep2] = r2
        keep2[n_keep2] = i
        n_keep2 += 1
    if n_keep2 < 3:
        return 0.0, 0.0, z_r, 0.0, evals, 0

    xy2_np = np.empty((n_keep2, 2))
    cdef double[:, :] xy2 = xy2_np
    for k in range(n_keep2):
        xy2[k, 0] = anc[keep2[k], 0]
        xy2[k, 1] = anc[keep2[k], 1]
    cdef double x2 = 0.0, y2 = 0.0
    evals += 1
    if not _trilaterate(xy2, rho2b, n_keep2, &x2, &y2, &residual):
        return 0.0, 0.0, z_r, 0.0, evals, 0
    return x2, y2, z_r, residual, evals, 1


def pso_solve(anchors, coeffs, powers, double m, lo, hi, u_init, u_steps,
              double inertia, double cognitive, double social):
    cdef double[:, :] anc = np.ascontiguousarray(anchors, dtype=np.float64)
    cdef double[:] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef double[:] pw = np.ascontiguousarray(powers, dtype=np.float64)
    cdef double[:] lo_v = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[:] hi_v = np.ascontiguousarray(hi, dtype=np.float64)
    cdef double[:, :] u0 = np.ascontiguousarray(u_init, dtype=np.float64)
    cdef double[:, :, :] us = np.ascontiguousarray(u_steps, dtype=np.float64)

    cdef int n = anc.shape[0]
    cdef int swarm = u0.shape[0]
    cdef int iterations = us.shape[0] + 1
    if n > MAX_ANCHORS:
        raise ValueError("too many anchors for the compiled kernel")

    pos_np = np.empty((swarm, 3))
    vel_np = np.zeros((swarm, 3))
    pb_np = np.empty((swarm, 3))
    pbc_np = np.empty(swarm)
    cdef double[:, :] pos = pos_np
    cdef double[:, :] vel = vel_np
    cdef double[:, :] pbest_pos = pb_np
    cdef double[:] pbest_cost = pbc_np

    cdef double span[3]
    cdef double vmax[3]
    cdef int k, j, it, i, g
    for k in range(3):
        span[k] = hi_v[k] - lo_v[k]
        vmax[k] = 0.5 * span[k]

    cdef double m_num = m + 1.0
    cdef double m_den = m + 3.0
    cdef double dx, dy, dz, h, d, model, r, total, v, p, gb
    cdef long evals = 0

    with nogil:
        for j in range(swarm):
            for k in range(3):
                pos[j, k] = lo_v[k] + u0[j, k] * span[k]
                pbest_pos[j, k] = pos[j, k]
            total = 0.0
            for i in range(n):
                dx = pos[j, 0] - anc[i, 0]
                dy = pos[j, 1] - anc[i, 1]
                dz = pos[j, 2] - anc[i, 2]
                h = fabs(dz)
                d = sqrt(dx * dx + dy * dy + dz * dz)
                if d < 1e-12:
                    d = 1e-12
                model = cf[i] * _pow_general(h, m_num) / _pow_general(d, m_den)
                r = model - pw[i]
                total = total + r * r
            pbest_cost[j] = total
        evals = swarm
        g = 0
        for j in range(1, swarm):
            if pbest_cost[j] < pbest_cost[g]:
                g = j

        for it in range(1, iterations):
            for j in range(swarm):
                for k in range(3):
                    v = (inertia * vel[j, k]
                         + cognitive * us[it - 1, j, k] * (pbest_pos[j, k] - pos[j, k])
                         + social * us[it - 1, j, 3 + k] * (pbest_pos[g, k] - pos[j, k]))
                    if v > vmax[k]:
                        v = vmax[k]
                    if v < -vmax[k]:
                        v = -vmax[k]
                    vel[j, k] = v
                    p = pos[j, k] + v
                    if p < lo_v[k]:
                        p = lo_v[k]
                    if p > hi_v[k]:
                        p = hi_v[k]
                    pos[j, k] = p
            for j in range(swarm):
                total = 0.0
                for i in range(n):
                    dx = pos[j, 0] - anc[i, 0]
                    dy = pos[j, 1] - anc[i, 1]
                    dz = pos[j, 2] - anc[i, 2]
                    h = fabs(dz)
                    d = sqrt(dx * dx + dy * dy + dz * dz)
                    if d < 1e-12:
                        d = 1e-12
                    model = cf[i] * _pow_general(h, m_num) / _pow_general(d, m_den)
                    r = model - pw[i]
                    total = total + r * r
                if total < pbest_cost[j]:
                    pbest_cost[j] = total
                    for k in range(3):
                        pbest_pos[j, k] = pos[j, k]
            evals += swarm
            g = 0
            for j in range(1, swarm):
                if pbest_cost[j] < pbest_cost[g]:
                    g = j

    return pbest_pos[g, 0], pbest_pos[g, 1], pbest_pos[g, 2], pbest_cost[g], evals
