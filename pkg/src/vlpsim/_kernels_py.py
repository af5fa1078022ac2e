"""Pure-Python/numpy solver kernels.

Fallback twin of the compiled extension in ``_kernels_cy.pyx``. Both
backends expose the same four entry points and follow the same arithmetic
(summation order, integer-exponent powers, branch rules) so a fixed seed
gives matching answers regardless of which backend is active.

Anchor inputs arrive prefiltered (positive powers only); ``coeffs`` holds
the per-anchor constant ``P_t * A_r * (m+1) / (2*pi)``.
"""

from __future__ import annotations

import math

import numpy as np

backend_name = "python"

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _powi(x, n: int):
    """Square-and-multiply x**n for integer n >= 0 (scalar or ndarray).

    Kept as an explicit loop so both backends multiply in the same order.
    """
    result = x * 0 + 1.0 if isinstance(x, np.ndarray) else 1.0
    base = x
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def _pow_general(x, p: float):
    n = int(p)
    if float(n) == p and n >= 0:
        return _powi(x, n)
    return x**p if isinstance(x, np.ndarray) else math.pow(x, p)


def trilaterate(anchors_xy: np.ndarray, rho2: np.ndarray):
    """Difference-of-circles least squares against the last anchor.

    Returns (x, y, residual, ok); ok is 0 for rank-deficient geometry.
    """
    n = anchors_xy.shape[0]
    axr = anchors_xy[n - 1, 0]
    ayr = anchors_xy[n - 1, 1]
    cref = axr * axr + ayr * ayr - rho2[n - 1]
    m00 = m01 = m11 = v0 = v1 = 0.0
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
    if abs(det) <= 1e-12 * max(m00 * m11, 1e-30):
        return 0.0, 0.0, 0.0, 0
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
    return x, y, residual, 1


def _trilaterate_many(anchors_xy: np.ndarray, rho2: np.ndarray):
    """Vectorized trilateration: rho2 has shape (n_anchors, n_candidates)."""
    n = anchors_xy.shape[0]
    axr = anchors_xy[n - 1, 0]
    ayr = anchors_xy[n - 1, 1]
    cref = axr * axr + ayr * ayr - rho2[n - 1]
    m00 = m01 = m11 = 0.0
    v0 = np.zeros(rho2.shape[1])
    v1 = np.zeros(rho2.shape[1])
    rows = []
    for j in range(n - 1):
        ax = anchors_xy[j, 0]
        ay = anchors_xy[j, 1]
        a0 = 2.0 * (ax - axr)
        a1 = 2.0 * (ay - ayr)
        b = (ax * ax + ay * ay - rho2[j]) - cref
        m00 += a0 * a0
        m01 += a0 * a1
        m11 += a1 * a1
        v0 = v0 + a0 * b
        v1 = v1 + a1 * b
        rows.append((a0, a1, b))
    det = m00 * m11 - m01 * m01
    if abs(det) <= 1e-12 * max(m00 * m11, 1e-30):
        return None
    x = (m11 * v0 - m01 * v1) / det
    y = (m00 * v1 - m01 * v0) / det
    return x, y


def _indirect_cost(anchors: np.ndarray, coeffs: np.ndarray, powers: np.ndarray, m: float, h: float):
    """Cost of one candidate height: (cost, x, y). Scalar path."""
    n = anchors.shape[0]
    exp_num = m + 1.0
    exp_root = 1.0 / (m + 3.0)
    d = np.empty(n)
    hh = np.empty(n)
    rho2 = np.empty(n)
    for i in range(n):
        hi = abs(h - anchors[i, 2])
        if hi < 1e-9:
            hi = 1e-9
        di = math.pow(coeffs[i] * _pow_general(hi, exp_num) / powers[i], exp_root)
        r2 = di * di - hi * hi
        if r2 < 0.0:
            r2 = 0.0
        d[i] = di
        hh[i] = hi
        rho2[i] = r2
    x, y, _, ok = trilaterate(anchors[:, :2], rho2)
    if not ok:
        return math.inf, 0.0, 0.0
    cost = 0.0
    for i in range(n):
        dx = x - anchors[i, 0]
        dy = y - anchors[i, 1]
        r = math.sqrt(dx * dx + dy * dy + hh[i] * hh[i]) - d[i]
        cost += r * r
    return cost, x, y


def indirect_h_solve(
    anchors: np.ndarray,
    coeffs: np.ndarray,
    powers: np.ndarray,
    m: float,
    h_lo: float,
    h_hi: float,
    resolution: float,
    fast: int,
):
    """Height-sweep solver. Returns (x, y, z, cost, evals, ok).

    Full sweep evaluates every candidate on a resolution-spaced grid of
    cell centers; the fast path scans a 32-point coarse grid and refines
    the winning cell with golden-section search down to ``resolution``.
    """
    best = (math.inf, 0.0, 0.0, 0.0)  # cost, h, x, y
    evals = 0

    if not fast:
        n_c = max(1, int(round((h_hi - h_lo) / resolution)))
        step = (h_hi - h_lo) / n_c
        heights = h_lo + (np.arange(n_c) + 0.5) * step
        exp_num = m + 1.0
        exp_root = 1.0 / (m + 3.0)
        n = anchors.shape[0]
        hh = np.abs(heights[None, :] - anchors[:, 2][:, None])
        np.maximum(hh, 1e-9, out=hh)
        d = np.empty_like(hh)
        for i in range(n):
            d[i] = (coeffs[i] * _pow_general(hh[i], exp_num) / powers[i]) ** exp_root
        rho2 = np.maximum(d * d - hh * hh, 0.0)
        sol = _trilaterate_many(anchors[:, :2], rho2)
        evals = n_c
        if sol is None:
            return 0.0, 0.0, 0.0, 0.0, evals, 0
        x, y = sol
        cost = np.zeros(n_c)
        for i in range(n):
            dx = x - anchors[i, 0]
            dy = y - anchors[i, 1]
            r = np.sqrt(dx * dx + dy * dy + hh[i] * hh[i]) - d[i]
            cost = cost + r * r
        k = int(np.argmin(cost))
        return x[k], y[k], heights[k], cost[k], evals, 1

    # Coarse bracket, then golden-section refinement inside the best cell's
    # neighborhood. The coarse pass guards against picking a secondary dip.
    n_coarse = 32
    step = (h_hi - h_lo) / n_coarse
    best_k = 0
    for k in range(n_coarse):
        h = h_lo + (k + 0.5) * step
        cost, x, y = _indirect_cost(anchors, coeffs, powers, m, h)
        evals += 1
        if cost < best[0]:
            best = (cost, h, x, y)
            best_k = k
    a = max(h_lo, h_lo + (best_k - 0.5) * step)
    b = min(h_hi, h_lo + (best_k + 1.5) * step)

    c = b - _INVPHI * (b - a)
    d_pt = a + _INVPHI * (b - a)
    fc, xc, yc = _indirect_cost(anchors, coeffs, powers, m, c)
    fd, xd, yd = _indirect_cost(anchors, coeffs, powers, m, d_pt)
    evals += 2
    if fc < best[0]:
        best = (fc, c, xc, yc)
    if fd < best[0]:
        best = (fd, d_pt, xd, yd)
    while (b - a) > resolution:
        if fc < fd:
            b = d_pt
            d_pt = c
            fd = fc
            c = b - _INVPHI * (b - a)
            fc, xc, yc = _indirect_cost(anchors, coeffs, powers, m, c)
            evals += 1
            if fc < best[0]:
                best = (fc, c, xc, yc)
        else:
            a = c
            c = d_pt
            fc = fd
            d_pt = a + _INVPHI * (b - a)
            fd, xd, yd = _indirect_cost(anchors, coeffs, powers, m, d_pt)
            evals += 1
            if fd < best[0]:
                best = (fd, d_pt, xd, yd)
    if not math.isfinite(best[0]):
        return 0.0, 0.0, 0.0, 0.0, evals, 0
    return best[2], best[3], best[1], best[0], evals, 1


def firefly_solve(
    anchors: np.ndarray,
    coeffs: np.ndarray,
    powers: np.ndarray,
    m: float,
    z_r: float,
    roll: float,
    pitch: float,
):
    """Two-pass tilt-aware trilateration at a known height.

    Pass 1 inverts distances under the parallel assumption; pass 2 redoes
    the inversion with the incidence angle implied by the provisional fix
    and the measured roll/pitch. Returns (x, y, z, residual, evals, ok).
    """
    n = anchors.shape[0]
    exp_num = m + 1.0
    exp_root = 1.0 / (m + 3.0)
    evals = 0

    hh = np.empty(n)
    d1 = np.empty(n)
    rho2 = np.empty(n)
    keep = []
    for i in range(n):
        hi = abs(z_r - anchors[i, 2])
        if hi <= 1e-9:
            continue
        di = math.pow(coeffs[i] * _pow_general(hi, exp_num) / powers[i], exp_root)
        evals += 1
        r2 = di * di - hi * hi
        if r2 < 0.0:
            r2 = 0.0
        k = len(keep)
        hh[k] = hi
        d1[k] = di
        rho2[k] = r2
        keep.append(i)
    if len(keep) < 3:
        return 0.0, 0.0, z_r, 0.0, evals, 0
    idx = np.array(keep)
    x1, y1, _, ok = trilaterate(anchors[idx, :2], rho2[: len(keep)])
    evals += 1
    if not ok:
        return 0.0, 0.0, z_r, 0.0, evals, 0

    # Tilted re-inversion, written as the parallel distance scaled by the
    # (m+3)-root of cos(theta)/cos(psi). Both cosines share the pass-1 range
    # denominator, so it cancels: the correction depends on the provisional
    # fix only to first order, never through the m-th power of an angle.
    sin_b = math.sin(pitch)
    cos_b = math.cos(pitch)
    cos_g = math.cos(roll)
    sin_g = math.sin(roll)
    keep2 = []
    rho2b = np.empty(len(keep))
    for k, i in enumerate(keep):
        eta = (
            (x1 - anchors[i, 0]) * cos_g * sin_b
            + (y1 - anchors[i, 1]) * sin_g * sin_b
            + hh[k] * cos_b
        ) / hh[k]
        if eta <= 0.0:
            continue
        d2 = d1[k] * math.pow(eta, exp_root)
        evals += 1
        r2 = d2 * d2 - hh[k] * hh[k]
        if r2 < 0.0:
            r2 = 0.0
        rho2b[len(keep2)] = r2
        keep2.append(i)
    if len(keep2) < 3:
        return 0.0, 0.0, z_r, 0.0, evals, 0
    idx2 = np.array(keep2)
    x2, y2, residual, ok = trilaterate(anchors[idx2, :2], rho2b[: len(keep2)])
    evals += 1
    if not ok:
        return 0.0, 0.0, z_r, 0.0, evals, 0
    return x2, y2, z_r, residual, evals, 1


def pso_solve(
    anchors: np.ndarray,
    coeffs: np.ndarray,
    powers: np.ndarray,
    m: float,
    lo: np.ndarray,
    hi: np.ndarray,
    u_init: np.ndarray,
    u_steps: np.ndarray,
    inertia: float,
    cognitive: float,
    social: float,
):
    """Global-best PSO over (x, y, z) fitting the parallel-assumption model.

    All randomness comes in through ``u_init``/``u_steps`` so the caller
    owns seeding. Returns (x, y, z, cost, evals).
    """
    n = anchors.shape[0]
    swarm, iterations = u_init.shape[0], u_steps.shape[0] + 1
    span = hi - lo
    vmax = 0.5 * span

    pos = lo + u_init * span
    vel = np.zeros_like(pos)

    m_num = m + 1.0
    m_den = m + 3.0

    def costs(p):
        total = np.zeros(swarm)
        for i in range(n):
            dx = p[:, 0] - anchors[i, 0]
            dy = p[:, 1] - anchors[i, 1]
            dz = p[:, 2] - anchors[i, 2]
            h = np.abs(dz)
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            d = np.maximum(d, 1e-12)
            model = coeffs[i] * _pow_general(h, m_num) / _pow_general(d, m_den)
            r = model - powers[i]
            total = total + r * r
        return total

    pbest_pos = pos.copy()
    pbest_cost = costs(pos)
    g = int(np.argmin(pbest_cost))
    evals = swarm

    for it in range(1, iterations):
        r1 = u_steps[it - 1, :, 0:3]
        r2 = u_steps[it - 1, :, 3:6]
        vel = (
            inertia * vel
            + cognitive * r1 * (pbest_pos - pos)
            + social * r2 * (pbest_pos[g] - pos)
        )
        vel = np.minimum(np.maximum(vel, -vmax), vmax)
        pos = pos + vel
        pos = np.minimum(np.maximum(pos, lo), hi)
        c = costs(pos)
        evals += swarm
        improved = c < pbest_cost
        pbest_cost = np.where(improved, c, pbest_cost)
        pbest_pos = np.where(improved[:, None], pos, pbest_pos)
        g = int(np.argmin(pbest_cost))

    return (
        float(pbest_pos[g, 0]),
        float(pbest_pos[g, 1]),
        float(pbest_pos[g, 2]),
        float(pbest_cost[g]),
        evals,
    )
