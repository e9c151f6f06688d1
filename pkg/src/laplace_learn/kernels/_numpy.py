"""Vectorised numpy kernels; the fallback when numba is unavailable or disabled."""

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

OK = 0
NOT_PD = 1
CYCLING = 2
UNBOUNDED = 3

# Smallest accepted ratio det(new) / det(old) in a projection step; below it
# the shifted iterate is treated as numerically singular.
MIN_DET_RATIO = 1e-8


def nnqp_solve(q, p, tol, passive0, max_pivots):
    m = p.shape[0]
    x = np.zeros(m)
    if m == 0:
        return x, OK, 0
    passive = np.array(passive0, dtype=bool)
    thr = tol * max(1.0, float(np.max(np.abs(p))))
    best = m + 1
    chances = 3
    pivots = 0
    while True:
        x[:] = 0.0
        if passive.any():
            sub = q[np.ix_(passive, passive)]
            try:
                fac = cho_factor(sub, lower=True, check_finite=False)
            except LinAlgError:
                return x, NOT_PD, pivots
            if not np.all(np.diag(fac[0]) > 0):
                return x, NOT_PD, pivots
            x[passive] = cho_solve(fac, p[passive], check_finite=False)
        y = q[:, passive] @ x[passive] - p
        y[passive] = 0.0
        bad = np.where(passive, x < -thr, y < -thr)
        ninf = int(bad.sum())
        if ninf == 0:
            break
        if pivots >= max_pivots:
            return x, CYCLING, pivots
        if ninf < best:
            best = ninf
            chances = 3
            passive ^= bad
        elif chances > 0:
            chances -= 1
            passive ^= bad
        else:
            last = np.flatnonzero(bad)[-1]
            passive[last] = not passive[last]
        pivots += 1
    np.maximum(x, 0.0, out=x)
    return x, OK, pivots


def row_update(theta, c, k, mask, u, shift, tol):
    n = theta.shape[0]
    others = np.delete(np.arange(n), u)
    cuu = c[u, u]
    kuu = k[u, u]
    if not (cuu > 0.0 and kuu > 0.0):
        return NOT_PD
    cu = c[others, u]
    tinv = c[np.ix_(others, others)] - np.outer(cu, cu) / cuu
    sel = np.flatnonzero(mask[u, others])
    q = tinv[np.ix_(sel, sel)]
    p = k[others[sel], u] / kuu
    if shift != 0.0:
        p = p + shift * tinv[sel].sum(axis=1)
    warm = theta[u, others[sel]] < shift
    beta, status, _ = nnqp_solve(q, p, tol, warm, max(sel.size ** 2, 8))
    if status != OK:
        return status
    th = np.full(n - 1, shift)
    th[sel] = shift - beta
    v = tinv @ th
    quad = th @ v
    theta[u, others] = th
    theta[others, u] = th
    theta[u, u] = 1.0 / kuu + quad
    cvec = -v * kuu
    c[np.ix_(others, others)] = tinv + np.outer(v, v) * kuu
    c[others, u] = cvec
    c[u, others] = cvec
    c[u, u] = kuu
    return OK


def bcd_cycle(theta, c, k, mask, shift, tol, order):
    for u in order:
        status = row_update(theta, c, k, mask, int(u), shift, tol)
        if status != OK:
            return status
    return OK


def _sm_diag(c, i, nu):
    denom = 1.0 + nu * c[i, i]
    if not denom > 0.0:
        return False
    ci = c[:, i].copy()
    c -= (nu / denom) * np.outer(ci, ci)
    return True


def diag_projection(theta, c, equality, target):
    for i in range(theta.shape[0]):
        nu = target - theta[i].sum()
        if equality:
            if nu == 0.0:
                continue
        elif not nu > 0.0:
            continue
        if not 1.0 + nu * c[i, i] > MIN_DET_RATIO:
            return NOT_PD
        if not _sm_diag(c, i, nu):
            return NOT_PD
        theta[i, i] += nu
    return OK


def coordinate_sweep(theta, c, k, edges, shift, vertex_mode):
    viol = 0.0
    for i, j in edges:
        bkb = k[i, i] + k[j, j] - 2.0 * k[i, j]
        bcb = c[i, i] + c[j, j] - 2.0 * c[i, j]
        if not bcb > 0.0:
            return viol, NOT_PD
        w = max(shift - theta[i, j], 0.0)
        g = bkb - bcb
        viol = max(viol, -g if g < 0.0 else min(g, w))
        if not bkb > 0.0:
            if g < 0.0:
                return viol, UNBOUNDED
            continue
        d = 1.0 / bkb - 1.0 / bcb
        clamped = d <= -w
        if clamped:
            d = -w
        if d == 0.0:
            continue
        theta[i, j] = shift if clamped else theta[i, j] - d
        theta[j, i] = theta[i, j]
        theta[i, i] += d
        theta[j, j] += d
        cb = c[:, i] - c[:, j]
        c -= (d / (1.0 + d * bcb)) * np.outer(cb, cb)
    if vertex_mode == 0:
        return viol, OK
    for i in range(theta.shape[0]):
        kii = k[i, i]
        cii = c[i, i]
        if not cii > 0.0:
            return viol, NOT_PD
        g = kii - cii
        if vertex_mode == 1:
            v = max(theta[i].sum(), 0.0)
            viol = max(viol, -g if g < 0.0 else min(g, v))
        else:
            v = np.inf
            viol = max(viol, abs(g))
        if not kii > 0.0:
            return viol, UNBOUNDED
        d = 1.0 / kii - 1.0 / cii
        clamped = d <= -v
        if clamped:
            d = -v
        if d == 0.0:
            continue
        if not _sm_diag(c, i, d):
            return viol, NOT_PD
        if clamped:
            theta[i, i] = -(theta[i].sum() - theta[i, i])
        else:
            theta[i, i] += d
    return viol, OK
