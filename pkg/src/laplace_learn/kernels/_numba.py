"""Loop-level kernels compiled with numba.

Every function mirrors one in ``_numpy.py`` with the same signature and the
same status codes (see ``laplace_learn.kernels``).  Arrays are modified in
place; callers pass C-contiguous float64 matrices and int8 masks.
"""

import numpy as np
from numba import njit

OK = 0
NOT_PD = 1
CYCLING = 2
UNBOUNDED = 3

# Smallest accepted ratio det(new) / det(old) in a projection step; below it
# the shifted iterate is treated as numerically singular.
MIN_DET_RATIO = 1e-8


@njit(cache=True)
def _cholesky(a, low):
    m = a.shape[0]
    for j in range(m):
        s = a[j, j]
        for t in range(j):
            s -= low[j, t] * low[j, t]
        if not s > 0.0:
            return False
        d = np.sqrt(s)
        low[j, j] = d
        for i in range(j + 1, m):
            r = a[i, j]
            for t in range(j):
                r -= low[i, t] * low[j, t]
            low[i, j] = r / d
    return True


@njit(cache=True)
def _cho_solve(low, b):
    m = b.shape[0]
    y = np.empty(m)
    for i in range(m):
        r = b[i]
        for t in range(i):
            r -= low[i, t] * y[t]
        y[i] = r / low[i, i]
    x = np.empty(m)
    for i in range(m - 1, -1, -1):
        r = y[i]
        for t in range(i + 1, m):
            r -= low[t, i] * x[t]
        x[i] = r / low[i, i]
    return x


@njit(cache=True)
def nnqp_solve(q, p, tol, passive0, max_pivots):
    m = p.shape[0]
    x = np.zeros(m)
    if m == 0:
        return x, OK, 0
    passive = passive0.copy()
    pscale = 1.0
    for i in range(m):
        if abs(p[i]) > pscale:
            pscale = abs(p[i])
    thr = tol * pscale
    best = m + 1
    chances = 3
    pivots = 0
    y = np.zeros(m)
    while True:
        f = 0
        for i in range(m):
            if passive[i]:
                f += 1
        idx = np.empty(f, np.int64)
        t = 0
        for i in range(m):
            if passive[i]:
                idx[t] = i
                t += 1
        x[:] = 0.0
        if f > 0:
            sub = np.empty((f, f))
            rhs = np.empty(f)
            for a in range(f):
                rhs[a] = p[idx[a]]
                for b in range(f):
                    sub[a, b] = q[idx[a], idx[b]]
            low = np.zeros((f, f))
            if not _cholesky(sub, low):
                return x, NOT_PD, pivots
            sol = _cho_solve(low, rhs)
            for a in range(f):
                x[idx[a]] = sol[a]
        ninf = 0
        last = -1
        for i in range(m):
            if passive[i]:
                y[i] = 0.0
                if x[i] < -thr:
                    ninf += 1
                    last = i
            else:
                r = -p[i]
                for a in range(f):
                    r += q[i, idx[a]] * x[idx[a]]
                y[i] = r
                if r < -thr:
                    ninf += 1
                    last = i
        if ninf == 0:
            break
        if pivots >= max_pivots:
            return x, CYCLING, pivots
        if ninf < best:
            best = ninf
            chances = 3
            full = True
        elif chances > 0:
            chances -= 1
            full = True
        else:
            full = False
        if full:
            for i in range(m):
                if passive[i] and x[i] < -thr:
                    passive[i] = False
                elif (not passive[i]) and y[i] < -thr:
                    passive[i] = True
        else:
            passive[last] = not passive[last]
        pivots += 1
    for i in range(m):
        if x[i] < 0.0:
            x[i] = 0.0
    return x, OK, pivots


@njit(cache=True)
def row_update(theta, c, k, mask, u, shift, tol):
    n = theta.shape[0]
    m = n - 1
    others = np.empty(m, np.int64)
    t = 0
    for i in range(n):
        if i != u:
            others[t] = i
            t += 1
    cuu = c[u, u]
    kuu = k[u, u]
    if not cuu > 0.0 or not kuu > 0.0:
        return NOT_PD
    # inverse of the fixed block from the current partition of C
    tinv = np.empty((m, m))
    for a in range(m):
        ca = c[others[a], u] / cuu
        for b in range(m):
            tinv[a, b] = c[others[a], others[b]] - ca * c[others[b], u]
    ns = 0
    for a in range(m):
        if mask[u, others[a]] != 0:
            ns += 1
    sel = np.empty(ns, np.int64)
    t = 0
    for a in range(m):
        if mask[u, others[a]] != 0:
            sel[t] = a
            t += 1
    q = np.empty((ns, ns))
    p = np.empty(ns)
    warm = np.empty(ns, np.bool_)
    for s in range(ns):
        a = sel[s]
        rs = 0.0
        if shift != 0.0:
            for b in range(m):
                rs += tinv[a, b]
        p[s] = k[others[a], u] / kuu + shift * rs
        warm[s] = theta[u, others[a]] < shift
        for r in range(ns):
            q[s, r] = tinv[a, sel[r]]
    beta, status, _ = nnqp_solve(q, p, tol, warm, max(ns * ns, 8))
    if status != OK:
        return status
    th = np.full(m, shift)
    for s in range(ns):
        th[sel[s]] = shift - beta[s]
    v = np.zeros(m)
    quad = 0.0
    for a in range(m):
        r = 0.0
        for b in range(m):
            r += tinv[a, b] * th[b]
        v[a] = r
        quad += th[a] * r
    # Schur complement of the updated row is exactly 1/kuu
    cnew = kuu
    for a in range(m):
        theta[u, others[a]] = th[a]
        theta[others[a], u] = th[a]
    theta[u, u] = 1.0 / kuu + quad
    for a in range(m):
        ca = -v[a] * cnew
        c[others[a], u] = ca
        c[u, others[a]] = ca
    for a in range(m):
        va = v[a] * cnew
        for b in range(m):
            c[others[a], others[b]] = tinv[a, b] + va * v[b]
    c[u, u] = cnew
    return OK


@njit(cache=True)
def bcd_cycle(theta, c, k, mask, shift, tol, order):
    for t in range(order.shape[0]):
        status = row_update(theta, c, k, mask, order[t], shift, tol)
        if status != OK:
            return status
    return OK


@njit(cache=True)
def _sm_diag(c, i, nu):
    n = c.shape[0]
    denom = 1.0 + nu * c[i, i]
    if not denom > 0.0:
        return False
    ci = c[:, i].copy()
    f = nu / denom
    for a in range(n):
        fa = f * ci[a]
        for b in range(n):
            c[a, b] -= fa * ci[b]
    return True


@njit(cache=True)
def diag_projection(theta, c, equality, target):
    n = theta.shape[0]
    for i in range(n):
        rs = 0.0
        for j in range(n):
            rs += theta[i, j]
        nu = target - rs
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


@njit(cache=True)
def coordinate_sweep(theta, c, k, edges, shift, vertex_mode):
    n = theta.shape[0]
    viol = 0.0
    cb = np.empty(n)
    for e in range(edges.shape[0]):
        i = edges[e, 0]
        j = edges[e, 1]
        bkb = k[i, i] + k[j, j] - 2.0 * k[i, j]
        bcb = c[i, i] + c[j, j] - 2.0 * c[i, j]
        if not bcb > 0.0:
            return viol, NOT_PD
        w = shift - theta[i, j]
        if w < 0.0:
            w = 0.0
        g = bkb - bcb
        pg = -g if g < 0.0 else min(g, w)
        if pg > viol:
            viol = pg
        if not bkb > 0.0:
            if g < 0.0:
                return viol, UNBOUNDED
            continue
        d = 1.0 / bkb - 1.0 / bcb
        clamped = False
        if d <= -w:
            d = -w
            clamped = True
        if d == 0.0:
            continue
        if clamped:
            theta[i, j] = shift
        else:
            theta[i, j] -= d
        theta[j, i] = theta[i, j]
        theta[i, i] += d
        theta[j, j] += d
        for a in range(n):
            cb[a] = c[a, i] - c[a, j]
        f = d / (1.0 + d * bcb)
        for a in range(n):
            fa = f * cb[a]
            for b in range(n):
                c[a, b] -= fa * cb[b]
    if vertex_mode == 0:
        return viol, OK
    for i in range(n):
        kii = k[i, i]
        cii = c[i, i]
        if not cii > 0.0:
            return viol, NOT_PD
        g = kii - cii
        if vertex_mode == 1:
            v = 0.0
            for j in range(n):
                v += theta[i, j]
            if v < 0.0:
                v = 0.0
            pg = -g if g < 0.0 else min(g, v)
        else:
            v = np.inf
            pg = abs(g)
        if pg > viol:
            viol = pg
        if not kii > 0.0:
            return viol, UNBOUNDED
        d = 1.0 / kii - 1.0 / cii
        clamped = False
        if d <= -v:
            d = -v
            clamped = True
        if d == 0.0:
            continue
        if not _sm_diag(c, i, d):
            return viol, NOT_PD
        if clamped:
            off = 0.0
            for j in range(n):
                if j != i:
                    off += theta[i, j]
            theta[i, i] = -off
        else:
            theta[i, i] += d
    return viol, OK
