"""Slow but independent solver for small instances, used to check the estimators.

The matrix is parametrised so that every constraint becomes a simple bound:

* GGL: nonnegative edge weights ``w`` and free diagonal entries,
  ``theta = diag(d) - sum_e w_e (e_i e_j^T + e_j e_i^T)``;
* DDGL: nonnegative edge weights and nonnegative vertex weights,
  ``theta = sum_e w_e b_e b_e^T + diag(v)`` with ``b_e = e_i - e_j``;
* CGL: nonnegative edge weights only, ``theta = sum_e w_e b_e b_e^T``,
  with the objective evaluated on ``theta + J``.

The Euclidean projection onto these sets is entrywise clipping.  Steps are
projected (two-metric Newton, see :func:`_solve`) and backtrack from unit
length with factor 0.5 and Armijo constant 1e-4; points outside the
positive definite cone count as infinitely bad, so every accepted iterate is
strictly feasible.  The Hessian of ``-logdet`` is formed densely, which is
affordable at the supported sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import LaplacianClass, ValidationError, as_mask, as_regularization, as_statistic, build_k

MAX_N = 10
ARMIJO = 1e-4
BACKTRACK = 0.5
FLAT = 64 * np.finfo(float).eps


@dataclass
class OracleResult:
    theta: np.ndarray
    objective: float
    iterations: int
    converged: bool


class _Model:
    """Objective over the bound-constrained parameters ``x``.

    ``theta(x) = sum_a x_a E_a`` with a fixed symmetric basis ``E``; for
    CGL the objective is evaluated at ``theta(x) + J`` against ``K + J``.
    """

    def __init__(self, problem, k, edges):
        self.problem = problem
        n = k.shape[0]
        self.n = n
        self.k = k
        self.shift = 1.0 / n if problem is LaplacianClass.CGL else 0.0
        self.kt = k + self.shift
        basis = []
        for i, j in edges:
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = -1.0
            if problem is not LaplacianClass.GGL:
                e[i, i] = e[j, j] = 1.0
            basis.append(e)
        if problem is not LaplacianClass.CGL:
            for i in range(n):
                e = np.zeros((n, n))
                e[i, i] = 1.0
                basis.append(e)
        self.basis = np.array(basis).reshape(-1, n, n)
        self.m = len(edges)
        self.lower = np.zeros(self.basis.shape[0])
        if problem is LaplacianClass.GGL:
            self.lower[self.m :] = -np.inf

    def matrix(self, x):
        return np.tensordot(x, self.basis, axes=1) if x.size else np.zeros((self.n, self.n))

    def evaluate(self, x, order=1):
        """Objective, and gradient (order >= 1) and Hessian (order 2); inf if not PD."""
        t = self.matrix(x) + self.shift
        try:
            fac = cho_factor(t, lower=True, check_finite=False)
        except LinAlgError:
            return np.inf, None, None
        d = np.diag(fac[0])
        if not np.all(d > 0):
            return np.inf, None, None
        f = float(np.sum(t * self.kt) - 2.0 * np.sum(np.log(d)))
        if order == 0:
            return f, None, None
        c = cho_solve(fac, np.eye(self.n), check_finite=False)
        grad = np.einsum("aij,ij->a", self.basis, self.kt - c)
        if order == 1:
            return f, grad, None
        ce = np.einsum("ij,ajk->aik", c, self.basis)
        hess = np.einsum("aij,bji->ab", ce, ce)
        return f, grad, hess

    def start(self):
        if self.problem is LaplacianClass.CGL:
            la = self.matrix(np.ones(self.m))
            return np.full(self.m, (self.n - 1) / float(np.sum(la * self.k)))
        return np.concatenate([np.zeros(self.m), 1.0 / np.diag(self.k)])


def _mapping(x, g, lower):
    return float(np.max(np.abs(x - np.maximum(x - g, lower)), initial=0.0))


def _solve(model, tol, max_iter):
    """Two-metric projected Newton iteration for simple bounds.

    Variables at (or within the current mapping size of) their bound with a
    positive gradient are moved by a plain gradient step; the rest take a
    Newton step on their block of the Hessian.  The trial point is projected
    onto the bounds and the step length backtracks from 1.  Near the optimum
    the Armijo decrease drops below the rounding level of the objective; a
    step whose objective change is within that level is then accepted when it
    shrinks the gradient mapping.
    """
    x = model.start()
    f, g, hess = model.evaluate(x, 2)
    if not np.isfinite(f):
        raise ValidationError("oracle start point is not positive definite")
    for it in range(max_iter):
        mapping = _mapping(x, g, model.lower)
        if mapping <= tol:
            return x, f, it, True
        near = (x - model.lower <= min(mapping, 1e-3)) & (g > 0)
        free = ~near
        direction = -g.copy()
        if free.any():
            try:
                fac = cho_factor(hess[np.ix_(free, free)], lower=True, check_finite=False)
                direction[free] = -cho_solve(fac, g[free], check_finite=False)
            except LinAlgError:
                pass
        step = 1.0
        while True:
            x_new = np.maximum(x + step * direction, model.lower)
            f_new, _, _ = model.evaluate(x_new, 0)
            decrease = float(g @ (x_new - x))
            if decrease < 0 and f_new <= f + ARMIJO * decrease:
                break
            if decrease < 0 and abs(f_new - f) <= FLAT * max(1.0, abs(f)):
                _, g_new, _ = model.evaluate(x_new, 1)
                if g_new is not None and _mapping(x_new, g_new, model.lower) < mapping:
                    break
            step *= BACKTRACK
            if step < 1e-20:
                if np.array_equal(direction, -g):
                    return x, f, it, False
                direction = -g.copy()
                step = 1.0
        x = x_new
        f, g, hess = model.evaluate(x, 2)
    return x, f, max_iter, False


def oracle_solve(problem, s, a="full", h=None, tol: float = 1e-10, max_iter: int = 1_000_000) -> OracleResult:
    """Solve a GGL, DDGL or CGL problem by projected Newton descent.

    Parameters
    ----------
    problem : {"GGL", "DDGL", "CGL"}
    s, a, h
        Statistic, mask and regularization as accepted by the estimators.
    tol : float
        Stop when the max-norm of the gradient mapping is at most ``tol``.

    Returns
    -------
    OracleResult
        For CGL the objective is ``Tr(theta K) - logdet(theta + J)``, summed
        over the connected components of the mask.
    """
    problem = LaplacianClass.parse(problem)
    s = as_statistic(s)
    n = s.n
    if n > MAX_N:
        raise ValidationError(f"the oracle is limited to n <= {MAX_N}, got {n}")
    mask = as_mask(a, n)
    k = build_k(s, as_regularization(h, n))
    if problem is not LaplacianClass.CGL:
        if not np.all(np.diag(k) > 0):
            raise ValidationError("K must have a positive diagonal")
        model = _Model(problem, k, mask.edges())
        x, f, it, ok = _solve(model, tol, max_iter)
        return OracleResult(model.matrix(x), f, it, ok)
    theta = np.zeros((n, n))
    total, iters, conv = 0.0, 0, True
    for idx in mask.components():
        if idx.size < 2:
            continue
        sub = np.ix_(idx, idx)
        ks = k[sub]
        model = _Model(problem, ks, as_mask(mask.entries[sub]).edges())
        x, f, it, ok = _solve(model, tol, max_iter)
        theta[sub] = model.matrix(x)
        # drop Tr(J (K + J)), which is constant on the feasible set
        total += f - float(np.sum(ks)) / idx.size - 1.0
        iters += it
        conv = conv and ok
    return OracleResult(theta, total, iters, conv)
