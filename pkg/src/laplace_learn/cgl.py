"""Block-coordinate descent for combinatorial Laplacians.

A combinatorial Laplacian is singular, so the estimator works with the
shifted matrix ``theta + J`` where ``J = 11^T / n``.  The shift keeps the
nonzero spectrum, makes the matrix positive definite on connected graphs
and turns the zero-row-sum constraint into ``(theta + J) 1 = 1``.

Row updates on the shifted matrix are followed by a diagonal projection
that restores unit row sums.  That projection can lower diagonals, so the
row-update phase may lose positive definiteness or stall short of the
optimum; in either case the coordinate refinement over edge weights (which
preserves row sums exactly) finishes the job, restarting from a feasible
uniform-weight Laplacian on the allowed edges if the first phase broke down.

Disconnected masks are solved one connected component at a time.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from . import kernels
from .core import (
    ConvergenceWarning,
    DisconnectedGraphWarning,
    LaplacianClass,
    LaplacianMatrix,
    NumericalError,
    ValidationError,
    validate_class,
)
from .ggl import (
    EstimateResult,
    EstimatorConfig,
    _check_diagonal,
    _inverse,
    _objective,
    _prepare,
    _raise_status,
    _symmetrize,
    _Tracker,
    run_cycles,
    run_refinement,
)


@dataclass
class ShiftedState:
    """Shifted iterate ``theta + J`` and its inverse."""

    theta_tilde: np.ndarray
    c_tilde: np.ndarray
    cycle_count: int = 0
    last_criterion: float = np.inf

    @property
    def n(self) -> int:
        return self.theta_tilde.shape[0]

    @property
    def j(self) -> np.ndarray:
        return np.full((self.n, self.n), 1.0 / self.n)


def cgl_projection(state: ShiftedState) -> ShiftedState:
    """Shift each diagonal entry so that every row of the shifted iterate sums to 1.

    Returns a new state.  Raises :class:`NumericalError` if a rank-one
    update would make the iterate singular.
    """
    theta = np.array(state.theta_tilde, dtype=float, order="C")
    c = np.array(state.c_tilde, dtype=float, order="C")
    status = kernels.get_backend().diag_projection(theta, c, True, 1.0)
    _raise_status(status, "projection")
    _symmetrize(c)
    return ShiftedState(theta, c, state.cycle_count, state.last_criterion)


def mask_laplacian(entries) -> np.ndarray:
    a = np.asarray(entries, dtype=float)
    return np.diag(a.sum(axis=1)) - a


def uniform_start(k, entries) -> np.ndarray:
    """Unit-weight Laplacian of the mask scaled to be optimal along its own ray."""
    la = mask_laplacian(entries)
    n = la.shape[0]
    return (n - 1) / float(np.sum(la * k)) * la


def pseudo_objective(theta, k_mat) -> float:
    """``Tr(theta K) - sum of log nonzero eigenvalues`` for a connected CGL.

    The null direction ``1/sqrt(n)`` is deflated explicitly; the remaining
    ``n - 1`` eigenvalues must all be positive.
    """
    t = theta.theta if isinstance(theta, LaplacianMatrix) else np.asarray(theta, dtype=float)
    k_mat = np.asarray(k_mat, dtype=float)
    n = t.shape[0]
    basis = null_space(np.ones((1, n)))
    ev = np.linalg.eigvalsh(basis.T @ (0.5 * (t + t.T)) @ basis)
    top = max(float(ev[-1]), 0.0) if ev.size else 0.0
    if ev.size == 0 or ev[0] <= 1e-9 * top:
        raise ValidationError("Laplacian has more than one zero eigenvalue; the graph is disconnected")
    return float(np.sum(t * k_mat) - np.sum(np.log(ev)))


def _solve_connected(k, entries, cfg, debug_log):
    n = k.shape[0]
    shift = 1.0 / n
    kt = np.ascontiguousarray(k + shift)
    _check_diagonal(kt, "K + J")
    mask = np.ascontiguousarray(entries, dtype=np.int8)
    iu, ju = np.nonzero(np.triu(mask, 1))
    edges = np.column_stack([iu, ju]).astype(np.int64)
    ct = np.ascontiguousarray(np.diag(np.diag(kt)))
    tt = np.ascontiguousarray(np.diag(1.0 / np.diag(kt)))
    tracker = _Tracker(kt, cfg.debug)
    tracker.start(tt)
    cycles, crit, status, trace = run_cycles(tt, ct, kt, mask, cfg, shift, "cgl", tracker)
    phase1 = "ok"
    if status == kernels.ASCENT:
        # the best feasible iterate was restored; refinement continues from it
        phase1 = kernels.STATUS_NAMES[status]
        ct[...] = _inverse(tt)
        crit = np.inf
    elif status == kernels.OK:
        try:
            ct[...] = _inverse(tt)
        except NumericalError:
            status = kernels.NOT_PD
    if status not in (kernels.OK, kernels.ASCENT):
        phase1 = kernels.STATUS_NAMES[status]
        tt[...] = uniform_start(k, mask) + shift
        ct[...] = _inverse(tt)
        crit = np.inf
    refine = cfg.refine if cfg.refine is not None else True
    sweeps = 0
    if refine or phase1 != "ok":
        tracker.start(tt)
        sweeps, crit, _, rtrace = run_refinement(tt, ct, kt, edges, cfg, shift, 0, tracker)
        trace += rtrace
    debug_log.extend(tracker.violations)
    theta = tt - shift
    np.fill_diagonal(theta, 0.0)
    np.fill_diagonal(theta, -theta.sum(axis=1))
    _symmetrize(theta)
    c = ct - shift
    _symmetrize(c)
    return theta, c, cycles, sweeps, crit, trace, phase1


def estimate_cgl(s, a="full", h=None, cfg: EstimatorConfig | None = None) -> EstimateResult:
    """Estimate a combinatorial Laplacian.

    Parameters are as for :func:`laplace_learn.ggl.estimate_ggl`;
    ``cfg.target_class`` is ignored.  The returned ``c`` is the
    pseudo-inverse of ``theta``.  A disconnected mask triggers a
    :class:`DisconnectedGraphWarning` and a per-component solve; isolated
    vertices get zero rows.
    """
    cfg = cfg or EstimatorConfig()
    t0 = time.perf_counter()
    s, mask, reg, k = _prepare(s, a, h)
    n = s.n
    comps = mask.components()
    if len(comps) > 1:
        warnings.warn(
            f"connectivity mask has {len(comps)} components; solving each separately",
            DisconnectedGraphWarning,
            stacklevel=2,
        )
    theta = np.zeros((n, n))
    c = np.zeros((n, n))
    violations = []
    cycles = sweeps = 0
    crit = 0.0
    trace = []
    status = "ok"
    for idx in comps:
        if idx.size < 2:
            continue
        sub = np.ix_(idx, idx)
        th, cc, cy, sw, cr, tr, st = _solve_connected(k[sub], mask.entries[sub], cfg, violations)
        theta[sub] = th
        c[sub] = cc
        cycles = max(cycles, cy)
        sweeps = max(sweeps, sw)
        crit = max(crit, cr)
        if len(comps) == 1:
            trace = tr
        if st != "ok":
            status = st
    converged = crit <= cfg.epsilon
    if not converged:
        warnings.warn(
            f"no convergence within the cycle limit (criterion {crit:.3g} > {cfg.epsilon:.3g})",
            ConvergenceWarning,
            stacklevel=2,
        )
    verdict = validate_class(theta)
    if not verdict.satisfies(LaplacianClass.CGL):
        raise NumericalError(
            "estimate failed the combinatorial Laplacian check "
            f"(sign {verdict.sign_violation:.3g}, psd {verdict.psd_violation:.3g}, "
            f"row sums {verdict.rowsum_violation:.3g})"
        )
    obj = cgl_objective(theta, k, comps)
    return EstimateResult(
        LaplacianMatrix(theta, LaplacianClass.CGL),
        c,
        obj,
        converged,
        cycles,
        sweeps,
        crit,
        trace,
        violations,
        status,
        time.perf_counter() - t0,
    )


def cgl_objective(theta, k, comps=None) -> float:
    """``Tr(theta K) - logdet(theta + J)`` summed over the given components."""
    theta = np.asarray(theta, dtype=float)
    if comps is None:
        comps = [np.arange(theta.shape[0])]
    total = 0.0
    for idx in comps:
        if idx.size < 2:
            continue
        sub = np.ix_(idx, idx)
        m = idx.size
        t = theta[sub]
        value = _objective(t + 1.0 / m, np.asarray(k)[sub])
        # Tr((theta + J) K) minus Tr(J K) leaves Tr(theta K)
        total += value - float(np.sum(np.asarray(k)[sub])) / m
    return total
