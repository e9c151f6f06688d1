"""Block-coordinate descent for generalized and diagonally dominant Laplacians.

Each cycle replaces one row/column of the working matrix at a time by the
solution of a small nonnegative quadratic program, keeping its inverse
up to date in closed form.  For the diagonally dominant class every cycle
ends by raising diagonals whose row sums went negative.

When row-sum constraints are active, cycles of row updates followed by
diagonal projection can stall at a non-optimal point.  A refinement phase
therefore follows for DDGL targets: exact coordinate descent over edge and
vertex weights, each step a closed-form line minimisation with a rank-one
inverse update.  It keeps every iterate feasible and never increases the
objective.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import (
    ConvergenceWarning,
    LaplacianClass,
    LaplacianMatrix,
    NumericalError,
    ValidationError,
    as_mask,
    as_regularization,
    as_statistic,
    build_k,
    objective as _objective,
)

logger = logging.getLogger(__name__)

DESCENT_TOL = 1e-10


@dataclass
class EstimatorConfig:
    """Settings shared by the GGL, DDGL and CGL estimators.

    Attributes
    ----------
    target_class : str
        ``"GGL"`` or ``"DDGL"`` for :func:`estimate_ggl`; ignored by the CGL
        estimator.
    epsilon : float
        Stop when the relative Frobenius change of the iterate over one
        cycle (or refinement sweep) is at most this.
    max_cycles : int
        Cap on row/column cycles.
    inverse_refresh_period : int
        Recompute the tracked inverse from scratch every this many cycles;
        0 disables the refresh.
    randomized_order : bool
        Visit rows in a fresh random order each cycle (seeded by
        ``order_seed``) instead of ``0..n-1``.
    refine : bool or None
        Run the coordinate refinement phase.  ``None`` enables it for the
        constrained classes (DDGL, CGL).
    max_refine_sweeps : int
        Cap on refinement sweeps.
    nnqp_tol : float
        Tolerance passed to the per-row quadratic program solver.
    debug : bool
        Evaluate the objective after every update and record any increase
        larger than ``1e-10`` relative in ``EstimateResult.descent_violations``.
    """

    target_class: str = "GGL"
    epsilon: float = 1e-4
    max_cycles: int = 1000
    inverse_refresh_period: int = 50
    randomized_order: bool = False
    order_seed: int | None = None
    refine: bool | None = None
    max_refine_sweeps: int = 20000
    nnqp_tol: float = 1e-10
    debug: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.max_cycles < 1:
            raise ValidationError("max_cycles must be at least 1")
        if self.inverse_refresh_period < 0:
            raise ValidationError("inverse_refresh_period must be nonnegative")
        if self.max_refine_sweeps < 0:
            raise ValidationError("max_refine_sweeps must be nonnegative")
        self.target_class = LaplacianClass.parse(self.target_class).value


@dataclass
class EstimateState:
    """Working iterate and its inverse inside the descent loop."""

    theta_hat: np.ndarray
    c_hat: np.ndarray
    cycle_count: int = 0
    last_criterion: float = np.inf


@dataclass
class DescentViolation:
    phase: str
    index: int
    cycle: int
    before: float
    after: float

    @property
    def relative_increase(self) -> float:
        return (self.after - self.before) / max(1.0, abs(self.before))


@dataclass
class EstimateResult:
    """Output of an estimator; unpacks as ``theta, c = result``."""

    theta: LaplacianMatrix
    c: np.ndarray
    objective: float
    converged: bool
    cycles: int
    refine_sweeps: int
    criterion: float
    objective_trace: list = field(default_factory=list)
    descent_violations: list = field(default_factory=list)
    phase1_status: str = "ok"
    elapsed: float = 0.0

    def __iter__(self):
        yield self.theta
        yield self.c


def criterion(theta, theta_pre) -> float:
    """Relative Frobenius change ``||theta - theta_pre|| / ||theta_pre||``."""
    denom = np.linalg.norm(theta_pre)
    if denom == 0.0:
        return 0.0 if np.linalg.norm(theta) == 0.0 else np.inf
    return float(np.linalg.norm(theta - theta_pre) / denom)


def _inverse(theta) -> np.ndarray:
    try:
        low = np.linalg.cholesky(theta)
    except np.linalg.LinAlgError:
        raise NumericalError("iterate lost positive definiteness") from None
    li = np.linalg.inv(low)
    return np.ascontiguousarray(li.T @ li)


def _symmetrize(a) -> None:
    a[...] = 0.5 * (a + a.T)


def _raise_status(status: int, where: str) -> None:
    if status == kernels.OK:
        return
    if status == kernels.UNBOUNDED:
        raise NumericalError(
            f"objective is unbounded below during {where}; the statistic has zero "
            "variance along an allowed direction (use alpha > 0)"
        )
    raise NumericalError(f"{kernels.STATUS_NAMES[status]} during {where}")


class _Tracker:
    """Records objective increases when debugging."""

    def __init__(self, k, enabled):
        self.k = k
        self.enabled = enabled
        self.violations = []
        self.value = None

    def start(self, theta):
        if self.enabled:
            self.value = _objective(theta, self.k)

    def step(self, theta, phase, index, cycle):
        if not self.enabled:
            return
        new = _objective(theta, self.k)
        if new - self.value > DESCENT_TOL * max(1.0, abs(self.value)):
            self.violations.append(DescentViolation(phase, index, cycle, self.value, new))
        self.value = new


def run_cycles(theta, c, k, mask, cfg, shift=0.0, project=None, tracker=None):
    """Row/column cycles with an optional end-of-cycle projection.

    ``project`` is ``None``, ``"ddgl"`` (raise negative row sums to zero) or
    ``"cgl"`` (set every row sum to 1, for the shifted iterate).  Arrays are
    updated in place.  Returns ``(cycles, criterion, status, trace)``.

    A row update followed by a projection is not guaranteed to descend.
    With a projection, the objective of each feasible end-of-cycle iterate
    is compared with the best one so far; on an increase the best iterate is
    restored and ``kernels.ASCENT`` is returned so the caller can continue
    with the coordinate refinement.
    """
    be = kernels.get_backend()
    n = theta.shape[0]
    rng = np.random.default_rng(cfg.order_seed) if cfg.randomized_order else None
    order = np.arange(n, dtype=np.int64)
    crit = np.inf
    trace = []
    cycles = 0
    best = None
    if project == "ddgl":
        # the diagonal starting point already satisfies the row-sum constraints
        best = (_objective(theta, k), theta.copy(), c.copy())
    for cycle in range(1, cfg.max_cycles + 1):
        cycles = cycle
        pre = theta.copy()
        if rng is not None:
            order = rng.permutation(n).astype(np.int64)
        if tracker is not None and tracker.enabled:
            for u in order:
                status = be.row_update(theta, c, k, mask, int(u), shift, cfg.nnqp_tol)
                if status != kernels.OK:
                    return cycles, crit, status, trace
                tracker.step(theta, "row", int(u), cycle)
        else:
            status = be.bcd_cycle(theta, c, k, mask, shift, cfg.nnqp_tol, order)
            if status != kernels.OK:
                return cycles, crit, status, trace
        if project is not None:
            status = _project(theta, c, project, tracker, cycle)
            if status != kernels.OK:
                return cycles, crit, status, trace
        _symmetrize(c)
        if not np.all(np.isfinite(theta)):
            return cycles, crit, kernels.NOT_PD, trace
        if cfg.inverse_refresh_period and cycle % cfg.inverse_refresh_period == 0:
            try:
                c[...] = _inverse(theta)
            except NumericalError:
                return cycles, crit, kernels.NOT_PD, trace
        crit = criterion(theta, pre)
        value = _objective(theta, k)
        trace.append(value)
        if project is not None:
            if best is not None and value - best[0] > DESCENT_TOL * max(1.0, abs(best[0])):
                theta[...] = best[1]
                c[...] = best[2]
                logger.debug("cycle %d raised the objective; handing over to refinement", cycle)
                return cycles, crit, kernels.ASCENT, trace
            if best is None or value < best[0]:
                best = (value, theta.copy(), c.copy())
        if crit <= cfg.epsilon:
            break
    return cycles, crit, kernels.OK, trace


def _project(theta, c, kind, tracker, cycle):
    be = kernels.get_backend()
    equality = kind == "cgl"
    target = 1.0 if equality else 0.0
    if tracker is None or not tracker.enabled:
        return be.diag_projection(theta, c, equality, target)
    # one index at a time so each projection step is checked separately
    n = theta.shape[0]
    for i in range(n):
        nu = target - theta[i].sum()
        if (equality and nu != 0.0) or (not equality and nu > 0.0):
            if not 1.0 + nu * c[i, i] > be.MIN_DET_RATIO or not be._sm_diag(c, i, nu):
                return kernels.NOT_PD
            theta[i, i] += nu
            tracker.step(theta, "projection", i, cycle)
    return kernels.OK


def run_refinement(theta, c, k, edges, cfg, shift=0.0, vertex_mode=1, tracker=None):
    """Coordinate sweeps over edge (and vertex) weights until the iterate settles.

    Returns ``(sweeps, criterion, projected_gradient, trace)``.
    """
    be = kernels.get_backend()
    crit = np.inf
    viol = np.inf
    trace = []
    sweeps = 0
    for sweep in range(1, cfg.max_refine_sweeps + 1):
        sweeps = sweep
        pre = theta.copy()
        if tracker is not None and tracker.enabled:
            viol = 0.0
            for e in range(edges.shape[0]):
                v, status = be.coordinate_sweep(theta, c, k, edges[e : e + 1], shift, 0)
                _raise_status(status, "refinement")
                viol = max(viol, v)
                tracker.step(theta, "edge", e, sweep)
            if vertex_mode:
                v, status = be.coordinate_sweep(theta, c, k, edges[:0], shift, vertex_mode)
                _raise_status(status, "refinement")
                viol = max(viol, v)
                tracker.step(theta, "vertex", -1, sweep)
        else:
            viol, status = be.coordinate_sweep(theta, c, k, edges, shift, vertex_mode)
            _raise_status(status, "refinement")
        _symmetrize(c)
        if cfg.inverse_refresh_period and sweep % cfg.inverse_refresh_period == 0:
            c[...] = _inverse(theta)
        crit = criterion(theta, pre)
        trace.append(_objective(theta, k))
        if crit <= cfg.epsilon:
            break
    return sweeps, crit, viol, trace


def _prepare(s, a, h):
    s = as_statistic(s)
    n = s.n
    mask = as_mask(a, n)
    reg = as_regularization(h, n)
    if mask.n != n or reg.n != n:
        raise ValidationError(f"dimension mismatch: S is {n}, mask is {mask.n}, H is {reg.n}")
    return s, mask, reg, build_k(s, reg)


def _check_diagonal(k, what="K"):
    d = np.diag(k)
    if not np.all(d > 0):
        bad = int(np.flatnonzero(~(d > 0))[0])
        raise ValidationError(
            f"{what} has a nonpositive diagonal entry at index {bad} ({d[bad]:.3g}); "
            "the statistic has zero variance there, use alpha > 0"
        )


def estimate_ggl(s, a="full", h=None, cfg: EstimatorConfig | None = None) -> EstimateResult:
    """Estimate a GGL or DDGL matrix.

    Parameters
    ----------
    s : StatisticMatrix or array_like
        Data statistic ``S``.
    a : ConnectivityMask, array_like or ``"full"``
        Allowed edges.
    h : RegularizationMatrix, array_like, float or None
        Regularization; a float is the ``l1`` weight ``alpha``.
    cfg : EstimatorConfig
        ``cfg.target_class`` selects GGL or DDGL.

    Returns
    -------
    EstimateResult
        Unpacks as ``(theta, c)``; ``theta`` is tagged with the target class.

    Raises
    ------
    ValidationError
        Mismatched dimensions or a nonpositive diagonal of ``K``.
    NumericalError
        Loss of positive definiteness.
    """
    cfg = cfg or EstimatorConfig()
    target = LaplacianClass.parse(cfg.target_class)
    if target is LaplacianClass.CGL:
        raise ValidationError("use estimate_cgl for combinatorial Laplacians")
    t0 = time.perf_counter()
    s, mask, reg, k = _prepare(s, a, h)
    _check_diagonal(k)
    k = np.ascontiguousarray(k)
    maskarr = np.ascontiguousarray(mask.entries, dtype=np.int8)
    c = np.ascontiguousarray(np.diag(np.diag(k)))
    theta = np.ascontiguousarray(np.diag(1.0 / np.diag(k)))
    tracker = _Tracker(k, cfg.debug)
    tracker.start(theta)
    project = "ddgl" if target is LaplacianClass.DDGL else None
    cycles, crit, status, trace = run_cycles(theta, c, k, maskarr, cfg, 0.0, project, tracker)
    phase1 = "ok"
    if status == kernels.ASCENT:
        phase1 = kernels.STATUS_NAMES[status]
        crit = np.inf
    else:
        _raise_status(status, "row/column updates")
    converged = crit <= cfg.epsilon
    refine = cfg.refine if cfg.refine is not None else target is LaplacianClass.DDGL
    refine = refine or phase1 != "ok"
    sweeps = 0
    if refine:
        vertex_mode = 1 if target is LaplacianClass.DDGL else 2
        sweeps, crit, _, rtrace = run_refinement(theta, c, k, mask.edges(), cfg, 0.0, vertex_mode, tracker)
        trace += rtrace
        converged = crit <= cfg.epsilon
    if not converged:
        warnings.warn(
            f"no convergence within the cycle limit (criterion {crit:.3g} > {cfg.epsilon:.3g})",
            ConvergenceWarning,
            stacklevel=2,
        )
    _symmetrize(theta)
    _symmetrize(c)
    obj = _objective(theta, k)
    return EstimateResult(
        LaplacianMatrix(theta, target),
        c,
        obj,
        converged,
        cycles,
        sweeps,
        crit,
        trace,
        tracker.violations,
        phase1,
        time.perf_counter() - t0,
    )


def ddgl_projection(state: EstimateState) -> EstimateState:
    """Raise each diagonal entry whose row sum is negative until the row sum is zero.

    The inverse is updated by a Sherman-Morrison step per changed index.
    Returns a new state; the input is not modified.
    """
    theta = np.array(state.theta_hat, dtype=float, order="C")
    c = np.array(state.c_hat, dtype=float, order="C")
    status = kernels.get_backend().diag_projection(theta, c, False, 0.0)
    _raise_status(status, "projection")
    _symmetrize(c)
    return EstimateState(theta, c, state.cycle_count, state.last_criterion)
