"""Graph Laplacian classes, connectivity masks, statistics and optimality checks."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SYMMETRY_TOL = 1e-12
FEASIBILITY_TOL = 1e-9
KKT_TOL = 1e-6


class LaplaceLearnError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(LaplaceLearnError, ValueError):
    """Inputs violate a documented precondition."""


class StructuralError(ValidationError):
    """A matrix does not have the required shape or symmetry."""


class NumericalError(LaplaceLearnError, ArithmeticError):
    """Loss of positive definiteness, singularity or another numerical breakdown."""


class ConvergenceWarning(UserWarning):
    pass


class DisconnectedGraphWarning(UserWarning):
    pass


class LaplacianClass(str, enum.Enum):
    GGL = "GGL"
    DDGL = "DDGL"
    CGL = "CGL"

    @classmethod
    def parse(cls, value) -> "LaplacianClass":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValidationError(f"unknown Laplacian class {value!r}; expected one of GGL, DDGL, CGL") from None


def _square(a, name) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructuralError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def _symmetry_gap(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - a.T)))


def _require_symmetric(a: np.ndarray, name: str, tol: float = SYMMETRY_TOL) -> None:
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    gap = _symmetry_gap(a)
    if gap > tol * scale:
        raise StructuralError(f"{name} is not symmetric (max |a - a^T| = {gap:.3g})")


@dataclass(frozen=True)
class ConnectivityMask:
    """Binary symmetric matrix of allowed edges with a zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise StructuralError(f"mask must be square, got shape {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise ValidationError("mask entries must be 0 or 1")
        a = a.astype(np.int8)
        if np.any(a != a.T):
            raise StructuralError("mask must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValidationError("mask diagonal must be zero")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def full(cls, n: int) -> "ConnectivityMask":
        """The mask of a complete graph, ``11^T - I``."""
        return cls(np.ones((n, n), dtype=np.int8) - np.eye(n, dtype=np.int8))

    @classmethod
    def empty(cls, n: int) -> "ConnectivityMask":
        return cls(np.zeros((n, n), dtype=np.int8))

    @classmethod
    def from_matrix(cls, theta, tol: float = 0.0) -> "ConnectivityMask":
        """Support of the off-diagonal entries of ``theta`` (entries below ``-tol``)."""
        t = np.asarray(theta, dtype=float)
        a = (t < -tol).astype(np.int8)
        np.fill_diagonal(a, 0)
        a = a | a.T
        return cls(a)

    def edges(self) -> np.ndarray:
        """Upper-triangle edge list as an ``(m, 2)`` integer array (0-based)."""
        i, j = np.nonzero(np.triu(self.entries, 1))
        return np.column_stack([i, j]).astype(np.int64)

    @property
    def edge_count(self) -> int:
        return int(np.triu(self.entries, 1).sum())

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def components(self) -> list:
        """Vertex index arrays of the connected components, ordered by smallest vertex."""
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import connected_components

        if self.n == 0:
            return []
        ncomp, labels = connected_components(csr_matrix(self.entries), directed=False)
        comps = [np.flatnonzero(labels == c) for c in range(ncomp)]
        return sorted(comps, key=lambda idx: idx[0])


@dataclass(frozen=True)
class LaplacianMatrix:
    """A symmetric matrix tagged with its graph Laplacian class.

    The tag is a claim, not a guarantee; use :func:`validate_class` to check it.
    """

    theta: np.ndarray
    kind: LaplacianClass = LaplacianClass.GGL

    def __post_init__(self):
        t = _square(self.theta, "theta").copy()
        t.setflags(write=False)
        object.__setattr__(self, "theta", t)
        object.__setattr__(self, "kind", LaplacianClass.parse(self.kind))

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def edge_weights(self) -> np.ndarray:
        """Adjacency matrix W with ``W_ij = -theta_ij`` off the diagonal."""
        w = -self.theta.copy()
        np.fill_diagonal(w, 0.0)
        return w

    @property
    def degrees(self) -> np.ndarray:
        return self.edge_weights.sum(axis=1)

    @property
    def vertex_weights(self) -> np.ndarray:
        """Self-loop weights, the row sums of theta."""
        return self.theta.sum(axis=1)

    def mask(self, tol: float = 0.0) -> ConnectivityMask:
        return ConnectivityMask.from_matrix(self.theta, tol)


@dataclass(frozen=True)
class StatisticMatrix:
    s: np.ndarray
    sample_count: int | None = None

    def __post_init__(self):
        s = _square(self.s, "statistic")
        _require_symmetric(s, "statistic")
        s = 0.5 * (s + s.T)
        if s.size:
            ev = np.linalg.eigvalsh(s)
            if ev[0] < -1e-9 * max(abs(ev[-1]), 1e-300):
                raise ValidationError(f"statistic is not positive semidefinite (smallest eigenvalue {ev[0]:.3g})")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)
        if self.sample_count is not None and self.sample_count < 1:
            raise ValidationError("sample_count must be positive")

    @property
    def n(self) -> int:
        return self.s.shape[0]


@dataclass(frozen=True)
class RegularizationMatrix:
    h: np.ndarray
    alpha: float | None = None
    form: str = "custom"

    def __post_init__(self):
        h = _square(self.h, "regularization")
        _require_symmetric(h, "regularization")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        if self.alpha is not None and self.alpha < 0:
            raise ValidationError("alpha must be nonnegative")

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @classmethod
    def l1(cls, n: int, alpha: float) -> "RegularizationMatrix":
        """``alpha * (2I - 11^T)``: Tr(theta H) equals alpha times the entrywise l1 norm."""
        return cls(alpha * (2.0 * np.eye(n) - np.ones((n, n))), float(alpha), "l1")

    @classmethod
    def l1_off(cls, n: int, alpha: float) -> "RegularizationMatrix":
        """``alpha * (I - 11^T)``: penalises off-diagonal entries only."""
        return cls(alpha * (np.eye(n) - np.ones((n, n))), float(alpha), "l1-off")

    @classmethod
    def zero(cls, n: int) -> "RegularizationMatrix":
        return cls(np.zeros((n, n)), 0.0, "l1")

    @classmethod
    def standard(cls, form: str, n: int, alpha: float) -> "RegularizationMatrix":
        if form == "l1":
            return cls.l1(n, alpha)
        if form in ("l1-off", "l1_off"):
            return cls.l1_off(n, alpha)
        raise ValidationError(f"unknown regularization form {form!r}")


@dataclass
class ClassVerdict:
    """Result of :func:`validate_class`.

    ``kind`` is the strictest class satisfied (CGL < DDGL < GGL) or ``None``.
    Violations are nonnegative; zero means the condition holds exactly.
    """

    kind: LaplacianClass | None
    sign_violation: float
    psd_violation: float
    dominance_violation: float
    rowsum_violation: float
    tol: float

    def satisfies(self, kind) -> bool:
        kind = LaplacianClass.parse(kind)
        if self.kind is None:
            return False
        order = [LaplacianClass.CGL, LaplacianClass.DDGL, LaplacianClass.GGL]
        return order.index(self.kind) <= order.index(kind)


def _as_array(m) -> np.ndarray:
    if isinstance(m, LaplacianMatrix):
        return m.theta
    if isinstance(m, StatisticMatrix):
        return m.s
    if isinstance(m, RegularizationMatrix):
        return m.h
    if isinstance(m, ConnectivityMask):
        return m.entries
    return np.asarray(m, dtype=float)


def validate_class(m, tol: float = FEASIBILITY_TOL) -> ClassVerdict:
    """Classify a symmetric matrix as CGL, DDGL, GGL or none of them."""
    t = _square(_as_array(m), "theta")
    _require_symmetric(t, "theta")
    n = t.shape[0]
    off = t - np.diag(np.diag(t))
    sign_v = max(0.0, float(off.max())) if n > 1 else 0.0
    if n:
        ev = np.linalg.eigvalsh(0.5 * (t + t.T))
        psd_v = max(0.0, -float(ev[0])) / max(1.0, abs(float(ev[-1])))
        rows = t.sum(axis=1)
        dom_v = max(0.0, -float(rows.min()))
        row_v = float(np.abs(rows).max())
    else:
        psd_v = dom_v = row_v = 0.0
    kind = None
    if sign_v <= tol and psd_v <= tol:
        kind = LaplacianClass.GGL
        if dom_v <= tol:
            kind = LaplacianClass.DDGL
            if row_v <= tol:
                kind = LaplacianClass.CGL
    return ClassVerdict(kind, sign_v, psd_v, dom_v, row_v, tol)


def as_statistic(s) -> StatisticMatrix:
    return s if isinstance(s, StatisticMatrix) else StatisticMatrix(np.asarray(s, dtype=float))


def as_mask(a, n: int | None = None) -> ConnectivityMask:
    if isinstance(a, ConnectivityMask):
        return a
    if isinstance(a, str):
        if a != "full" or n is None:
            raise ValidationError(f"mask must be a matrix or 'full', got {a!r}")
        return ConnectivityMask.full(n)
    if a is None:
        if n is None:
            raise ValidationError("mask dimension unknown")
        return ConnectivityMask.full(n)
    return ConnectivityMask(np.asarray(a))


def as_regularization(h, n: int) -> RegularizationMatrix:
    if isinstance(h, RegularizationMatrix):
        return h
    if h is None:
        return RegularizationMatrix.zero(n)
    if np.isscalar(h):
        return RegularizationMatrix.l1(n, float(h))
    return RegularizationMatrix(np.asarray(h, dtype=float))


def build_k(s, h) -> np.ndarray:
    """Return ``K = S + H``."""
    s = _as_array(s)
    h = _as_array(h)
    if s.shape != h.shape:
        raise StructuralError(f"dimension mismatch: S is {s.shape}, H is {h.shape}")
    k = s + h
    return 0.5 * (k + k.T)


def build_statistic(x, mode: str = "gaussian") -> StatisticMatrix:
    """Form a statistic matrix from data.

    ``gaussian``: ``x`` is k x n (samples in rows); columns are centred and
    the sample covariance ``X^T X / k`` is returned.

    ``binary``: ``x`` is n x d (vertices in rows, d binary features); rows
    are centred and ``X X^T / d + I/3`` is returned.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValidationError("data must be a 2-D array")
    if not np.all(np.isfinite(x)):
        raise ValidationError("data has non-finite entries")
    if mode == "gaussian":
        k = x.shape[0]
        if k == 0:
            raise ValidationError("need at least one sample")
        xc = x - x.mean(axis=0, keepdims=True)
        s = xc.T @ xc / k
    elif mode == "binary":
        d = x.shape[1]
        if d == 0:
            raise ValidationError("need at least one feature")
        k = d
        xc = x - x.mean(axis=1, keepdims=True)
        s = xc @ xc.T / d + np.eye(x.shape[0]) / 3.0
    else:
        raise ValidationError(f"unknown statistic mode {mode!r}")
    return StatisticMatrix(0.5 * (s + s.T), sample_count=k)


def objective(theta, k_mat) -> float:
    """``Tr(theta K) - logdet(theta)``; +inf outside the positive definite cone."""
    t = _as_array(theta)
    try:
        chol = np.linalg.cholesky(t)
    except np.linalg.LinAlgError:
        return np.inf
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return float(np.sum(t * k_mat) - logdet)


def shifted_objective(theta, k_mat) -> float:
    """``Tr(theta (K + J)) - logdet(theta + J)`` for a combinatorial Laplacian."""
    t = _as_array(theta)
    n = t.shape[0]
    j = np.full((n, n), 1.0 / n)
    return objective(t + j, k_mat + j) - float(np.sum(j * (k_mat + j)))


@dataclass
class KktReport:
    """Residuals of the optimality conditions at a candidate solution.

    ``edge_multipliers`` holds the implied multipliers of the sign
    constraints on allowed edges (zero elsewhere); ``row_multipliers`` those
    of the row-sum constraints (zero for GGL).
    """

    max_stationarity_residual: float
    max_complementarity_residual: float
    max_feasibility_residual: float
    edge_multipliers: np.ndarray = field(repr=False)
    row_multipliers: np.ndarray = field(repr=False)

    @property
    def max_residual(self) -> float:
        return max(self.max_stationarity_residual, self.max_complementarity_residual, self.max_feasibility_residual)

    def passed(self, tol: float = KKT_TOL) -> bool:
        return self.max_residual <= tol

    def as_dict(self) -> dict:
        return {
            "max_stationarity_residual": self.max_stationarity_residual,
            "max_complementarity_residual": self.max_complementarity_residual,
            "max_feasibility_residual": self.max_feasibility_residual,
        }


def _inverse_pd(t: np.ndarray, what: str) -> np.ndarray:
    try:
        low = np.linalg.cholesky(t)
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is singular or not positive definite") from None
    li = np.linalg.inv(low)
    c = li.T @ li
    return 0.5 * (c + c.T)


def kkt_report(theta, k_mat, a, problem="GGL") -> KktReport:
    """Evaluate the optimality conditions of the GGL, DDGL or CGL problem.

    Stationarity uses ``G = inverse - K`` (shifted by J for CGL).  Row-sum
    multipliers are read off the diagonal of ``G``; edge multipliers follow
    as ``G_ij + (rho_i + rho_j) / 2``.  Negative multipliers where the sign
    must be nonnegative count as stationarity violations.
    """
    problem = LaplacianClass.parse(problem)
    t = _square(_as_array(theta), "theta")
    k_mat = _square(_as_array(k_mat), "K")
    n = t.shape[0]
    mask = as_mask(a, n).entries.astype(bool)
    if k_mat.shape != t.shape or mask.shape != t.shape:
        raise StructuralError("theta, K and mask must have the same dimension")
    if problem is LaplacianClass.CGL:
        # shifted conditions, one connected component of the mask at a time
        g = np.zeros((n, n))
        for idx in ConnectivityMask(mask.astype(np.int8)).components():
            if idx.size < 2:
                continue
            sub = np.ix_(idx, idx)
            shift = 1.0 / idx.size
            g[sub] = _inverse_pd(t[sub] + shift, "theta + J") - (k_mat[sub] + shift)
    else:
        c = _inverse_pd(t, "theta")
        g = c - k_mat
    gd = np.diag(g)
    rows = t.sum(axis=1)
    off = ~np.eye(n, dtype=bool)
    if problem is LaplacianClass.GGL:
        rho = np.zeros(n)
        stat = float(np.abs(gd).max()) if n else 0.0
        comp_rows = 0.0
    else:
        rho = -gd
        stat = 0.0
        comp_rows = 0.0
        if problem is LaplacianClass.DDGL:
            stat = max(stat, float(np.maximum(-rho, 0.0).max()) if n else 0.0)
            comp_rows = float(np.abs(rho * rows).max()) if n else 0.0
    m1 = g + 0.5 * (rho[:, None] + rho[None, :])
    m1 = np.where(mask, m1, 0.0)
    if mask.any():
        stat = max(stat, float(np.maximum(-m1[mask], 0.0).max()))
        comp = float(np.abs(m1[mask] * t[mask]).max())
    else:
        comp = 0.0
    comp = max(comp, comp_rows)
    feas = 0.0
    if n > 1:
        allowed = mask & off
        excluded = (~mask) & off
        if allowed.any():
            feas = max(feas, float(np.maximum(t[allowed], 0.0).max()))
        if excluded.any():
            feas = max(feas, float(np.abs(t[excluded]).max()))
    if problem is LaplacianClass.DDGL and n:
        feas = max(feas, float(np.maximum(-rows, 0.0).max()))
    if problem is LaplacianClass.CGL and n:
        feas = max(feas, float(np.abs(rows).max()))
    return KktReport(stat, comp, feas, m1, rho)
