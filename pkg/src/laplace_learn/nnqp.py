"""Nonnegative quadratic programs: minimise ``0.5 b^T Q b - b^T p`` subject to ``b >= 0``.

Solved by block principal pivoting: every infeasible index swaps between
the passive (free) and active (zero) sets at once; after three exchanges
that fail to shrink the infeasible set the solver switches to swapping only
the largest infeasible index, which cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import NumericalError, StructuralError, _require_symmetric

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class NnqpProblem:
    """Problem data.

    ``active_set_hint`` lists indices expected to be strictly positive at
    the optimum; it only affects the starting partition.
    """

    q: np.ndarray
    p: np.ndarray
    active_set_hint: tuple | None = None

    def __post_init__(self):
        q = np.ascontiguousarray(self.q, dtype=float)
        p = np.ascontiguousarray(self.p, dtype=float).reshape(-1)
        if q.shape != (p.size, p.size):
            raise StructuralError(f"Q has shape {q.shape} but p has length {p.size}")
        if q.size:
            _require_symmetric(q, "Q")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def m(self) -> int:
        return self.p.size

    def objective(self, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        return float(0.5 * beta @ self.q @ beta - beta @ self.p)


class NnqpCyclingError(NumericalError):
    pass


def solve_nnqp(prob: NnqpProblem, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Return the unique minimiser ``beta >= 0``.

    Raises
    ------
    NumericalError
        If ``Q`` restricted to some passive set is not positive definite.
    NnqpCyclingError
        If the pivot limit ``max(m^2, 8)`` is reached.
    """
    m = prob.m
    passive = np.zeros(m, dtype=np.bool_)
    if prob.active_set_hint is not None:
        passive[list(prob.active_set_hint)] = True
    beta, status, _ = kernels.get_backend().nnqp_solve(prob.q, prob.p, float(tol), passive, max(m * m, 8))
    if status == kernels.NOT_PD:
        raise NumericalError("Q is not positive definite")
    if status == kernels.CYCLING:
        raise NnqpCyclingError(f"pivoting did not terminate within {max(m * m, 8)} pivots")
    return beta


def kkt_residual(prob: NnqpProblem, beta) -> float:
    """Largest violation of ``beta >= 0``, ``Q beta - p >= 0`` and complementarity."""
    beta = np.asarray(beta, dtype=float)
    if beta.size == 0:
        return 0.0
    r = prob.q @ beta - prob.p
    return float(max(np.maximum(-beta, 0).max(), np.maximum(-r, 0).max(), np.abs(beta * r).max()))
