"""Row/column partition bookkeeping and closed-form inverse maintenance.

A symmetric matrix is split around a pivot index ``u`` into the block with
row and column ``u`` removed, the off-diagonal part of row ``u`` and its
diagonal entry.  Partitions are built from index arrays, never by
multiplying with a permutation matrix.  Indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NumericalError, StructuralError


@dataclass(frozen=True)
class RowPartition:
    """Blocks of a symmetric matrix around pivot ``u``.

    Attributes
    ----------
    u : int
        Pivot index.
    block : ndarray, shape (n-1, n-1)
        The matrix with row and column ``u`` removed.
    vec : ndarray, shape (n-1,)
        Row ``u`` without its diagonal entry.
    scalar : float
        The diagonal entry at ``(u, u)``.
    """

    u: int
    block: np.ndarray
    vec: np.ndarray
    scalar: float

    @property
    def n(self) -> int:
        return self.vec.shape[0] + 1

    @property
    def others(self) -> np.ndarray:
        return np.delete(np.arange(self.n), self.u)


def _check_index(n: int, u: int) -> int:
    if not (0 <= int(u) < n):
        raise IndexError(f"pivot {u} out of range for dimension {n}")
    return int(u)


def partition(m, u: int) -> RowPartition:
    """Split ``m`` around pivot ``u`` (copies, so the partition owns its data)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {m.shape}")
    u = _check_index(m.shape[0], u)
    others = np.delete(np.arange(m.shape[0]), u)
    return RowPartition(u, m[np.ix_(others, others)].copy(), m[others, u].copy(), float(m[u, u]))


def reassemble(p: RowPartition) -> np.ndarray:
    """Inverse of :func:`partition`; reproduces the source entries exactly."""
    n = p.n
    out = np.empty((n, n))
    others = p.others
    out[np.ix_(others, others)] = p.block
    out[others, p.u] = p.vec
    out[p.u, others] = p.vec
    out[p.u, p.u] = p.scalar
    return out


def extract_theta_u_inverse(p: RowPartition) -> np.ndarray:
    """Inverse of the fixed block of theta, from a partition of ``C = theta^{-1}``.

    Uses ``C_u - c_u c_u^T / c_uu``; no matrix is inverted.
    """
    if not p.scalar > 0.0:
        raise NumericalError(f"diagonal entry {p.scalar} of C at pivot {p.u} is not positive")
    return p.block - np.outer(p.vec, p.vec) / p.scalar


def block_inverse(theta_u_inv: np.ndarray, theta_vec: np.ndarray, theta_scalar: float, u: int = 0):
    """Blocks of ``C`` after row ``u`` of theta is replaced.

    Parameters
    ----------
    theta_u_inv : ndarray, shape (n-1, n-1)
        Inverse of the fixed block of theta.
    theta_vec, theta_scalar
        The new off-diagonal row and diagonal entry of theta at the pivot.

    Returns
    -------
    RowPartition
        Partition of the new ``C`` with ``scalar = 1 / schur``,
        ``vec = -theta_u_inv @ theta_vec * scalar`` and
        ``block = theta_u_inv + vec vec^T / scalar``.

    Raises
    ------
    NumericalError
        If the Schur complement ``theta_scalar - theta_vec^T theta_u_inv theta_vec``
        is not positive, i.e. the updated matrix is not positive definite.
    """
    theta_u_inv = np.asarray(theta_u_inv, dtype=float)
    theta_vec = np.asarray(theta_vec, dtype=float)
    v = theta_u_inv @ theta_vec
    schur = float(theta_scalar - theta_vec @ v)
    if not schur > 0.0:
        raise NumericalError(f"Schur complement {schur:.3g} at pivot {u} is not positive")
    cs = 1.0 / schur
    cvec = -v * cs
    block = theta_u_inv + np.outer(cvec, cvec) / cs
    return RowPartition(u, 0.5 * (block + block.T), cvec, cs)


def diagonal_rank_one_update(c, i: int, nu: float) -> np.ndarray:
    """Inverse of ``theta + nu e_i e_i^T`` given ``C = theta^{-1}`` (Sherman-Morrison).

    Returns a new array; ``c`` is not modified.
    """
    c = np.array(c, dtype=float)
    i = _check_index(c.shape[0], i)
    if nu == 0.0:
        return c
    denom = 1.0 + nu * c[i, i]
    if not denom > 0.0:
        raise NumericalError(f"rank-one update at index {i} makes the matrix singular (denominator {denom:.3g})")
    ci = c[:, i].copy()
    c -= (nu / denom) * np.outer(ci, ci)
    return 0.5 * (c + c.T)
