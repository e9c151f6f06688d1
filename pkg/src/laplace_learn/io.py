"""Plain-text matrix and edge-list files.

Matrices are CSV with one row per line and no header.  Edge lists hold
``i,j,weight`` lines with 1-based vertex indices, one line per edge of the
upper triangle.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import LaplacianMatrix, ValidationError


def _fmt(x: float) -> str:
    return repr(float(x))


def write_matrix(path, m) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in m:
            writer.writerow([_fmt(v) for v in row])


def read_matrix(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows:
        raise ValidationError(f"{path}: empty matrix file")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise ValidationError(f"{path}: rows have differing lengths {sorted(width)}")
    return np.array(rows)


def write_edge_list(path, l) -> None:
    t = l.theta if isinstance(l, LaplacianMatrix) else np.asarray(l, dtype=float)
    iu, ju = np.nonzero(np.triu(t < 0, 1))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for i, j in zip(iu, ju):
            writer.writerow([int(i) + 1, int(j) + 1, _fmt(-t[i, j])])


def read_edge_list(path, n: int) -> np.ndarray:
    """Adjacency (weight) matrix from a 1-based edge list."""
    w = np.zeros((n, n))
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                i, j, weight = int(row[0]) - 1, int(row[1]) - 1, float(row[2])
            except (ValueError, IndexError):
                raise ValidationError(f"{path}:{lineno}: expected 'i,j,weight'") from None
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValidationError(f"{path}:{lineno}: invalid vertex pair ({i + 1}, {j + 1})")
            w[i, j] = w[j, i] = weight
    return w


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")
