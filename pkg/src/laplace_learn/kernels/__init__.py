"""Hot inner loops with two interchangeable implementations.

``numba``
    Explicit loops compiled with ``numba.njit`` (default when numba imports).
``numpy``
    Vectorised numpy/scipy code with Python-level loops over rows and edges.

Select with the ``LAPLACE_LEARN_BACKEND`` environment variable or at runtime
via :func:`use_backend`.  Kernels return integer status codes instead of
raising, so the compiled path never has to unwind exceptions:

==========  ===================================================
``OK``      success
``NOT_PD``  positive definiteness lost (Schur complement, Cholesky
            or Sherman-Morrison denominator not positive, or a
            projection step shrinking the determinant by more than
            ``MIN_DET_RATIO``)
``CYCLING`` pivoting limit reached in the NNQP solver
``UNBOUNDED`` a coordinate direction with nonpositive curvature of the
            trace term, i.e. the objective is unbounded below
``ASCENT``  (driver level only) a projected cycle raised the objective
==========  ===================================================
"""

import contextlib
import logging
import os

from . import _numpy

OK = 0
NOT_PD = 1
CYCLING = 2
UNBOUNDED = 3
ASCENT = 4

STATUS_NAMES = {
    OK: "ok",
    NOT_PD: "not positive definite",
    CYCLING: "pivoting limit",
    UNBOUNDED: "unbounded",
    ASCENT: "objective increase",
}

logger = logging.getLogger(__name__)

try:
    from . import _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

BACKENDS = {"numpy": _numpy}
if _numba is not None:
    BACKENDS["numba"] = _numba


def _initial_backend():
    name = os.environ.get("LAPLACE_LEARN_BACKEND", "").strip().lower()
    if not name:
        return "numba" if _numba is not None else "numpy"
    if name not in BACKENDS:
        logger.warning("backend %r unavailable, falling back to numpy", name)
        return "numpy"
    return name


_current = _initial_backend()


def backend_name():
    return _current


def get_backend():
    """Return the module implementing the active backend."""
    return BACKENDS[_current]


def set_backend(name):
    global _current
    if name not in BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; choose from {sorted(BACKENDS)}")
    _current = name


@contextlib.contextmanager
def use_backend(name):
    previous = _current
    set_backend(name)
    try:
        yield BACKENDS[name]
    finally:
        set_backend(previous)
