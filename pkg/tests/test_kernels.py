import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_cgl, random_mask, random_statistic
from laplace_learn import kernels

BOTH = pytest.mark.skipif(len(kernels.BACKENDS) < 2, reason="numba is not installed")


def _row_state(seed, n):
    rng = np.random.default_rng(seed)
    k = random_statistic(rng, n) + 0.1 * np.eye(n)
    theta = np.diag(1.0 / np.diag(k))
    c = np.diag(np.diag(k))
    mask = random_mask(rng, n, 0.7).astype(np.int8)
    return theta, c, k, mask


@BOTH
@given(st.integers(0, 2**31 - 1), st.integers(2, 9))
def test_bcd_cycle_backends_agree(seed, n):
    out = []
    for name in ("numba", "numpy"):
        theta, c, k, mask = _row_state(seed, n)
        status = kernels.BACKENDS[name].bcd_cycle(theta, c, k, mask, 0.0, 1e-10, np.arange(n, dtype=np.int64))
        out.append((status, theta, c))
    assert out[0][0] == out[1][0] == kernels.OK
    assert np.allclose(out[0][1], out[1][1], atol=1e-12)
    assert np.allclose(out[0][2], out[1][2], atol=1e-12)


@given(st.integers(0, 2**31 - 1), st.integers(2, 9))
def test_row_update_keeps_inverse(backend, seed, n):
    theta, c, k, mask = _row_state(seed, n)
    be = kernels.get_backend()
    for u in range(n):
        assert be.row_update(theta, c, k, mask, u, 0.0, 1e-10) == kernels.OK
        assert np.allclose(c @ theta, np.eye(n), atol=1e-8)
        # the updated row of C matches K exactly on the diagonal
        assert c[u, u] == k[u, u]


@BOTH
@given(st.integers(0, 2**31 - 1), st.integers(2, 8), st.sampled_from([0, 1, 2]))
def test_coordinate_sweep_backends_agree(seed, n, vertex_mode):
    rng = np.random.default_rng(seed)
    k = random_statistic(rng, n) + 0.1 * np.eye(n)
    a = random_mask(rng, n)
    iu, ju = np.nonzero(np.triu(a, 1))
    edges = np.column_stack([iu, ju]).astype(np.int64)
    base = np.diag(1.0 / np.diag(k))
    out = []
    for name in ("numba", "numpy"):
        theta = base.copy()
        c = np.linalg.inv(theta)
        viol, status = kernels.BACKENDS[name].coordinate_sweep(theta, c, k, edges, 0.0, vertex_mode)
        out.append((viol, status, theta))
    assert out[0][1] == out[1][1]
    assert out[0][0] == pytest.approx(out[1][0], rel=1e-10, abs=1e-12)
    assert np.allclose(out[0][2], out[1][2], atol=1e-12)


def test_diag_projection_inverse(backend):
    rng = np.random.default_rng(4)
    theta = random_cgl(rng, 5) + 0.2 + np.diag(rng.uniform(0.5, 1.0, size=5))
    c = np.linalg.inv(theta)
    assert kernels.get_backend().diag_projection(theta, c, True, 1.0) == kernels.OK
    assert np.allclose(theta.sum(axis=1), 1.0)
    assert np.allclose(c, np.linalg.inv(theta), atol=1e-9)


def test_diag_projection_reports_loss_of_definiteness(backend):
    theta = np.array([[2.0, 1.5], [1.5, 2.0]])
    c = np.linalg.inv(theta)
    assert kernels.get_backend().diag_projection(theta, c, True, 1.0) == kernels.NOT_PD


def test_use_backend_restores():
    before = kernels.backend_name()
    with kernels.use_backend("numpy"):
        assert kernels.backend_name() == "numpy"
    assert kernels.backend_name() == before


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


@pytest.mark.parametrize("value,expected", [("numpy", "numpy"), ("bogus", "numpy")])
def test_environment_selects_backend(value, expected):
    code = "from laplace_learn import kernels; print(kernels.backend_name())"
    env = {**os.environ, "LAPLACE_LEARN_BACKEND": value}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
