import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_mask, random_statistic
from laplace_learn.core import ValidationError, kkt_report, validate_class
from laplace_learn.oracle import MAX_N, oracle_solve

S3 = np.array([[1.0, 0.3, 0.1], [0.3, 1.0, 0.3], [0.1, 0.3, 1.0]])


@pytest.mark.parametrize("problem", ["GGL", "DDGL"])
def test_m_matrix_inverse_is_optimal(problem):
    res = oracle_solve(problem, S3, "full", 0.0)
    assert res.converged
    assert res.objective == pytest.approx(3 + math.log(0.828), abs=1e-10)
    assert np.allclose(res.theta, np.linalg.inv(S3), atol=1e-8)


def test_cgl_frozen_objective():
    assert oracle_solve("CGL", S3, "full", 0.0).objective == pytest.approx(1.437881081846459, abs=1e-9)


def test_cgl_two_vertices():
    s = np.array([[2.0, 0.5], [0.5, 1.0]])
    res = oracle_solve("CGL", s, "full", 0.0)
    w = 1.0 / (2.0 + 1.0 - 1.0)
    assert np.allclose(res.theta, [[w, -w], [-w, w]], atol=1e-9)
    assert res.objective == pytest.approx(1.0 - math.log(2 * w), abs=1e-9)


@given(st.integers(0, 2**31 - 1), st.integers(3, 7), st.sampled_from(["GGL", "DDGL", "CGL"]))
def test_solution_satisfies_kkt(seed, n, problem):
    rng = np.random.default_rng(seed)
    s = random_statistic(rng, n)
    a = random_mask(rng, n)
    res = oracle_solve(problem, s, a, 0.05)
    k = s + 0.05 * (2 * np.eye(n) - 1)
    assert res.converged
    assert validate_class(res.theta).satisfies(problem)
    assert kkt_report(res.theta, k, a, problem).max_residual <= 1e-6


def test_size_limit():
    with pytest.raises(ValidationError):
        oracle_solve("GGL", np.eye(MAX_N + 1))


def test_cgl_isolated_vertices():
    a = np.zeros((3, 3), dtype=int)
    a[0, 1] = a[1, 0] = 1
    res = oracle_solve("CGL", np.eye(3), a, 0.0)
    assert np.all(res.theta[2] == 0.0)
    assert res.theta[0, 1] == pytest.approx(-0.5, abs=1e-9)


def test_converges_when_decrease_is_below_rounding():
    # the last Newton steps change the objective by less than its rounding
    s = np.array(
        [
            [0.24297183886229748, -0.11027050696988039, -0.6395750561594248],
            [-0.11027050696988039, 0.10601547773515962, 0.46803193704356943],
            [-0.6395750561594248, 0.46803193704356943, 2.604114293321716],
        ]
    )
    a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    res = oracle_solve("DDGL", s, a, 0.0, tol=1e-12)
    assert res.converged
    assert kkt_report(res.theta, s, a, "DDGL").max_residual <= 1e-9
