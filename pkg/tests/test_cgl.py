import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_cgl, random_mask, random_statistic
from laplace_learn.cgl import (
    ShiftedState,
    cgl_objective,
    cgl_projection,
    estimate_cgl,
    pseudo_objective,
    uniform_start,
)
from laplace_learn.core import (
    ConnectivityMask,
    DisconnectedGraphWarning,
    LaplacianClass,
    ValidationError,
    kkt_report,
    shifted_objective,
    validate_class,
)
from laplace_learn.ggl import EstimatorConfig

S3 = np.array([[1.0, 0.3, 0.1], [0.3, 1.0, 0.3], [0.1, 0.3, 1.0]])
S3_CGL_OBJECTIVE = 1.437881081846459


def test_small_instance_frozen(backend):
    res = estimate_cgl(S3, "full", 0.0, EstimatorConfig(epsilon=1e-12))
    assert res.objective == pytest.approx(S3_CGL_OBJECTIVE, abs=1e-9)
    assert res.theta.kind is LaplacianClass.CGL


@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.floats(-0.9, 0.9))
def test_two_vertices_closed_form(s11, s22, rho):
    s12 = rho * np.sqrt(s11 * s22)
    s = np.array([[s11, s12], [s12, s22]])
    res = estimate_cgl(s, "full", 0.0, EstimatorConfig(epsilon=1e-12))
    w = 1.0 / (s11 + s22 - 2 * s12)
    assert np.allclose(res.theta.theta, w * np.array([[1, -1], [-1, 1]]), rtol=1e-8)


def test_empty_mask_gives_zero_matrix():
    with pytest.warns(DisconnectedGraphWarning):
        res = estimate_cgl(np.eye(4), ConnectivityMask.empty(4), 0.0)
    assert np.array_equal(res.theta.theta, np.zeros((4, 4)))


def test_components_are_solved_separately(rng):
    a = np.zeros((5, 5), dtype=int)
    a[0, 1] = a[1, 0] = 1
    a[2, 3] = a[3, 2] = a[3, 4] = a[4, 3] = 1
    s = random_statistic(rng, 5)
    with pytest.warns(DisconnectedGraphWarning):
        res = estimate_cgl(s, a, 0.0, EstimatorConfig(epsilon=1e-10))
    t = res.theta.theta
    assert np.all(t[np.ix_([0, 1], [2, 3, 4])] == 0.0)
    sub = estimate_cgl(s[2:, 2:], a[2:, 2:], 0.0, EstimatorConfig(epsilon=1e-10))
    assert np.allclose(t[2:, 2:], sub.theta.theta, atol=1e-8)
    pair = 1.0 / (s[0, 0] + s[1, 1] - 2 * s[0, 1])
    assert t[0, 1] == pytest.approx(-pair, rel=1e-8)
    assert validate_class(t).satisfies("CGL")


@given(st.integers(0, 2**31 - 1), st.integers(3, 8))
def test_pseudo_objective_matches_shifted(seed, n):
    rng = np.random.default_rng(seed)
    lap = random_cgl(rng, n)
    k = random_statistic(rng, n)
    assert pseudo_objective(lap, k) == pytest.approx(shifted_objective(lap, k), rel=1e-9, abs=1e-9)
    assert cgl_objective(lap, k) == pytest.approx(shifted_objective(lap, k), rel=1e-9, abs=1e-9)


def test_pseudo_objective_rejects_disconnected():
    with pytest.raises(ValidationError):
        pseudo_objective(np.zeros((3, 3)), np.eye(3))


@given(st.integers(0, 2**31 - 1), st.integers(3, 8))
def test_optimality_and_invariants(seed, n):
    rng = np.random.default_rng(seed)
    lap = random_cgl(rng, n)
    s = random_statistic(rng, n)
    a = (lap != 0).astype(int) - np.eye(n, dtype=int)
    res = estimate_cgl(s, a, 0.05, EstimatorConfig(epsilon=1e-10))
    t = res.theta.theta
    k = s + 0.05 * (2 * np.eye(n) - 1)
    assert validate_class(t).satisfies("CGL")
    assert np.all(t.sum(axis=1) == pytest.approx(0.0, abs=1e-12))
    assert np.all(t[(a == 0) & ~np.eye(n, dtype=bool)] == 0.0)
    assert kkt_report(t, k, a, "CGL").max_residual <= 1e-6
    # the returned C is the pseudo-inverse of theta
    assert np.allclose(res.c, np.linalg.pinv(t), atol=1e-7)
    assert np.allclose(res.c.sum(axis=1), 0.0, atol=1e-9)


def test_objective_is_shifted_objective(rng):
    s = random_statistic(rng, 6)
    res = estimate_cgl(s, "full", 0.1)
    k = s + 0.1 * (2 * np.eye(6) - 1)
    assert res.objective == pytest.approx(shifted_objective(res.theta.theta, k), rel=1e-10)


def test_refinement_can_be_disabled(rng):
    s = random_statistic(rng, 6)
    a = random_mask(rng, 6, density=0.9)
    res = estimate_cgl(s, a, 0.0, EstimatorConfig(refine=False))
    if res.phase1_status == "ok":
        assert res.refine_sweeps == 0
    assert validate_class(res.theta.theta).satisfies("CGL")


def test_uniform_start_is_optimal_along_its_ray(rng):
    s = random_statistic(rng, 5)
    a = np.ones((5, 5), dtype=int) - np.eye(5, dtype=int)
    start = uniform_start(s, a)
    f = [shifted_objective(t * start, s) for t in (0.99, 1.0, 1.01)]
    assert f[1] <= min(f[0], f[2])


def test_projection_sets_unit_row_sums():
    theta = np.array([[2.0, -0.5, 0.0], [-0.5, 1.0, -0.2], [0.0, -0.2, 3.0]]) + 1 / 3
    out = cgl_projection(ShiftedState(theta, np.linalg.inv(theta)))
    assert out.theta_tilde.sum(axis=1) == pytest.approx([1.0, 1.0, 1.0])
    assert np.allclose(out.c_tilde, np.linalg.inv(out.theta_tilde))


def _tree_weights(s, a):
    # on a tree the pseudo-determinant is n times the product of the edge
    # weights, so each weight decouples to 1 / (s_ii + s_jj - 2 s_ij)
    i, j = np.nonzero(np.triu(a, 1))
    return i, j, 1.0 / (s[i, i] + s[j, j] - 2 * s[i, j])


def test_singular_projection_falls_back_to_uniform_start():
    # the first row update removes vertex 0's only edge, and the projection
    # that follows would make the shifted iterate singular
    s = np.array(
        [
            [0.7454492267809588, 0.6446626079566262, -0.9323306713493145],
            [0.6446626079566262, 1.8569234006950635, -1.6766646009265205],
            [-0.9323306713493145, -1.6766646009265205, 3.0013693807753117],
        ]
    )
    a = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]])
    res = estimate_cgl(s, a, 0.0, EstimatorConfig(epsilon=1e-10))
    i, j, w = _tree_weights(s, a)
    assert res.phase1_status == "not positive definite"
    assert np.allclose(-res.theta.theta[i, j], w, rtol=1e-8)


@given(st.integers(0, 2**31 - 1), st.integers(3, 8))
def test_tree_mask_closed_form(seed, n):
    rng = np.random.default_rng(seed)
    s = random_statistic(rng, n)
    a = np.zeros((n, n), dtype=int)
    for v in range(1, n):
        u = int(rng.integers(0, v))
        a[u, v] = a[v, u] = 1
    res = estimate_cgl(s, a, 0.0, EstimatorConfig(epsilon=1e-12))
    i, j, w = _tree_weights(s, a)
    assert np.allclose(-res.theta.theta[i, j], w, rtol=1e-7)
