import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_spd
from laplace_learn.core import NumericalError, StructuralError
from laplace_learn.partition import (
    block_inverse,
    diagonal_rank_one_update,
    extract_theta_u_inverse,
    partition,
    reassemble,
)


def test_block_inverse_hand_example():
    # theta = [[2, 1], [1, 2]] has inverse [[2, -1], [-1, 2]] / 3
    p = block_inverse(np.array([[0.5]]), np.array([1.0]), 2.0, u=1)
    assert p.scalar == pytest.approx(2 / 3)
    assert p.vec == pytest.approx([-1 / 3])
    assert p.block[0, 0] == pytest.approx(2 / 3)


def test_partition_values():
    m = np.arange(9.0).reshape(3, 3)
    m = m + m.T
    p = partition(m, 1)
    assert np.array_equal(p.block, m[np.ix_([0, 2], [0, 2])])
    assert np.array_equal(p.vec, m[[0, 2], 1])
    assert p.scalar == m[1, 1]


@given(st.integers(2, 9), st.data())
def test_reassemble_is_exact(n, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31 - 1)))
    m = random_spd(rng, n)
    m = np.triu(m) + np.triu(m, 1).T
    u = data.draw(st.integers(0, n - 1))
    assert np.array_equal(reassemble(partition(m, u)), m)


@given(st.integers(2, 9), st.data())
def test_extracted_inverse_matches_direct(n, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31 - 1)))
    theta = random_spd(rng, n, cond=50.0)
    u = data.draw(st.integers(0, n - 1))
    got = extract_theta_u_inverse(partition(np.linalg.inv(theta), u))
    want = np.linalg.inv(partition(theta, u).block)
    assert np.allclose(got, want, rtol=1e-9, atol=1e-10)


@given(st.integers(2, 9), st.data())
def test_block_inverse_matches_direct(n, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31 - 1)))
    theta = random_spd(rng, n, cond=50.0)
    u = data.draw(st.integers(0, n - 1))
    pt = partition(theta, u)
    got = reassemble(block_inverse(np.linalg.inv(pt.block), pt.vec, pt.scalar, u))
    assert np.allclose(got, np.linalg.inv(theta), rtol=1e-9, atol=1e-10)


def test_block_inverse_rejects_non_pd():
    with pytest.raises(NumericalError):
        block_inverse(np.eye(1), np.array([2.0]), 1.0)


def test_extract_requires_positive_pivot():
    with pytest.raises(NumericalError):
        extract_theta_u_inverse(partition(np.zeros((2, 2)), 0))


def test_partition_rejects_bad_pivot():
    with pytest.raises(IndexError):
        partition(np.eye(3), 3)
    with pytest.raises(StructuralError):
        partition(np.ones((2, 3)), 0)


@given(st.integers(1, 8), st.floats(-0.5, 5.0), st.data())
def test_rank_one_update_matches_direct(n, nu, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31 - 1)))
    theta = random_spd(rng, n) + np.eye(n)
    i = data.draw(st.integers(0, n - 1))
    c = np.linalg.inv(theta)
    got = diagonal_rank_one_update(c, i, nu)
    theta[i, i] += nu
    assert np.allclose(got, np.linalg.inv(theta), rtol=1e-9, atol=1e-10)


def test_rank_one_update_leaves_input():
    c = np.eye(2)
    diagonal_rank_one_update(c, 0, 1.0)
    assert np.array_equal(c, np.eye(2))


def test_rank_one_update_singular():
    with pytest.raises(NumericalError):
        diagonal_rank_one_update(np.eye(2), 0, -1.0)
