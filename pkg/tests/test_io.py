import numpy as np
import pytest

from laplace_learn.core import LaplacianMatrix, ValidationError
from laplace_learn.io import read_edge_list, read_matrix, write_edge_list, write_json, write_matrix


def test_matrix_round_trip_is_exact(tmp_path, rng):
    m = rng.normal(size=(4, 3)) * 10.0 ** rng.integers(-12, 12, size=(4, 3))
    write_matrix(tmp_path / "m.csv", m)
    assert np.array_equal(read_matrix(tmp_path / "m.csv"), m)


def test_ragged_matrix(tmp_path):
    (tmp_path / "m.csv").write_text("1,2\n3\n")
    with pytest.raises(ValidationError):
        read_matrix(tmp_path / "m.csv")


def test_non_numeric_matrix(tmp_path):
    (tmp_path / "m.csv").write_text("1,x\n")
    with pytest.raises(ValidationError, match=":1:"):
        read_matrix(tmp_path / "m.csv")


def test_empty_matrix(tmp_path):
    (tmp_path / "m.csv").write_text("\n")
    with pytest.raises(ValidationError):
        read_matrix(tmp_path / "m.csv")


def test_edge_list_round_trip(tmp_path):
    theta = np.array([[2.0, -0.5, -1.5], [-0.5, 0.5, 0.0], [-1.5, 0.0, 1.5]])
    write_edge_list(tmp_path / "e.csv", LaplacianMatrix(theta))
    assert (tmp_path / "e.csv").read_text().splitlines() == ["1,2,0.5", "1,3,1.5"]
    w = read_edge_list(tmp_path / "e.csv", 3)
    assert np.array_equal(np.diag(w.sum(axis=1)) - w, theta)


def test_edge_list_rejects_self_loop(tmp_path):
    (tmp_path / "e.csv").write_text("2,2,1.0\n")
    with pytest.raises(ValidationError):
        read_edge_list(tmp_path / "e.csv", 3)


def test_json_handles_numpy(tmp_path):
    write_json(tmp_path / "x.json", {"a": np.float64(1.5), "b": np.arange(2), "c": np.int64(3)})
    assert '"a": 1.5' in (tmp_path / "x.json").read_text()
