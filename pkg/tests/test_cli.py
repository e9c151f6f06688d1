import json
import subprocess
import sys

import numpy as np
import pytest

from laplace_learn.cli import main
from laplace_learn.io import read_matrix, write_matrix


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "--topology", "grid", "--n", "16", "--k-over-n", "30", "--seed", "5", "--out", str(out)]) == 0
    return out


def test_generate_outputs(generated):
    lap = read_matrix(generated / "laplacian.csv")
    assert lap.shape == (16, 16)
    assert read_matrix(generated / "data.csv").shape == (480, 16)
    meta = json.loads((generated / "meta.json").read_text())
    assert meta["seed"] == 5 and meta["class"] == "DDGL"


def test_generate_is_reproducible(tmp_path, generated):
    assert main(["generate", "--n", "16", "--k-over-n", "30", "--seed", "5", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "data.csv").read_bytes() == (generated / "data.csv").read_bytes()


def test_estimate_with_mask(tmp_path, generated):
    out = tmp_path / "est"
    rc = main(
        [
            "estimate",
            "--problem", "ddgl",
            "--data", str(generated / "data.csv"),
            "--mask", str(generated / "mask.csv"),
            "--alpha", "0.0",
            "--epsilon", "1e-8",
            "--out", str(out),
        ]
    )
    assert rc == 0
    theta = read_matrix(out / "theta.csv")
    report = json.loads((out / "report.json").read_text())
    assert report["results"][0]["converged"]
    assert max(report["results"][0]["kkt"].values()) <= 1e-6
    assert np.all(theta.sum(axis=1) >= -1e-9)
    assert np.allclose(theta @ read_matrix(out / "c.csv"), np.eye(16), atol=1e-6)


def test_estimate_alpha_grid_selects_by_truth(tmp_path, generated):
    out = tmp_path / "grid"
    rc = main(
        [
            "estimate",
            "--data", str(generated / "data.csv"),
            "--mask", str(generated / "mask.csv"),
            "--alpha-grid",
            "--ground-truth", str(generated / "laplacian.csv"),
            "--out", str(out),
        ]
    )
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["results"]) == 15
    errors = [r["relative_error"] for r in report["results"]]
    assert report["selected"] == int(np.argmin(errors))
    assert len(list(out.glob("theta_alpha*.csv"))) == 15


def test_estimate_cgl(tmp_path):
    gen = tmp_path / "g"
    assert main(["generate", "--n", "9", "--class", "cgl", "--seed", "1", "--out", str(gen)]) == 0
    out = tmp_path / "e"
    rc = main(["estimate", "--problem", "cgl", "--data", str(gen / "data.csv"), "--alpha", "0.01", "--out", str(out)])
    assert rc == 0
    theta = read_matrix(out / "theta.csv")
    assert np.allclose(theta.sum(axis=1), 0.0, atol=1e-10)


def test_estimate_missing_input(capsys, tmp_path):
    assert main(["estimate", "--out", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "ValidationError"


def test_estimate_numerical_failure_exit_code(tmp_path):
    write_matrix(tmp_path / "s.csv", np.array([[1.0, 1.0], [1.0, 1.0]]))
    rc = main(["estimate", "--statistic", str(tmp_path / "s.csv"), "--max-cycles", "50", "--out", str(tmp_path / "o")])
    assert rc in (2, 3)


def test_validate(tmp_path, capsys):
    write_matrix(tmp_path / "t.csv", np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert main(["validate", "--theta", str(tmp_path / "t.csv"), "--class", "cgl"]) == 0
    assert json.loads(capsys.readouterr().out)["class"] == "CGL"
    write_matrix(tmp_path / "u.csv", np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert main(["validate", "--theta", str(tmp_path / "u.csv"), "--class", "ggl"]) == 1


def test_validate_optimality(tmp_path, capsys):
    s = np.array([[1.0, 0.3, 0.1], [0.3, 1.0, 0.3], [0.1, 0.3, 1.0]])
    write_matrix(tmp_path / "s.csv", s)
    write_matrix(tmp_path / "t.csv", np.linalg.inv(s))
    rc = main(["validate", "--theta", str(tmp_path / "t.csv"), "--class", "ggl", "--statistic", str(tmp_path / "s.csv")])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["kkt_ok"]


def test_benchmark(tmp_path, capsys):
    out = tmp_path / "b"
    rc = main(
        [
            "benchmark", "--n", "9", "--k-over-n", "10,30", "--methods", "GGL(A),GGL",
            "--mask-mismatch", "0.25", "--trials", "2", "--seed", "2", "--out", str(out),
        ]
    )
    assert rc == 0
    agg = json.loads((out / "aggregate.json").read_text())
    methods = {c["method"] for c in agg["aggregate"]}
    assert methods == {"GGL(A)", "GGL", "GGL(A25%)"}
    assert (out / "trials.csv").read_text().count("\n") == 1 + 2 * 2 * 3
    assert "k/n=30" in capsys.readouterr().out


def test_benchmark_rejects_zero_trials(tmp_path):
    assert main(["benchmark", "--trials", "0", "--out", str(tmp_path)]) == 1


def test_config_file_and_flag_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[generate]\nn = 9\nseed = 3\nk-over-n = 2\n")
    monkeypatch.delenv("LAPLACE_LEARN_SEED", raising=False)
    assert main(["--config", str(cfg), "generate", "--out", str(tmp_path / "a")]) == 0
    meta = json.loads((tmp_path / "a" / "meta.json").read_text())
    assert (meta["n"], meta["seed"], meta["k"]) == (9, 3, 18)
    monkeypatch.setenv("LAPLACE_LEARN_SEED", "8")
    assert main(["--config", str(cfg), "generate", "--out", str(tmp_path / "b")]) == 0
    assert json.loads((tmp_path / "b" / "meta.json").read_text())["seed"] == 8
    assert main(["--config", str(cfg), "generate", "--seed", "4", "--out", str(tmp_path / "c")]) == 0
    assert json.loads((tmp_path / "c" / "meta.json").read_text())["seed"] == 4


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[generate]\ncolour = red\n")
    assert main(["--config", str(cfg), "generate", "--out", str(tmp_path)]) == 1


def test_bad_arguments_exit_one():
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--alpha", "abc"])
    assert exc.value.code == 1


def test_console_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "laplace_learn.cli", "--backend", "numpy", "generate", "--n", "4", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0, out.stderr


def test_benchmark_fixed_alpha(tmp_path):
    out = tmp_path / "b"
    rc = main(["benchmark", "--n", "9", "--k-over-n", "10", "--trials", "1", "--alpha", "0", "--out", str(out)])
    assert rc == 0
    agg = json.loads((out / "aggregate.json").read_text())
    assert agg["config"]["alpha"] == 0.0
    assert all(t["alpha"] == 0.0 for t in agg["trials"])
