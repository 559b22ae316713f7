import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from cdfchaos.cli import main


def _csv(path):
    return list(csv.reader(open(path)))


def test_simulate_positions(tmp_path):
    out = tmp_path / "pos.csv"
    assert main(["simulate", "--n", "4", "--dt", "0.01", "--t-end", "0.05", "--seed", "3", "--out", str(out)]) == 0
    rows = _csv(out)
    assert rows[0] == ["time", "particle_index", "position"]
    assert len(rows) == 5 and float(rows[1][0]) == pytest.approx(0.05)


def test_simulate_summary_and_replications(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", "--n", "5", "--dt", "0.01", "--t-end", "0.1", "--every", "5", "--summary",
                 "--out", str(out)]) == 0
    rows = _csv(out)
    assert rows[0] == ["time", "mean", "var", "min", "max"] and len(rows) == 4
    out2 = tmp_path / "r.csv"
    assert main(["simulate", "--n", "3", "--replications", "2", "--t-end", "0.01", "--dt", "0.01",
                 "--out", str(out2)]) == 0
    rows = _csv(out2)
    assert rows[0][0] == "replication" and len(rows) == 7


def test_simulate_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        main(["simulate", "--n", "6", "--dt", "0.01", "--t-end", "0.2", "--seed", "5", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_solve_pde_and_cole_hopf(tmp_path):
    p1, p2 = tmp_path / "pde.csv", tmp_path / "ch.csv"
    assert main(["solve-pde", "--h", "0.05", "--t-end", "0.5", "--x-min", "-14", "--x-max", "14", "--out", str(p1)]) == 0
    assert main(["cole-hopf", "--t", "0.5", "--x-grid=-14:14:0.05", "--out", str(p2)]) == 0
    f1 = np.array([float(r[1]) for r in _csv(p1)[1:]])
    f2 = np.array([float(r[1]) for r in _csv(p2)[1:]])
    assert f1.shape == f2.shape and np.max(np.abs(f1 - f2)) < 1e-3


def test_stationary_and_warning(tmp_path, capsys):
    out = tmp_path / "st.csv"
    assert main(["stationary", "--flux", "burgers", "--x-grid=-5:5:0.5", "--out", str(out)]) == 0
    rows = _csv(out)
    assert rows[0] == ["x", "F", "p"] and len(rows) == 22
    assert float(rows[11][1]) == pytest.approx(0.5, abs=1e-12)
    assert main(["stationary", "--flux", "poly:0,0,-1,1", "--x-grid=-5:5:0.5", "--out", str(out)]) == 0
    assert "no spectral-gap guarantee" in capsys.readouterr().err


def test_sample_invariant(tmp_path):
    out = tmp_path / "inv.csv"
    assert main(["sample-invariant", "--n", "5", "--count", "20", "--seed", "7", "--out", str(out)]) == 0
    x = np.loadtxt(out, delimiter=",")
    assert x.shape == (20, 5) and np.all(np.diff(x, axis=1) >= 0)
    np.testing.assert_allclose(x.sum(axis=1), 0.0, atol=1e-12)


def test_spectral_commands(tmp_path):
    out = tmp_path / "sp.csv"
    assert main(["spectral", "sweep", "--n-max", "20", "--out", str(out)]) == 0
    rows = _csv(out)
    assert rows[0] == ["n", "lambda_tilde", "bound_ok"] and len(rows) == 20
    assert main(["spectral", "identities", "--n", "12", "--out", str(out)]) == 0
    assert all(r[1] == "1" for r in _csv(out)[1:])


def test_experiment_command(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("n_list = [4]\nreplications = 6\nchunk = 2\ndt = 0.01\nt_end = 0.1\n")
    assert main(["experiment", "mean-conservation", "--config", str(cfg), "--out", str(tmp_path),
                 "--threads", "0", "--seed", "4"]) == 0
    body = (tmp_path / "mean-conservation.csv").read_text()
    meta = json.loads((tmp_path / "mean-conservation.json").read_text())
    assert body.startswith("experiment,params,statistic,value,stderr")
    assert meta["seed"] == 4 and meta["config"]["threads"] >= 1


def test_errors_exit_2(tmp_path, capsys):
    assert main(["simulate", "--init", "cauchy:0,1", "--out", str(tmp_path / "x.csv")]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["sample-invariant", "--flux", "poly:0,0,1", "--n", "3", "--out", str(tmp_path / "y.csv")]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cdfchaos", "spectral", "--n-max", "3"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert res.stdout.splitlines()[0] == "n,lambda_tilde,bound_ok"
