import json
import subprocess
import sys

import pytest

from robust_sysid.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, main
from robust_sysid.lti import Trajectory, write_trajectory_csv

import numpy as np


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"schema_version": 1, "n": 2, "horizon": 30, "trials": 2, "t_step": 7}))
    return path


@pytest.fixture
def simulated(tmp_path, config):
    traj, truth = tmp_path / "traj.csv", tmp_path / "sys.json"
    assert main(["simulate", "--config", str(config), "--seed", "3", "--out", str(traj),
                 "--system-out", str(truth)]) == EXIT_OK
    return traj, truth


def test_estimate(simulated, tmp_path, capsys):
    traj, truth = simulated
    out = tmp_path / "est.json"
    assert main(["estimate", str(traj), "--truth", str(truth), "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["method"] == "lasso" and doc["converged"] and "d_hat" not in doc
    assert doc["err_fro"] < 1e-6
    assert main(["estimate", str(traj), "--method", "least_squares"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["method"] == "least_squares"


def test_certify_and_bound(simulated, tmp_path, capsys):
    traj, truth = simulated
    assert main(["certify", str(traj), "--methods", "singular_value"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["method"] == "singular_value" and isinstance(doc["support"], list)
    assert main(["bound", str(traj), "--c", "0.5", "--truth", str(truth)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["bound"] == 0.0 and doc["err_fro"] < 1e-6


def test_bound_without_certificate_is_config_error(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "t.csv"
    write_trajectory_csv(Trajectory(rng.standard_normal((2, 6)) * [[1e3], [1.0]], None,
                                    rng.standard_normal((2, 5)) * 100), path)
    assert main(["bound", str(path), "--methods", "singular_value"]) == EXIT_CONFIG


def test_experiment_reproducible(config, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["experiment", "--config", str(config), "--out", str(a), "--plot", str(tmp_path / "a.svg")]) == 0
    assert main(["experiment", "--config", str(config), "--out", str(b), "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.svg").stat().st_size > 0


def test_sweep_and_plot(config, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(config), "--sizes", "0,1,3", "--out", str(out)]) == 0
    assert main(["plot", str(out), str(tmp_path / "s.png")]) == 0
    assert main(["sweep", "--config", str(config), "--sizes", "0,x", "--out", str(out)]) == EXIT_CONFIG


def test_exit_codes(tmp_path, config):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "n": 5, "horizon": 3}))
    assert main(["experiment", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    assert main(["estimate", str(tmp_path / "missing.csv")]) == EXIT_IO
    empty = tmp_path / "empty.csv"
    empty.write_text("trial,t,method,err_fro,objective,converged,seed\n")
    assert main(["plot", str(empty), str(tmp_path / "x.svg")]) == EXIT_IO
    flat = tmp_path / "flat.csv"
    write_trajectory_csv(Trajectory(np.zeros((2, 5))), flat)
    assert main(["estimate", str(flat), "--method", "least_squares"]) == EXIT_SOLVER
    assert main(["certify", str(flat)]) == EXIT_CONFIG  # no d columns and no --support
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "robust_sysid.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "robust-sysid" in proc.stdout
