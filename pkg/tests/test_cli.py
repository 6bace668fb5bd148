import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml

from novelctl.cli import main
from novelctl.io import read_matrix_csv, write_matrix_csv
from novelctl.netgen import read_records_csv, records_to_csv
from novelctl.signals import Signal, read_signal_csv, write_signal_csv

from conftest import SQ3


def write_cfg(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


@pytest.fixture
def scalar_cfg(tmp_path):
    v = Signal.from_function(lambda t: SQ3 / 2 * t, 2.0, 1000)
    write_signal_csv(tmp_path / "v.csv", v)
    return write_cfg(tmp_path / "scalar.yaml", {
        "system": {"A": [[0.0]], "B": [[1.0]]}, "T": 2.0,
        "prior": {"file": "v.csv"}, "endpoints": {"x0": [1.0], "xT": [1.0]},
        "out": "out"})


def test_solve_scalar(scalar_cfg, tmp_path, capsys):
    assert main(["solve", "--config", scalar_cfg]) == 0
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    for key in ("J", "J1", "mu", "es", "er", "T", "margins", "endpoint_resid",
                "energy_resid", "feasible"):
        assert key in rep
    assert rep["J"] == pytest.approx(0.5, abs=1e-6)
    assert rep["mu"] == pytest.approx(0.25, abs=1e-6)
    assert rep["feasible"] is True
    u = read_signal_csv(tmp_path / "out" / "solution.csv")
    np.testing.assert_allclose(u.samples[0], SQ3 * (u.t - 1), atol=1e-6)
    assert "J = 0.5" in capsys.readouterr().out


def test_solve_out_flag_and_determinism(scalar_cfg, tmp_path):
    assert main(["solve", "--config", scalar_cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["solve", "--config", scalar_cfg, "--out", str(tmp_path / "b")]) == 0
    for name in ("solution.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solve_saturating_prior_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "sat.yaml", {
        "system": {"A": [[0.0]], "B": [[1.0]]}, "T": 2.0,
        "prior": {"constant": [1.0]}, "endpoints": {"x0": [1.0], "xT": [1.0]}})
    assert main(["solve", "--config", cfg]) == 2
    out = capsys.readouterr()
    margins = json.loads(out.out.strip().splitlines()[-1])
    assert abs(margins["T_minus_es"]) < 1e-12
    assert "infeasible" in out.err
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["feasible"] is False and rep["J"] is None


def test_malformed_matrix_exits_1(tmp_path, capsys):
    (tmp_path / "A.csv").write_text("1,2\n3\n")
    cfg = write_cfg(tmp_path / "bad.yaml", {
        "system": {"A": "A.csv", "B": [[1.0], [0.0]]}, "T": 1.0,
        "prior": {"constant": [1.0]}, "endpoints": {"x0": [1, 0], "xT": [0, 1]}})
    assert main(["solve", "--config", cfg]) == 1
    assert "error" in capsys.readouterr().err


def test_missing_files_exit_1(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.yaml")]) == 1
    cfg = write_cfg(tmp_path / "c.yaml", {
        "system": {"A": [[0.0]], "B": [[1.0]]}, "T": 2.0,
        "prior": {"file": "missing.csv"}, "endpoints": {"x0": [1.0], "xT": [1.0]}})
    assert main(["solve", "--config", cfg]) == 1


@pytest.mark.parametrize("bad", [
    {"T": 2.0, "prior": {"constant": [1.0]}, "endpoints": {"x0": [1.0], "xT": [1.0]}},
    {"system": {"A": [[0.0]], "B": [[1.0]]}, "network": {"n": 5}, "T": 2.0,
     "prior": {"constant": [1.0]}, "endpoints": {"x0": [1.0], "xT": [1.0]}},
    {"system": {"A": [[0.0]], "B": [[1.0]]}, "T": 2.0, "prior": {"constant": [1.0]},
     "endpoints": {"x0": [1.0], "xT": [1.0], "gamma": 0.5}},
    {"system": {"A": [[0.0]], "B": [[1.0]]}, "T": 2.0, "prior": {"constant": [1.0, 0.0]},
     "endpoints": {"x0": [1.0], "xT": [1.0]}},
    {"system": {"A": [[0.0, 1.0]], "B": [[1.0]]}, "T": 2.0, "prior": {"constant": [1.0]},
     "endpoints": {"x0": [1.0], "xT": [1.0]}},
])
def test_config_errors_exit_1(tmp_path, bad):
    assert main(["solve", "--config", write_cfg(tmp_path / "c.yaml", bad)]) == 1


def test_usage_error_exit_1(capsys):
    assert main(["solve"]) == 1
    assert main(["frobnicate"]) == 1


def test_min_energy(tmp_path):
    cfg = write_cfg(tmp_path / "me.yaml", {
        "system": {"A": [[0.0]], "B": [[1.0]]}, "T": 2.0, "grid": 100,
        "endpoints": {"x0": [1.0], "xT": [0.0]}})
    assert main(["min-energy", "--config", cfg]) == 0
    u = read_signal_csv(tmp_path / "out" / "min_energy.csv")
    np.testing.assert_allclose(u.samples, -0.5, atol=1e-14)
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["avg_energy"] == pytest.approx(0.25, abs=1e-14)
    assert rep["er"] == pytest.approx(0.5, abs=1e-14)


def test_gramian_double_integrator_free(tmp_path):
    cfg = write_cfg(tmp_path / "g.yaml", {
        "system": {"A": [[0, 0], [0, 0]], "B": [[1, 0], [0, 1]]}, "T": 2.0,
        "s": [1.0, 0.0]})
    assert main(["gramian", "--config", cfg]) == 0
    W = read_matrix_csv(tmp_path / "out" / "gramian.csv")
    np.testing.assert_allclose(W, 2 * np.eye(2), atol=1e-14)
    rep = json.loads((tmp_path / "out" / "gramian.json").read_text())
    assert rep["es"] == pytest.approx(0.5, abs=1e-14)
    assert rep["rcond"] == pytest.approx(1.0)


def test_gramian_uncontrollable_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "g.yaml", {
        "system": {"A": [[0, 0], [0, 0]], "B": [[1, 0], [0, 0]]}, "T": 2.0})
    assert main(["gramian", "--config", cfg]) == 2
    assert "uncontrollable-at-horizon" in capsys.readouterr().err


def test_simulate_decay(tmp_path):
    cfg = write_cfg(tmp_path / "s.yaml", {
        "system": {"A": [[-1.0]], "B": [[1.0]]}, "T": 1.0, "grid": 50,
        "input": {"constant": [0.0]}, "x0": [1.0]})
    assert main(["simulate", "--config", cfg]) == 0
    X = read_matrix_csv(tmp_path / "out" / "trajectory.csv")
    assert X[-1, 0] == pytest.approx(1.0)
    assert X[-1, 1] == pytest.approx(math.exp(-1), abs=1e-10)
    np.testing.assert_allclose(X[:, 1], np.exp(-X[:, 0]), atol=1e-12)


def test_matrix_file_roundtrip(tmp_path, rng):
    M = rng.standard_normal((4, 3))
    write_matrix_csv(tmp_path / "m.csv", M)
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "m.csv"), M)
    (tmp_path / "h.csv").write_text("a,b\n1,2\n3,4\n")
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "h.csv"), [[1, 2], [3, 4]])


def test_solution_feeds_back_as_input(scalar_cfg, tmp_path):
    # solve -> solution.csv -> simulate reaches xT
    assert main(["solve", "--config", scalar_cfg]) == 0
    cfg = write_cfg(tmp_path / "sim.yaml", {
        "system": {"A": [[0.0]], "B": [[1.0]]}, "T": 2.0,
        "input": {"file": "out/solution.csv"}, "x0": [1.0], "out": "sim"})
    assert main(["simulate", "--config", cfg]) == 0
    X = read_matrix_csv(tmp_path / "sim" / "trajectory.csv")
    assert X[-1, 1] == pytest.approx(1.0, abs=1e-12)


def test_network_solve_with_gamma_endpoints(tmp_path):
    cfg = write_cfg(tmp_path / "n.yaml", {
        "network": {"n": 10}, "T": 3.0, "grid": 200, "seed": 3,
        "prior": {"random_constant": True}, "endpoints": {"gamma": 0.7645}})
    assert main(["solve", "--config", cfg]) == 0
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["endpoint_resid"] <= 1e-6 and -1 <= rep["J"] <= 1


def test_ensemble_deterministic_and_readable(tmp_path, capsys):
    base = ["ensemble", "--realizations", "5", "--seed", "7", "--grid", "100"]
    cfg = write_cfg(tmp_path / "e.yaml", {"network": {"n": 12}})
    assert main(base + ["--config", cfg, "--out", str(tmp_path / "a")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert main(base + ["--config", cfg, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    a = (tmp_path / "a" / "ensemble.csv").read_bytes()
    assert a == (tmp_path / "b" / "ensemble.csv").read_bytes()
    recs = read_records_csv(tmp_path / "a" / "ensemble.csv")
    assert records_to_csv(recs).encode() == a
    assert [r.seed for r in recs] == [7 ^ k for k in range(5)]
    assert summary["realizations"] == 5
    feas = [r for r in recs if r.feasible]
    assert summary["feasible"] == len(feas)
    assert summary["frac_nov_ge_me"] == pytest.approx(
        np.mean([r.J_nov >= r.J_me_norm - 1e-9 for r in feas]))


def test_ensemble_raw_baseline(tmp_path, capsys):
    out = str(tmp_path / "r")
    assert main(["ensemble", "--realizations", "2", "--grid", "100", "--out", out,
                 "--no-normalize-baseline", "--fixed-prior",
                 "--config", write_cfg(tmp_path / "e.yaml", {"network": {"n": 8}})]) == 0
    assert json.loads(capsys.readouterr().out)["baseline"] == "raw"


def test_console_entry_point(scalar_cfg, tmp_path):
    r = subprocess.run([sys.executable, "-m", "novelctl", "solve", "--config", scalar_cfg,
                        "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "m" / "report.json").exists()
