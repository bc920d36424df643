import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from smfg.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main


def write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


GRADIENT = {"n": 24, "V": "sin(2*pi*x)", "flow": "gradient", "u0": "0.2*cos(2*pi*x)", "flow_config": {"t_max": 1}}


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_solve_writes_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", str(write(tmp_path, GRADIENT)), "--output", str(out), "--quiet"]) == EXIT_OK
    header, traj = read_csv(out / "trajectory.csv")
    assert header == ["t", "phi", "residual_linf", "mass", "mean_u", "hbar"]
    assert np.all(np.diff(traj[:, 0]) > 0)
    header, final = read_csv(out / "final_state.csv")
    assert header == ["x", "u", "m", "u_exact", "m_exact", "u_error", "m_error"]
    assert final.shape == (24, 7)
    assert np.max(final[:, 6]) <= 5e-3
    report = json.loads((out / "report.json").read_text())
    assert report["reason"] == "residual"
    assert report["errors"]["m_linf"] <= 5e-3
    assert report["integrator"]["steps"] > 0 and "rejected" in report["integrator"]
    assert report["spec"]["V"] == "sin(2*pi*x)"
    snapshots = (out / "snapshots.dat").read_text()
    assert snapshots.count("# index") == len(traj)


def test_solve_is_deterministic(tmp_path):
    config = write(tmp_path, GRADIENT)
    for name in ("a", "b"):
        assert main(["solve", str(config), "--output", str(tmp_path / name), "--quiet"]) == EXIT_OK
    for f in ("trajectory.csv", "final_state.csv", "snapshots.dat"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_numbers_use_17_digits(tmp_path):
    out = tmp_path / "out"
    main(["solve", str(write(tmp_path, GRADIENT)), "--output", str(out), "--quiet"])
    line = (out / "final_state.csv").read_text().splitlines()[1]
    x = line.split(",")[0]
    assert float(x) == 1 / 24 and x == f"{1 / 24:.17g}"


def test_monotone_without_exact_columns(tmp_path):
    doc = {"n": 12, "V": "sin(2*pi*x)", "b": "cos(2*pi*x)^2", "flow": "monotone", "m0": "1",
           "flow_config": {"t_max": 0.5, "rtol": 1e-6, "atol": 1e-8}}
    out = tmp_path / "out"
    assert main(["solve", str(write(tmp_path, doc)), "--output", str(out), "--quiet"]) == EXIT_OK
    header, _ = read_csv(out / "final_state.csv")
    assert header == ["x", "u", "m"]
    assert "errors" not in json.loads((out / "report.json").read_text())


def test_two_d_output_order(tmp_path):
    doc = {"dimension": 2, "n": 4, "W": "sin(2*pi*x)+sin(2*pi*y)", "flow": "monotone", "m0": "1",
           "flow_config": {"t_max": 0.2, "rtol": 1e-6, "atol": 1e-8}}
    out = tmp_path / "out"
    assert main(["solve", str(write(tmp_path, doc)), "--output", str(out), "--quiet"]) == EXIT_OK
    header, rows = read_csv(out / "final_state.csv")
    assert header[:2] == ["x", "y"] and "m_exact" in header
    # i (the x index) runs fastest
    assert list(rows[:4, 0]) == [0.25, 0.5, 0.75, 1.0] and np.all(rows[:4, 1] == 0.25)
    report = json.loads((out / "report.json").read_text())
    assert set(report["density_form_check"]) == {"product_m_linf", "sum_m_linf"}


def test_exit_codes(tmp_path, capsys):
    missing_m0 = dict(GRADIENT, flow="monotone")
    assert main(["solve", str(write(tmp_path, missing_m0))]) == EXIT_CONFIG
    assert "/m0" in capsys.readouterr().err
    assert main(["solve", str(write(tmp_path, dict(GRADIENT, extra=1)))]) == EXIT_CONFIG
    assert main(["solve", str(tmp_path / "nope.json")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["solve", str(write(tmp_path, GRADIENT)), "--output", str(blocker / "sub"), "--quiet"]) == EXIT_IO
    with pytest.raises(SystemExit):
        main(["solve"])


def test_numerical_failure_exit(tmp_path):
    doc = dict(GRADIENT, flow_config={"t_max": 1, "max_steps": 1, "integrator": "rk45", "first_step": 1e-20})
    out = tmp_path / "out"
    assert main(["solve", str(write(tmp_path, doc)), "--output", str(out), "--quiet"]) == EXIT_NUMERICAL
    assert not out.exists()


def test_check_commands(tmp_path, capsys):
    assert main(["check", "adjoint", "--sizes", "4,8", "--output", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "adjoint.json").read_text())
    assert report["suite"] == "adjoint" and report["passed"] is True
    assert "PASS" in capsys.readouterr().out
    assert main(["check", "monotonicity", "--sizes", "4", "--quiet"]) == EXIT_OK
    assert main(["check", "monotonicity", "--sizes", "4", "--variant", "congestion", "--quiet"]) == EXIT_OK
    assert main(["check", "gradient", "--sizes", "8", "--quiet"]) == EXIT_OK


def test_study_refinement(tmp_path):
    config = write(tmp_path, dict(GRADIENT, n=10))
    assert main(["study", "refinement", str(config), "--sizes", "10,20", "--output", str(tmp_path), "--quiet"]) == EXIT_OK
    header, rows = read_csv(tmp_path / "study.csv")
    assert header[0] == "n" and list(rows[:, 0]) == [10, 20]
    study = json.loads((tmp_path / "study.json").read_text())
    assert study["passed"] is True
    with pytest.raises(SystemExit):
        main(["study", "refinement", str(config), "--sizes", "2,x"])


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "smfg.cli", "check", "adjoint", "--sizes", "4"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and "adjoint" in proc.stdout
