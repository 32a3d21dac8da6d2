import json
import subprocess
import sys

import numpy as np
import pytest
from conftest import toy_scenario_dict

from mmtraj.admm import SolverAbort, SolverConfig
from mmtraj.bench import (Trajectories, cyclicity_report, read_trajectories_csv, robustness_study, run,
                          trajectory_columns, trajectory_endpoints)
from mmtraj.cli import EXIT_ERROR, EXIT_ITER_LIMIT, EXIT_OK, main
from mmtraj.kinematics import world_end_effector
from mmtraj.scenario import bundled_scenario, generate_path, scenario_from_dict


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(dict(toy_scenario_dict(q=20, n=2, m=6), name="toy")))
    return path


@pytest.fixture
def solved(toy_file, tmp_path):
    out = tmp_path / "run"
    code = main(["solve", str(toy_file), "--out-dir", str(out), "--max-iter", "15"])
    return code, out


def test_solve_writes_artifacts(solved):
    code, out = solved
    assert code == EXIT_ITER_LIMIT
    for name in ("trajectories.csv", "residuals.json", "report.json", "timing.json"):
        assert (out / name).is_file()
    history = json.loads((out / "residuals.json").read_text())["history"]
    assert [h["iteration"] for h in history] == list(range(1, 16))
    report = json.loads((out / "report.json").read_text())
    assert report["iterations"] == 15 and report["converged"] is False and report["scenario"] == "toy"


def test_csv_columns_and_precision(solved):
    _, out = solved
    lines = (out / "trajectories.csv").read_text().splitlines()
    assert lines[0].split(",") == trajectory_columns(2)
    assert lines[0].split(",")[:4] == ["t", "theta_1", "theta_2", "dtheta_1"]
    assert len(lines) == 21
    for line in lines[1:]:
        for field in line.split(","):
            assert field == "%.17g" % float(field)


def test_csv_end_effector_consistent(solved, toy_file):
    _, out = solved
    cols = read_trajectories_csv(out / "trajectories.csv")
    sc = scenario_from_dict(toy_scenario_dict(q=20, n=2, m=6))
    theta = np.column_stack([cols["theta_1"], cols["theta_2"]])
    xb = np.column_stack([cols["x_b"], cols["y_b"]])
    ee = world_end_effector(sc.chain, theta, xb, cols["phi_b"])
    csv_ee = np.column_stack([cols["ee_x"], cols["ee_y"], cols["ee_z"]])
    assert np.abs(ee - csv_ee).max() <= 1e-9
    err = np.linalg.norm(csv_ee - sc.desired_path, axis=1)
    assert np.abs(err - cols["ee_err"]).max() <= 1e-12


def test_report_is_byte_identical(toy_file, tmp_path):
    for d in ("a", "b"):
        main(["solve", str(toy_file), "--out-dir", str(tmp_path / d), "--max-iter", "10"])
    for name in ("report.json", "residuals.json", "trajectories.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.slow
def test_exit_code_converged(tmp_path):
    assert main(["solve", "planar_hol", "--out-dir", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "report.json").read_text())["converged"] is True


def test_exit_code_hard_errors(tmp_path, toy_file):
    assert main(["solve", str(tmp_path / "missing.json")]) == EXIT_ERROR
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"chain": {"joints": []}, "base_type": "holonomic"}))
    assert main(["solve", str(bad), "--out-dir", str(tmp_path / "o")]) == EXIT_ERROR
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"no_such_option": 1}))
    assert main(["solve", str(toy_file), "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == EXIT_ERROR


def test_config_file_overrides(toy_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iter": 3, "rho_init": {"f1": 2.0}}))
    assert main(["solve", str(toy_file), "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == EXIT_ITER_LIMIT
    assert json.loads((tmp_path / "o" / "report.json").read_text())["iterations"] == 3


def test_abort_writes_flagged_artifacts(toy_file, tmp_path, monkeypatch):
    import mmtraj.admm as admm

    def poisoned(state, problem, backend=None):
        return np.full_like(state.v_theta, np.nan), state.w_theta

    monkeypatch.setattr(admm, "step_trig_theta", poisoned)
    sc = scenario_from_dict(toy_scenario_dict(q=20, n=2, m=6))
    with pytest.raises(SolverAbort):
        run(sc, SolverConfig(max_iter=5), tmp_path / "x")
    report = json.loads((tmp_path / "x" / "report.json").read_text())
    assert report["aborted"] is True and report["error"]
    assert main(["solve", str(toy_file), "--out-dir", str(tmp_path / "y")]) == EXIT_ERROR


def test_module_entry_point(toy_file, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mmtraj", "solve", str(toy_file), "--out-dir",
                           str(tmp_path / "m"), "--max-iter", "2"], capture_output=True, text=True)
    assert proc.returncode == EXIT_ITER_LIMIT, proc.stderr
    assert "iteration limit" in proc.stdout


# --------------------------------------------------------------- cyclicity


def _synthetic(q=101, period=True):
    t = np.linspace(0.0, 2.0 * np.pi, q)
    k = 1.0 if period else 0.9
    s, c = np.sin(k * t), np.cos(k * t)
    return Trajectories(
        t=t, theta=np.column_stack([s, c]), dtheta=np.column_stack([k * c, -k * s]),
        ddtheta=np.column_stack([-k * k * s, -k * k * c]), xb=np.column_stack([c, s]),
        dxb=np.column_stack([-k * s, k * c]), ddxb=np.column_stack([-k * k * c, -k * k * s]),
        phi=k * t + 0.3, dphi=np.full(q, k), ddphi=np.zeros(q), ee=np.zeros((q, 3)),
        ee_err=np.zeros(q))


def test_cyclicity_of_periodic_trajectory():
    table = cyclicity_report(trajectory_endpoints(_synthetic()))
    assert max(table["groups"].values()) <= 1e-12
    assert table["closed"]


def test_cyclicity_flags_open_trajectory():
    table = cyclicity_report(trajectory_endpoints(_synthetic(period=False)))
    assert not table["closed"]
    assert table["groups"]["theta/0"] > 0.1


def test_cyclicity_cli(solved, capsys):
    _, out = solved
    assert main(["cyclicity", str(out / "report.json"), "--json"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "theta/0" in text and "phi/2" in text
    assert main(["cyclicity", str(out / "missing.json")]) == EXIT_ERROR


def test_cyclicity_cli_rejects_report_without_endpoints(tmp_path):
    p = tmp_path / "r.json"
    p.write_text("{}")
    assert main(["cyclicity", str(p)]) == EXIT_ERROR


# -------------------------------------------------------------- robustness


def _small_robustness_scenario():
    return scenario_from_dict(toy_scenario_dict(q=20, n=2, m=6, obstacle=False))


def test_robustness_zero_delta_equals_baseline():
    table = robustness_study(_small_robustness_scenario(), SolverConfig(max_iter=5), deltas=(0.0, 0.3),
                             instances=2, seed=1)
    rows = {(r["label"], r["delta"]): r for r in table["rows"]}
    assert rows[("perturbed", 0.0)]["instances"] == rows[("baseline", 0.0)]["instances"]
    assert len(rows[("perturbed", 0.3)]["instances"]) == 2
    assert table["worst_pct"] == max(r["worst_pct"] for r in table["rows"])


def test_robustness_is_seeded():
    sc = _small_robustness_scenario()
    a = robustness_study(sc, SolverConfig(max_iter=3), deltas=(0.5,), instances=2, seed=7)
    b = robustness_study(sc, SolverConfig(max_iter=3), deltas=(0.5,), instances=2, seed=7)
    assert a == b


def test_robustness_requires_two_instances():
    with pytest.raises(ValueError):
        robustness_study(_small_robustness_scenario(), instances=1)


def test_robustness_cli(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(toy_scenario_dict(q=20, n=2, m=6, obstacle=False)))
    out = tmp_path / "table.json"
    code = main(["robustness", str(path), "--deltas", "0", "0.2", "--instances", "2", "--seed", "3",
                 "--max-iter", "3", "--out", str(out)])
    assert code == EXIT_OK
    assert len(json.loads(out.read_text())["rows"]) == 3
    assert main(["robustness", str(path), "--instances", "1"]) == EXIT_ERROR


# ---------------------------------------------------------------- gen-path


def test_gen_path_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["gen-path", "random-fourier", "--q", "40", "--param", "seed=9", "--out", str(p)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rows = np.loadtxt(a, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(rows, generate_path("random-fourier", 40, seed=9))


def test_gen_path_stdout_and_params(capsys):
    assert main(["gen-path", "circle", "--q", "5", "--param", "radius=2", "--param", "center=[1,0,0]"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "x,y,z" and len(lines) == 6
    assert [float(v) for v in lines[1].split(",")] == [3.0, 0.0, 0.0]


def test_gen_path_bad_param():
    assert main(["gen-path", "circle", "--param", "radius"]) == EXIT_ERROR
    assert main(["gen-path", "circle", "--param", "radius=-1"]) == EXIT_ERROR


def test_bundled_scenario_by_name(tmp_path):
    assert main(["solve", "panda_nonhol", "--out-dir", str(tmp_path), "--max-iter", "1"]) == EXIT_ITER_LIMIT
    assert bundled_scenario("panda_nonhol").n == 7
