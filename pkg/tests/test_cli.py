"""Command-line front end, exercised in-process through main()."""

import os

import numpy as np
import pytest

from cbflearn.cli import main
from cbflearn.sim import read_trajectory_csv


@pytest.fixture(scope="module")
def free_toml(tmp_path_factory):
    p = tmp_path_factory.mktemp("scn") / "free.toml"
    p.write_text(
        'workspace = { x_min = -1.6, x_max = 1.6, y_min = -1.0, y_max = 1.0 }\n'
        'goal = [1.4, 0.0]\n'
        'start = [[-1.4, 0.0], [-1.4, 0.5]]\n')
    return str(p)


@pytest.fixture(scope="module")
def circle_run(tmp_path_factory):
    """One full offline run of the built-in single-circle scenario."""
    out = str(tmp_path_factory.mktemp("run"))
    code = main(["run", "--scenario", "single_circle", "--mode", "offline",
                 "--seed", "7", "--out", out])
    assert code == 0
    return out


class TestRun:
    def test_free_all_modes(self, free_toml, tmp_path):
        out = str(tmp_path / "free")
        code = main(["run", "--scenario", free_toml, "--mode", "all",
                     "--seed", "1", "--out", out])
        assert code == 0
        for case in (0, 1):
            for mode in ("ground-truth", "offline", "online-aggregate",
                         "online-instant"):
                assert os.path.exists(os.path.join(out, f"case{case:02d}_{mode}.csv"))
        assert os.path.exists(os.path.join(out, "summary.json"))
        assert os.path.exists(os.path.join(out, "table.csv"))

    def test_offline_artifacts(self, circle_run):
        assert os.path.exists(os.path.join(circle_run, "case00_offline.csv"))
        assert os.path.exists(os.path.join(circle_run,
                                           "case00_offline_levelset.csv"))
        assert os.path.exists(os.path.join(circle_run, "summary.json"))

    def test_start_inside_obstacle_exit_code(self, tmp_path, capsys):
        out = str(tmp_path / "bad")
        code = main(["run", "--scenario", "single_circle", "--mode", "offline",
                     "--out", out, "--override", "start=[0.0, 0.0]"])
        assert code == 1
        assert "start outside learned safe set" in capsys.readouterr().err

    def test_override_round_trip(self, free_toml, tmp_path):
        # delta=2 doubles the nominal speed, halving the step count
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        assert main(["run", "--scenario", free_toml, "--mode", "ground-truth",
                     "--out", out_a]) == 0
        assert main(["run", "--scenario", free_toml, "--mode", "ground-truth",
                     "--out", out_b, "--override", "control.delta=2.0"]) == 0
        slow = read_trajectory_csv(os.path.join(out_a, "case00_ground-truth.csv"))
        fast = read_trajectory_csv(os.path.join(out_b, "case00_ground-truth.csv"))
        assert abs(len(fast) - len(slow) / 2) <= 2

    def test_unknown_scenario_errors(self, tmp_path):
        assert main(["run", "--scenario", "no_such_scenario",
                     "--out", str(tmp_path)]) == 1

    def test_bad_override_errors(self, free_toml, tmp_path):
        assert main(["run", "--scenario", free_toml, "--out", str(tmp_path),
                     "--override", "garbage"]) == 1

    def test_output_dir_env_default(self, free_toml, tmp_path, monkeypatch):
        out = str(tmp_path / "envout")
        monkeypatch.setenv("CBFLEARN_OUT", out)
        assert main(["run", "--scenario", free_toml,
                     "--mode", "ground-truth"]) == 0
        assert os.path.exists(os.path.join(out, "case00_ground-truth.csv"))


class TestEval:
    def test_identical_files(self, circle_run, tmp_path, capsys):
        traj = os.path.join(circle_run, "case00_offline.csv")
        report = str(tmp_path / "report.csv")
        code = main(["eval", traj, traj, "--report", report])
        assert code == 0
        out = capsys.readouterr().out
        assert "R = 1.000000" in out
        assert "F = 0.000000" in out
        lines = open(report).read().strip().splitlines()
        assert lines[0] == "case,mode_a,mode_b,R,F"
        assert len(lines) == 2

    def test_report_appends(self, circle_run, tmp_path):
        traj = os.path.join(circle_run, "case00_offline.csv")
        report = str(tmp_path / "report.csv")
        main(["eval", traj, traj, "--report", report])
        main(["eval", traj, traj, "--report", report])
        assert len(open(report).read().strip().splitlines()) == 3

    def test_single_row_file_rejected(self, tmp_path, capsys):
        p = tmp_path / "short.csv"
        p.write_text("t,x,y,ux,uy,h_hat,true_sdf,constraint_active\n"
                     "0.0,0.0,0.0,0.0,0.0,0.0,0.0,0\n")
        code = main(["eval", str(p), str(p),
                     "--report", str(tmp_path / "r.csv")])
        assert code == 1

    def test_malformed_file_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,x,y\n1.0,zzz,2\n1,2,3\n")
        assert main(["eval", str(p), str(p),
                     "--report", str(tmp_path / "r.csv")]) == 1


class TestTable:
    def test_single_case_directory(self, circle_run, capsys):
        assert main(["table", circle_run]) == 0
        table = os.path.join(circle_run, "table.csv")
        lines = open(table).read().strip().splitlines()
        # offline-only directory: comparisons need their partners, so cells
        # stay absent, but both case rows and the average row are emitted
        assert lines[0].startswith("case,")
        assert len(lines) >= 2

    def test_empty_directory(self, tmp_path, capsys):
        assert main(["table", str(tmp_path)]) == 0
        lines = open(tmp_path / "table.csv").read().strip().splitlines()
        assert len(lines) == 1  # header only

    def test_full_directory_metrics(self, free_toml, tmp_path):
        out = str(tmp_path / "full")
        assert main(["run", "--scenario", free_toml, "--mode", "all",
                     "--out", out]) == 0
        lines = open(os.path.join(out, "table.csv")).read().strip().splitlines()
        header = lines[0].split(",")
        assert header == ["case", "R_off_gt", "R_on_gt", "R_off_on",
                          "F_off_gt", "F_on_gt", "F_off_on"]
        assert lines[-1].startswith("average,")
        # free arena: every mode drives the same straight line
        avg = [float(v) for v in lines[-1].split(",")[1:]]
        assert avg[:3] == pytest.approx([1.0, 1.0, 1.0])
        assert avg[3:] == pytest.approx([0.0, 0.0, 0.0], abs=1e-9)


class TestSdf:
    def test_grid_dump(self, tmp_path, capsys):
        out = str(tmp_path / "sdf")
        assert main(["sdf", "--scenario", "single_circle",
                     "--spacing", "0.1", "--out", out]) == 0
        path = os.path.join(out, "sdf_grid.csv")
        rows = open(path).read().strip().splitlines()
        assert rows[0] == "x,y,sdf"
        vals = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        # spot-check the analytic distance for the r=0.35 circle at origin
        i = np.argmin(np.abs(vals[:, 0] - 1.0) + np.abs(vals[:, 1]))
        assert vals[i, 2] == pytest.approx(0.65, abs=1e-9)


class TestLevelset:
    def test_levelset_consistent_with_final_model(self, circle_run):
        lines = open(os.path.join(circle_run,
                                  "case00_offline_levelset.csv")).read()
        rows = lines.strip().splitlines()
        assert rows[0] == "x,y,h_hat"
        vals = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        # obstacle center must be classified unsafe, far corner safe
        i = np.argmin(np.abs(vals[:, 0]) + np.abs(vals[:, 1]))
        assert vals[i, 2] < 0
        j = np.argmin(np.abs(vals[:, 0] + 1.6) + np.abs(vals[:, 1] + 1.0))
        assert vals[j, 2] > 0
