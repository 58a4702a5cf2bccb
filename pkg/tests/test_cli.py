import json
import subprocess
import sys

import pytest

from invlab.cli import run_cli
from invlab.report import read_trajectory_csv


@pytest.fixture
def r1d_path(scenario_dir):
    return str(scenario_dir / "r1d.scenario")


def test_certify_single_check(r1d_path, capsys):
    assert run_cli(["certify", r1d_path, "--checks", "a2"]) == 0
    out = capsys.readouterr().out
    assert "A2" in out and "pass" in out


def test_subcritical_harness_exits_2(scenario_dir, capsys):
    assert run_cli(["harness", str(scenario_dir / "r1d_subcritical.scenario")]) == 2
    assert "subcritical" in capsys.readouterr().out


def test_missing_file_exits_3(tmp_path, capsys):
    assert run_cli(["simulate", str(tmp_path / "missing.scenario")]) == 3
    assert "missing.scenario" in capsys.readouterr().err


def test_bad_arguments_exit_3(r1d_path, capsys):
    assert run_cli(["certify"]) == 3
    assert run_cli(["sweep", r1d_path, "--param", "control.u_max"]) == 3
    assert run_cli(["simulate", r1d_path, "--policy", "nope"]) == 3


def test_seed_flag_and_environment(r1d_path, capsys, monkeypatch):
    assert run_cli(["--json", "certify", r1d_path, "--checks", "a1", "--seed", "5"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 5
    monkeypatch.setenv("INVLAB_SEED", "77")
    assert run_cli(["certify", r1d_path, "--checks", "a1", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 77
    # the flag wins over the environment
    assert run_cli(["certify", r1d_path, "--checks", "a1", "--json", "--seed", "6"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 6
    monkeypatch.setenv("INVLAB_SEED", "abc")
    assert run_cli(["certify", r1d_path, "--checks", "a1"]) == 3


def test_simulate_writes_csv(r1d_path, tmp_path, capsys):
    out = tmp_path / "run.csv"
    assert run_cli(["simulate", r1d_path, "--policy", "zero", "--out", str(out)]) == 0
    header, rows, events = read_trajectory_csv(out)
    assert header[0] == "t" and rows.shape[1] == 5
    assert events[-1][0] == "boundary-crossing"
    assert "policy zero" in capsys.readouterr().out


def test_report_file_formats(r1d_path, tmp_path, capsys):
    js, txt = tmp_path / "r.json", tmp_path / "r.txt"
    assert run_cli(["certify", r1d_path, "--checks", "h2", "--report", str(js)]) == 0
    assert json.loads(js.read_text())["table"][0][0] == "H2"
    assert run_cli(["certify", r1d_path, "--checks", "h2", "--report", str(txt)]) == 0
    out = capsys.readouterr().out
    assert txt.read_text().startswith("scenario: r1d") and out.endswith(txt.read_text())


def test_threshold_output(r1d_path, capsys):
    assert run_cli(["threshold", r1d_path, "--json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert abs(d["kappa_star"] - 1.0) <= 1e-6


def test_sweep(r1d_path, capsys):
    code = run_cli(["sweep", r1d_path, "--param", "control.u_max", "--values", "0.5,20,200", "--json"])
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert [r["value"] for r in rows] == [0.5, 20, 200]
    # kappa* = 20 is reached after the horizon, but the premise still holds from T_kappa on
    assert [r["verdicts"]["A2"] for r in rows] == ["pass", "pass", "fail"]
    assert code == 2

    assert run_cli(["sweep", r1d_path, "--param", "control.u_max", "--values", "0.5,2"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "control.u_max=0.5: A2 pass, Lemma1 pass"


def test_requirements(scenario_dir, capsys):
    assert run_cli(["requirements", str(scenario_dir / "contraction.scenario")]) == 0
    assert run_cli(["requirements", str(scenario_dir / "dependent.scenario")]) == 2


def test_module_entry_point(r1d_path):
    res = subprocess.run([sys.executable, "-m", "invlab", "certify", r1d_path, "--checks", "h2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "H2" in res.stdout
