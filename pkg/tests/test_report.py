import json

import numpy as np
import pytest

from conftest import ball_scenario
from invlab import pipeline
from invlab.document import load_validate
from invlab.errors import ConfigError
from invlab.policies import Policy
from invlab.report import (
    NARRATIVE_EXTERNAL_FAILS,
    NARRATIVE_SUBCRITICAL,
    build_report,
    emit_certificate_report,
    emit_trajectory_csv,
    read_trajectory_csv,
    render_json,
    render_report,
    render_text,
    trajectory_csv,
)
from invlab.simulator import simulate
from invlab.state_model import CapabilitySchedule


def still(n):
    s = ball_scenario(kappa=CapabilitySchedule.constant(0.0), x0=[0.5], dt=0.5, horizon=0.5 * (n - 1))
    return simulate(s)


def test_csv_layout():
    text = trajectory_csv(still(3))
    lines = text.splitlines()
    assert lines[0] == "t,x_0,kappa,u_0,g"
    assert len(lines) == 4
    assert lines[1] == "0,0.5,0,0,-0.75"


def test_csv_ends_with_crossing():
    s = ball_scenario(kappa=CapabilitySchedule.constant(2.0), policy=Policy.constant([-1.0], 1.0), x0=[0.75], horizon=1.0)
    lines = trajectory_csv(simulate(s)).splitlines()
    assert lines[-1].startswith("# event,boundary-crossing,")
    assert abs(float(lines[-1].split(",")[2]) - np.log(2) / 2) <= 1e-6


def test_empty_trajectory_is_rejected():
    traj = still(2)
    empty = type(traj)(**{**traj.__dict__, "t": traj.t[:0], "x": traj.x[:0], "kappa": traj.kappa[:0],
                          "u": traj.u[:0], "g": traj.g[:0], "events": ()})
    with pytest.raises(ConfigError):
        trajectory_csv(empty)


def test_csv_round_trip_is_bit_exact(r1d, tmp_path):
    traj = simulate(r1d)
    path = tmp_path / "t.csv"
    emit_trajectory_csv(traj, path)
    header, rows, events = read_trajectory_csv(path)
    assert header == ["t", "x_0", "kappa", "u_0", "g"]
    for col, arr in zip(rows.T, [traj.t, traj.x[:, 0], traj.kappa, traj.u[:, 0], traj.g]):
        assert np.array_equal(col, arr)
    assert [e[0] for e in events] == [e.kind for e in traj.events]


def test_harness_narratives(r1d, scenario_dir):
    certs, _ = pipeline.harness(r1d)
    record = build_report(certs)
    assert record["narrative"] == NARRATIVE_EXTERNAL_FAILS
    text = render_text(record)
    assert NARRATIVE_EXTERNAL_FAILS in text and "declared premises" in text

    sub = load_validate(scenario_dir / "r1d_subcritical.scenario").build()
    certs, _ = pipeline.harness(sub)
    assert build_report(certs)["narrative"] == NARRATIVE_SUBCRITICAL


def test_single_certificate_report(r1d):
    (h2,) = pipeline.certify(r1d, ["h2"])
    record = build_report([h2])
    assert len(record["table"]) == 1 and record["table"][0][:2] == ["H2", "pass"]
    text = render_text(record)
    assert text.count("H2") == 1 and "declared premises" not in text


def test_json_carries_everything_the_text_shows(r1d):
    certs = pipeline.certify(r1d, ["a1", "a2", "lemma1"])
    meta = {"scenario": "r1d", "seed": 11, "fingerprint": "abc"}
    record = json.loads(render_report(certs, "machine-json", meta))
    text = render_report(certs, "human-text", meta)
    assert record == build_report(certs, meta)
    for check_id, verdict, summary in record["table"]:
        assert all(v in text for v in (check_id, verdict, summary))
    assert record["narrative"] in text
    for cert in record["certificates"]:
        for c in cert["caveats"]:
            assert c in text
    assert record["seed"] == 11 and str(record["seed"]) in text


def test_report_format_and_content_errors(r1d, tmp_path):
    (h2,) = pipeline.certify(r1d, ["h2"])
    with pytest.raises(ConfigError):
        render_report([h2], "xml")
    with pytest.raises(ConfigError):
        build_report([])
    emit_certificate_report([h2], "machine-json", tmp_path / "r.json")
    assert render_json(build_report([h2])) == (tmp_path / "r.json").read_text()
