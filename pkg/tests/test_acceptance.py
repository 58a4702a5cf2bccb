"""Acceptance criteria, one test per criterion.

The terminal summary prints a PASS/FAIL line for each (see conftest.py).
"""

import math
import time

import numpy as np
import pytest

from conftest import SCENARIOS, ball_scenario
from invlab import pipeline
from invlab.channels import ControlChannel, EndogenousChannel, check_h2_monotone, probe_h1_continuity
from invlab.cli import run_cli
from invlab.document import load_validate
from invlab.intrinsic import PhiPredicate, check_r1_no_external, check_r3_invariance, check_r4_scaling
from invlab.policies import Policy, PolicyContext, aggregate_policies, restoring_optimal_control, verify_policy_bound
from invlab.safe_set import BoundaryRegion, SafeSet, sample_boundary_region
from invlab.simulator import THEOREM_INSTANTIATED, invariance_audit, simulate
from invlab.state_model import CapabilitySchedule, StatePartition
from invlab.supercritical import certify_a2, find_kappa_star, lemma1_certificate

ENDS = np.array([[1.0], [-1.0]])


def disk(k, seed=0):
    return sample_boundary_region(SafeSet.ball([0.0, 0.0], 1.0), BoundaryRegion(), k, seed)


@pytest.mark.criterion(1, "outward-velocity lemma instantiation")
def test_lemma1_instantiation():
    start = time.perf_counter()
    s = ball_scenario(kappa=CapabilitySchedule.constant(1.5))
    cert = lemma1_certificate(s, ENDS, [0.0], certify_a2(s, [1.5], ENDS))
    assert cert.passed
    assert abs(cert.evidence["min_outward_total"] - 0.5) <= 1e-9

    s2 = ball_scenario(dim=2, kappa=CapabilitySchedule.constant(1.5))
    X = disk(256)
    cert2 = lemma1_certificate(s2, X, [0.0], certify_a2(s2, [1.5], X))
    ev = cert2.evidence
    assert cert2.passed and cert2.parameters["gamma_sample_count"] == 256
    assert abs(ev["min_outward_total"] - 0.5) <= 1e-9 and abs(ev["max_outward_total"] - 0.5) <= 1e-9
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion(2, "capability threshold and first-reach time")
@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("u_max,mf", [(1.0, 0.0), (2.0, 0.5)])
def test_threshold_correctness(dim, u_max, mf):
    s = ball_scenario(dim=dim, u_max=u_max, mf=mf)
    X = ENDS if dim == 1 else disk(256)
    thr = find_kappa_star(s, X, (0.0, 10.0))
    assert abs(thr.kappa_star - (u_max + mf)) <= 1e-6
    assert abs(thr.t_kappa - thr.kappa_star) <= 1e-9


@pytest.mark.criterion(3, "impossibility harness on the supercritical 1-D instance")
def test_theorem_instantiation():
    start = time.perf_counter()
    scen = load_validate(SCENARIOS / "r1d.scenario").build()
    _, rep = pipeline.harness(scen)
    elapsed = time.perf_counter() - start
    assert {o.policy_id for o in rep.outcomes} == {"zero", "constant", "restoring-optimal", "aggregate-3"}
    for o in rep.outcomes:
        assert o.exited and o.invariance_violated and o.outward_component > 0
    assert rep.verdict == THEOREM_INSTANTIATED
    assert elapsed < 5.0


@pytest.mark.criterion(4, "subcritical control case")
def test_subcritical_soundness(capsys):
    path = SCENARIOS / "r1d_subcritical.scenario"
    scen = load_validate(path).build()
    assert scen.capability(scen.numerics.horizon) < 1.0  # capped below kappa* = 1
    audit = invariance_audit(simulate(scen))
    assert audit.invariant and audit.min_neg_g >= 0 and scen.numerics.horizon == 10.0
    _, rep = pipeline.harness(scen)
    assert rep.verdict == "not instantiated (A2 fails)"
    assert run_cli(["harness", str(path)]) == 2


@pytest.mark.criterion(5, "event accuracy and integrator order")
def test_event_accuracy():
    def run(dt, horizon):
        s = ball_scenario(kappa=CapabilitySchedule.constant(2.0), policy=Policy.constant([-1.0], 1.0),
                          x0=[0.75], dt=dt, horizon=horizon)
        return simulate(s)

    traj = run(1e-3, 1.0)
    assert traj.terminated == "exit"
    assert abs(traj.exit_event.t - math.log(2) / 2) <= 1e-6

    T = 0.3
    exact = 0.5 + 0.25 * math.exp(2 * T)
    errs = [abs(run(dt, T).x[-1, 0] - exact) for dt in (2e-2, 1e-2, 5e-3)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(abs(r - 16.0) <= 1.0 for r in ratios), ratios


@pytest.mark.criterion(6, "admissibility probes")
def test_admissibility_probes():
    rng = np.random.default_rng(6)
    xs = rng.uniform(-1, 1, (64, 2))
    grid = np.linspace(0.0, 20.0, 41)
    families = [
        EndogenousChannel(np.eye(2), "radial-outward", {"center": [0.1, -0.1]}),
        EndogenousChannel(np.eye(2), "linear-gain"),
        EndogenousChannel(np.eye(2), "saturating-gain", {"scale": 3.0}),
        EndogenousChannel(np.eye(2), "target-seeking", {"target": [0.2, 0.3]}),
        EndogenousChannel(np.eye(2), "internal-drift", {"rate": [0.1], "n_env": 1}),
    ]
    for c in families:
        assert check_h2_monotone(c, xs, grid).ok, c.kind
    decreasing = EndogenousChannel(np.eye(2), "custom", h_func=lambda x, k: x / (1.0 + k))
    assert not check_h2_monotone(decreasing, xs, grid).ok

    step = EndogenousChannel([[1.0]], "custom", h_func=lambda x, k: np.where(x >= 0, 1.0, 0.0))
    assert probe_h1_continuity(step, [[-1e-7], [0.5]], [1.0], 1e-6).flagged


@pytest.mark.criterion(7, "authority bound enforcement and aggregation")
def test_authority_enforcement():
    rng = np.random.default_rng(7)
    fixtures = [np.eye(2), np.array([[1.0], [0.0]]), np.array([[2.0, 0.5, 0.0], [0.0, 1.0, -1.0]])]
    for B in fixtures:
        ctx = PolicyContext(ControlChannel(B), SafeSet.ball([0.0, 0.0], 1.0))
        m = B.shape[1]
        kids = [
            Policy.zero(1.0),
            Policy.constant(rng.normal(size=m) * 4, 1.5),
            Policy.restoring(0.7),
            Policy.restoring(2.0, band=None),
        ]
        agg = aggregate_policies(kids)
        assert agg.u_max == pytest.approx(1.0 + 1.5 + 0.7 + 2.0)
        X = rng.uniform(-1, 1, (2000, 2))
        X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
        X[:500] /= np.linalg.norm(X[:500], axis=1)[:, None]  # boundary band where restoring acts
        for p in [*kids, agg]:
            chk = verify_policy_bound(p, ctx, X, [0.0, 1.0, 2.5, 7.0, 10.0])  # 10^4 evaluations
            assert chk.ok and chk.max_norm <= p.u_max + 1e-12

    three = aggregate_policies([Policy.restoring(1.0) for _ in range(3)], id="agg")
    s = ball_scenario(u_max=3.0, policy=three, x0=[0.9])
    traj = simulate(s)
    assert traj.terminated == "exit" and traj.kappa[-1] > 3.0


@pytest.mark.criterion(8, "intrinsic-safety requirement audits")
def test_requirement_audits():
    toy = load_validate(SCENARIOS / "drift_toy.scenario").build()
    r3 = check_r3_invariance(simulate(toy, stop_on_exit=False), toy.partition, toy.phi)
    assert r3.failed and abs(r3.evidence["phi_exit_time"] - 2.0) <= 1e-6

    contraction = load_validate(SCENARIOS / "contraction.scenario").build()
    assert check_r1_no_external(contraction).passed
    assert check_r1_no_external(load_validate(SCENARIOS / "dependent.scenario").build()).failed

    certs = {c.check_id: c for c in pipeline.requirements(contraction)}
    assert certs["R2"].passed and certs["R3"].passed and certs["R4"].passed

    scaling = load_validate(SCENARIOS / "scaling.scenario").build()
    r4 = check_r4_scaling(scaling, scaling.kappa_levels)
    assert r4.failed and r4.evidence["first_failing_level"] == 2.0


def _full_run(tmp, name, commands):
    out = []
    path = str(SCENARIOS / f"{name}.scenario")
    scen = load_validate(path).build()
    for p in (scen.policy, *scen.suite):
        csv = tmp / f"{name}-{p.id}.csv"
        assert run_cli(["simulate", path, "--policy", p.id, "--out", str(csv)]) == 0
        out.append(csv.read_bytes())
    for cmd in commands:
        rep = tmp / f"{name}-{cmd}.json"
        assert run_cli([cmd, path, "--report", str(rep)]) in (0, 2)
        out.append(rep.read_bytes())
    return out


@pytest.mark.criterion(9, "bit-identical reruns")
def test_reproducibility(tmp_path, capsys):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    runs = {
        "r1d": ("certify", "harness", "requirements"),
        "r2d": ("certify", "harness"),
        "contraction": ("requirements",),
    }
    for name, commands in runs.items():
        a = _full_run(tmp_path / "a", name, commands)
        b = _full_run(tmp_path / "b", name, commands)
        assert len(a) >= 2 and a == b


@pytest.mark.criterion(10, "Monte-Carlo extremality of the restoring control")
def test_restoring_extremality():
    rng = np.random.default_rng(10)
    fixtures = [
        np.eye(1),
        np.eye(2),
        np.array([[1.0], [0.0]]),
        np.array([[1.0, 1.0], [0.0, 0.0], [0.5, -2.0]]),
        rng.standard_normal((3, 2)),
        rng.standard_normal((4, 6)),
    ]
    u_max = 1.3
    worst_gap = 0.0
    for B in fixtures:
        ch = ControlChannel(B)
        n_dim, m = B.shape
        normals = rng.standard_normal((8, n_dim))
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        for nvec in normals:
            best = float(B @ restoring_optimal_control(ch, nvec, u_max) @ nvec)
            U = rng.standard_normal((1000, m))
            BU = U @ B.T
            norms = np.linalg.norm(BU, axis=1)
            keep = norms > 1e-12
            # admissible: ||B u|| <= u_max, half on the bounding sphere
            scale = np.where(np.arange(1000) % 2 == 0, 1.0, rng.uniform(0, 1, 1000)) * u_max
            BU[keep] *= (scale[keep] / norms[keep])[:, None]
            gap = best - (BU @ nvec).min()
            worst_gap = max(worst_gap, gap)
    assert worst_gap <= 1e-9, worst_gap
