import dataclasses
import math

import numpy as np
import pytest

from conftest import ball_scenario
from invlab import pipeline
from invlab.channels import Drift
from invlab.errors import BracketError, ConfigError, DivergenceError, OrderingError
from invlab.policies import Policy, aggregate_policies
from invlab.safe_set import BoundaryRegion
from invlab.simulator import (
    THEOREM_INSTANTIATED,
    certify_a3,
    invariance_audit,
    refine_crossing,
    simulate,
    theorem1_harness,
)
from invlab.state_model import CapabilitySchedule
from invlab.supercritical import a2_margin


def closed_form_scenario(dt=1e-3, horizon=1.0):
    # x' = 2x - 1 from 0.75, so x(t) = 0.5 + 0.25 exp(2t)
    return ball_scenario(
        kappa=CapabilitySchedule.constant(2.0),
        policy=Policy.constant([-1.0], 1.0),
        x0=[0.75],
        dt=dt,
        horizon=horizon,
    )


def test_constant_trajectory():
    s = ball_scenario(kappa=CapabilitySchedule.constant(0.0), x0=[0.5], horizon=1.0, dt=0.25)
    traj = simulate(s)
    assert traj.terminated == "horizon"
    assert traj.t.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert np.all(traj.x == 0.5)


def test_exit_time_matches_closed_form():
    traj = simulate(closed_form_scenario())
    ev = traj.exit_event
    assert traj.terminated == "exit"
    assert abs(ev.t - math.log(2) / 2) <= 1e-6
    assert abs(traj.g[-1]) <= 1e-9
    assert traj.events[-1].kind == "boundary-crossing"
    assert np.all(np.diff(traj.t) > 0)


def test_rk4_is_fourth_order():
    T = 0.3
    exact = 0.5 + 0.25 * math.exp(2 * T)
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        traj = simulate(closed_form_scenario(dt=dt, horizon=T))
        assert traj.t[-1] == T
        errs.append(abs(traj.x[-1, 0] - exact))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(12 <= r <= 20 for r in ratios), ratios


def test_subcritical_restoring_holds():
    s = ball_scenario(kappa=CapabilitySchedule.constant(0.5), policy=Policy.restoring(1.0), x0=[0.75])
    traj = simulate(s)
    audit = invariance_audit(traj)
    assert traj.terminated == "horizon" and audit.invariant and audit.min_neg_g >= 0


def test_refine_crossing_unit_speed():
    s = ball_scenario(kappa=CapabilitySchedule.constant(0.0))
    push = Policy.constant([1.0], 1.0)
    t, x = refine_crossing(s, push, (0.5, [0.5]), (1.5, [1.5]))
    assert t == pytest.approx(1.0, abs=1e-9)
    assert abs(s.safe_set.level(x)) <= 1e-9
    with pytest.raises(BracketError):
        refine_crossing(s, push, (0.0, [0.1]), (0.1, [0.2]))


def test_clip_events_are_recorded():
    s = ball_scenario(kappa=CapabilitySchedule.constant(0.0), policy=Policy.constant([3.0], 1.0), x0=[0.0])
    traj = simulate(s, horizon=0.01, dt=0.005)
    assert len(traj.events_of("clip")) >= 2
    assert np.all(np.abs(traj.u) <= 1.0 + 1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_error_keeps_last_sample():
    s = ball_scenario(drift=Drift.linear([[1e300]]), kappa=CapabilitySchedule.constant(0.0), x0=[0.5])
    with pytest.raises(DivergenceError) as exc:
        simulate(s, stop_on_exit=False)
    assert exc.value.trajectory is not None and np.all(np.isfinite(exc.value.trajectory.x))


def test_invariance_audit_examples():
    centre = simulate(ball_scenario(kappa=CapabilitySchedule.constant(0.0), x0=[0.0], horizon=0.1))
    a = invariance_audit(centre)
    assert a.invariant and a.min_neg_g == 1.0

    out = invariance_audit(simulate(closed_form_scenario()))
    assert not out.invariant and abs(out.exit_time - math.log(2) / 2) <= 1e-6

    graze = dataclasses.replace(centre, g=np.full_like(centre.g, 5e-10))
    assert invariance_audit(graze).invariant


def test_simulation_is_deterministic(r1d):
    a = simulate(r1d)
    b = simulate(r1d)
    for f in ("t", "x", "kappa", "u", "g"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert a.events == b.events


def test_certify_a3_examples(r1d):
    reach = certify_a3(r1d, r1d.policy, [[0.9]], 1.0)
    assert reach.found and reach.t_reach > 1.0 and reach.interior_before
    assert reach.contact_point == pytest.approx((1.0,), abs=1e-9)

    capped = r1d.replace(capability=CapabilitySchedule.constant(0.5))
    assert not certify_a3(capped, capped.policy, [[0.9]], None).found

    with pytest.raises(ConfigError):
        certify_a3(r1d, r1d.policy, [[1.2]], 1.0)


def test_a3_rejects_early_contact(r1d):
    # without control the state from 0.9 hits the boundary at t = 0.459, before T_kappa = 1
    reach = certify_a3(r1d, Policy.zero(1.0), [[0.9]], 1.0)
    assert not reach.found and reach.attempts[0].outcome == "contact before T_kappa"


def test_a3_contact_outside_gamma():
    s = ball_scenario(gamma=BoundaryRegion("halfspace", {"normal": [-1.0], "offset": 0.0}))
    reach = certify_a3(s, Policy.zero(1.0), [[0.5]], 1.0)
    assert reach.attempts[0].outcome == "first contact outside the boundary region"


def test_harness_instantiates_on_reference_scenario(r1d):
    certs, rep = pipeline.harness(r1d)
    assert rep.verdict == THEOREM_INSTANTIATED
    by_id = {o.policy_id: o for o in rep.outcomes}
    assert set(by_id) == {"zero", "constant", "restoring-optimal", "aggregate-3"}
    for o in rep.outcomes:
        assert o.exited and o.invariance_violated and o.exit_confirmed and o.outward_component > 0
        # outward velocity at contact is at least the boundary gap for this policy's bound
        scen = r1d.replace(u_max=o.u_bound, drift_bound=r1d.mf)
        kappa = r1d.capability(o.exit_time)
        assert o.outward_component >= a2_margin(scen, [1.0], kappa).margin - 1e-6
    rest = by_id["restoring-optimal"]
    assert rest.outward_component == pytest.approx(r1d.capability(rest.exit_time) - 1.0, abs=1e-6)
    assert by_id["aggregate-3"].u_bound == 3.0 and by_id["aggregate-3"].kappa_star == pytest.approx(3.0, abs=1e-6)


def test_harness_horizon_below_threshold(r1d):
    short = r1d.replace(numerics=dataclasses.replace(r1d.numerics, horizon=0.5))
    _, rep = pipeline.harness(short)
    assert rep.verdict == "not instantiated (horizon below T_kappa)"
    assert not any(o.exited for o in rep.outcomes)


def test_harness_subcritical(scenario_dir):
    from invlab.document import load_validate

    scen = load_validate(scenario_dir / "r1d_subcritical.scenario").build()
    certs, rep = pipeline.harness(scen)
    assert rep.verdict == "not instantiated (A2 fails)"
    assert invariance_audit(simulate(scen)).invariant


def test_harness_ordering(r1d):
    with pytest.raises(OrderingError):
        theorem1_harness(r1d, [r1d.policy], [[1.0]], None, None)


def test_aggregate_above_capability_still_exits():
    # aggregate bound 3 is exceeded by kappa(t) = t well before the horizon
    agg = aggregate_policies([Policy.restoring(1.0) for _ in range(3)], id="agg")
    s = ball_scenario(u_max=3.0, policy=agg, x0=[0.9])
    traj = simulate(s)
    assert traj.terminated == "exit" and traj.exit_event.t > 3.0
