"""Safety-compatible internal configurations, strategy classification and
the four requirement audits (R1 to R4)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .certificates import Certificate
from .errors import ConfigError, DimensionError
from .policies import Policy, is_provably_zero
from .scenario import Scenario
from .simulator import EVENT_TIME_TOL, Event, Trajectory, _rk4_step, invariance_audit, simulate
from .state_model import CapabilitySchedule, StatePartition, split_internal

EXTERNAL = "externally-enforced"
INTRINSIC = "intrinsic"

OPEN_QUESTION_CAVEAT = (
    "whether terminal-objective invariance fully captures safety-compatible behavior is an open question"
)
FINITE_HORIZON_CAVEAT = "checked on a finite horizon and finitely many samples (surrogate for all t >= 0)"


@dataclass(frozen=True, eq=False)
class PhiPredicate:
    """Set of safety-compatible internal configurations.

    ``ball``: closed ball ``||x_int - center|| <= radius``; ``halfspace``:
    ``<direction, x_int> <= offset``; ``custom``: ``func(x_int) -> bool``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    func: Callable | None = None

    def __post_init__(self):
        p = dict(self.params)
        if self.kind == "ball":
            p["center"] = np.atleast_1d(np.asarray(p.get("center"), dtype=float))
            if not p.get("radius", 0) > 0:
                raise ConfigError("phi ball radius must be > 0")
        elif self.kind == "halfspace":
            p["direction"] = np.atleast_1d(np.asarray(p.get("direction"), dtype=float))
            p["offset"] = float(p.get("offset", 0.0))
        elif self.kind == "custom":
            if self.func is None:
                raise ConfigError("custom phi needs a callable")
        else:
            raise ConfigError(f"unknown phi kind {self.kind!r}")
        object.__setattr__(self, "params", p)

    @classmethod
    def ball(cls, center, radius: float) -> PhiPredicate:
        return cls("ball", {"center": center, "radius": float(radius)})

    def __call__(self, x_int) -> bool:
        x_int = np.atleast_1d(np.asarray(x_int, dtype=float))
        p = self.params
        if self.kind == "ball":
            if x_int.shape != p["center"].shape:
                raise DimensionError("internal block and phi center differ in length")
            return bool(np.linalg.norm(x_int - p["center"]) <= p["radius"])
        if self.kind == "halfspace":
            return bool(p["direction"] @ x_int <= p["offset"])
        return bool(self.func(x_int))


@dataclass(frozen=True, eq=False)
class StrategyDeclaration:
    sustain_stage_policy: Policy | None = None
    genesis_interventions: tuple = ()
    claimed_class: str = INTRINSIC

    def __post_init__(self):
        if self.claimed_class not in (EXTERNAL, INTRINSIC):
            raise ConfigError(f"claimed class must be {EXTERNAL!r} or {INTRINSIC!r}")


class Classification(NamedTuple):
    strategy_class: str
    rationale: str
    mismatch: bool


def classify_strategy(d: StrategyDeclaration) -> Classification:
    """Dependence test at the sustaining stage.

    Only the sustain-stage policy matters; interventions at genesis do not
    change the class.
    """
    p = d.sustain_stage_policy
    if is_provably_zero(p):
        cls = INTRINSIC
        why = "no continued external control at the sustaining stage"
        if d.genesis_interventions:
            why += f"; {len(d.genesis_interventions)} genesis intervention(s) do not affect the class"
    else:
        cls = EXTERNAL
        why = f"sustaining stage depends on external policy {p.id!r} ({p.kind})"
    return Classification(cls, why, cls != d.claimed_class)


def check_r2_genesis(x0, p: StatePartition, phi: PhiPredicate) -> Certificate:
    _, x_int = split_internal(np.asarray(x0, dtype=float), p)
    ok = phi(x_int)
    return Certificate(
        "R2",
        "pass" if ok else "fail",
        f"initial internal configuration {x_int.tolist()} is {'inside' if ok else 'outside'} phi",
        evidence={"x_int0": x_int.tolist()},
        parameters={"phi_kind": phi.kind, "closed_set_convention": True},
        caveats=(OPEN_QUESTION_CAVEAT,),
    )


def _refine_phi_exit(traj: Trajectory, i: int, p: StatePartition, phi: PhiPredicate) -> tuple[float, np.ndarray]:
    """Bisect the step ending at sample ``i`` for the first time outside phi."""
    t1, t2 = float(traj.t[i - 1]), float(traj.t[i])
    x1 = traj.x[i - 1]
    if traj.scenario is None:
        def state_at(s):
            w = s / (t2 - t1)
            return (1 - w) * x1 + w * traj.x[i]
    else:
        bu = traj.scenario.control.B @ traj.u[i - 1]

        def state_at(s):
            return _rk4_step(traj.scenario, x1, t1, s, bu)

    a, b = 0.0, t2 - t1
    xb = traj.x[i]
    while b - a > EVENT_TIME_TOL:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        xm = state_at(mid)
        if phi(xm[p.internal_slice]):
            a = mid
        else:
            b, xb = mid, xm
    return t1 + b, xb


def check_r3_invariance(traj: Trajectory, p: StatePartition, phi: PhiPredicate) -> Certificate:
    """Check the internal block stays in phi along a zero-control run."""
    if not is_provably_zero(traj.policy):
        raise ConfigError("self-modification audit needs a run without external control")
    inside = np.array([phi(x[p.internal_slice]) for x in traj.x])
    evidence = {"samples": int(inside.size), "horizon": float(traj.t[-1])}
    if inside.all():
        return Certificate(
            "R3",
            "pass",
            f"internal configuration stayed in phi at all {inside.size} samples",
            evidence=evidence,
            caveats=(FINITE_HORIZON_CAVEAT, OPEN_QUESTION_CAVEAT),
        )
    i = int(np.argmin(inside))
    if i == 0:
        t_exit, x_exit = float(traj.t[0]), traj.x[0]
    else:
        t_exit, x_exit = _refine_phi_exit(traj, i, p, phi)
    ev = Event("phi-exit", t_exit, tuple(np.asarray(x_exit).tolist()))
    evidence.update(phi_exit_time=t_exit, phi_exit_state=list(ev.state), event=ev._asdict())
    return Certificate(
        "R3",
        "fail",
        f"internal configuration left phi at t={t_exit:.9g}",
        evidence=evidence,
        caveats=(FINITE_HORIZON_CAVEAT, OPEN_QUESTION_CAVEAT),
    )


def scenario_diff(a: Scenario, b: Scenario) -> list[str]:
    """Names of scenario fields that are not the very same object."""
    return [f.name for f in dataclasses.fields(Scenario) if getattr(a, f.name) is not getattr(b, f.name)]


def zero_policy_rerun(scenario: Scenario) -> Scenario:
    return scenario.replace(policy=Policy.zero(scenario.u_max, id="zero"))


def check_r1_no_external(scenario: Scenario) -> Certificate:
    """Rerun with the external policy removed; safety must still hold."""
    rerun = zero_policy_rerun(scenario)
    audit = invariance_audit(simulate(rerun))
    return Certificate(
        "R1",
        "pass" if audit.invariant else "fail",
        (
            "safe set stayed invariant without external control"
            if audit.invariant
            else f"without external control the state left the safe set at t={audit.exit_time:.6g}"
        ),
        evidence={
            "invariant": audit.invariant,
            "min_neg_g": audit.min_neg_g,
            "t_worst": audit.t_worst,
            "exit_time": audit.exit_time,
            "changed_fields": scenario_diff(scenario, rerun),
        },
        parameters={"horizon": scenario.numerics.horizon, "dt": scenario.numerics.dt},
        caveats=(FINITE_HORIZON_CAVEAT,),
    )


def check_r4_scaling(scenario: Scenario, kappa_levels: Sequence[float]) -> Certificate:
    """Zero-control invariance with capability pinned at each level in turn."""
    levels = [float(k) for k in kappa_levels]
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("capability levels must be strictly increasing with at least two entries")
    base = zero_policy_rerun(scenario)
    results = []
    first_fail = None
    for level in levels:
        audit = invariance_audit(simulate(base.replace(capability=CapabilitySchedule.constant(level))))
        results.append({"kappa": level, "invariant": audit.invariant, "exit_time": audit.exit_time})
        if not audit.invariant and first_fail is None:
            first_fail = level
    ok = first_fail is None
    return Certificate(
        "R4",
        "pass" if ok else "fail",
        (
            f"invariant without external control at all {len(levels)} capability levels"
            if ok
            else f"invariance fails first at capability level {first_fail:.6g}"
        ),
        evidence={"levels": results, "first_failing_level": first_fail},
        parameters={"horizon": scenario.numerics.horizon},
        caveats=("capability growth is audited at finitely many pinned levels",),
    )
