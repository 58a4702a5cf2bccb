"""Fixed-step RK4 integration with boundary-event refinement, the
reachability search, the impossibility harness and invariance audits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .certificates import STRICTNESS_FLOOR, Certificate
from .errors import BracketError, ConfigError, DivergenceError, OrderingError
from .policies import History, Policy, evaluate_policy
from .safe_set import BOUNDARY_BAND, outward_normal
from .scenario import Scenario
from .state_model import kappa_at
from .streams import stream
from .supercritical import find_kappa_star, outward_total

EVENT_TIME_TOL = 1e-9
MAX_REFINE_ITER = 200


class Event(NamedTuple):
    kind: str  # boundary-crossing | gamma-contact | phi-exit | clip
    t: float
    state: tuple


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples ``(t, x, kappa, u, g)`` of one run.

    ``u[i]`` is the control held over the step starting at ``t[i]``. A run
    that leaves the safe set ends with the refined crossing sample.
    """

    t: np.ndarray
    x: np.ndarray
    kappa: np.ndarray
    u: np.ndarray
    g: np.ndarray
    events: tuple
    dt: float
    terminated: str  # horizon | exit | error
    policy: Policy | None = None
    scenario: Scenario | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.t.shape[0]

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    @property
    def exit_event(self) -> Event | None:
        found = self.events_of("boundary-crossing")
        return found[0] if found else None


def _rk4_step(scenario: Scenario, x: np.ndarray, t: float, h: float, bu: np.ndarray) -> np.ndarray:
    f = scenario.drift
    endo = scenario.endogenous
    sched = scenario.capability

    def rhs(y, s):
        return f(y, s) + bu + endo.effect(y, kappa_at(sched, s))

    k1 = rhs(x, t)
    k2 = rhs(x + 0.5 * h * k1, t + 0.5 * h)
    k3 = rhs(x + 0.5 * h * k2, t + 0.5 * h)
    k4 = rhs(x + h * k3, t + h)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def refine_crossing(
    scenario: Scenario,
    policy: Policy,
    lo: tuple,
    hi: tuple,
    u=None,
) -> tuple[float, np.ndarray]:
    """Locate the boundary crossing inside one integration step.

    ``lo = (t1, x1)`` must be strictly inside and ``hi = (t2, x2)`` strictly
    outside. The step is re-integrated from ``x1`` with the held control
    over a bisected sub-step length; the returned point is the outside end
    of the final bracket, within 1e-9 in time and with |g| <= 1e-9.
    """
    s = scenario.safe_set
    t1, x1 = float(lo[0]), np.asarray(lo[1], dtype=float)
    t2, x2 = float(hi[0]), np.asarray(hi[1], dtype=float)
    g1, g2 = s.level(x1), s.level(x2)
    if not (g1 < 0 < g2) or not t2 > t1:
        raise BracketError(f"no boundary crossing between g={g1:.3e} and g={g2:.3e}")
    if u is None:
        u = evaluate_policy(policy, t1, x1, History(), scenario.context)
    bu = scenario.control.B @ np.atleast_1d(u)
    a, b = 0.0, t2 - t1
    xb, gb = x2, g2
    for _ in range(MAX_REFINE_ITER):
        if b - a <= EVENT_TIME_TOL and abs(gb) <= BOUNDARY_BAND:
            break
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        xm = _rk4_step(scenario, x1, t1, mid, bu)
        gm = s.level(xm)
        if gm > 0:
            b, xb, gb = mid, xm, gm
        else:
            a = mid
            if gm == 0:
                b, xb, gb = mid, xm, gm
                break
    return t1 + b, xb


class _Recorder:
    def __init__(self):
        self.t, self.x, self.k, self.u, self.g = [], [], [], [], []
        self.events: list[Event] = []

    def add(self, t, x, kappa, u, g):
        self.t.append(t)
        self.x.append(x)
        self.k.append(kappa)
        self.u.append(u)
        self.g.append(g)

    def build(self, n, m, dt, terminated, policy, scenario) -> Trajectory:
        return Trajectory(
            np.array(self.t, dtype=float),
            np.array(self.x, dtype=float).reshape(-1, n),
            np.array(self.k, dtype=float),
            np.array(self.u, dtype=float).reshape(-1, m),
            np.array(self.g, dtype=float),
            tuple(self.events),
            dt,
            terminated,
            policy,
            scenario,
        )


def simulate(
    scenario: Scenario,
    policy: Policy | None = None,
    horizon: float | None = None,
    dt: float | None = None,
    x0=None,
    stop_on_exit: bool = True,
) -> Trajectory:
    """Integrate the closed loop from ``x0`` (default: the scenario's initial state).

    The policy is evaluated at each step start and its control held over
    the step. Integration stops at the horizon or, by default, at the first
    refined boundary exit.
    """
    policy = policy or scenario.policy
    horizon = float(horizon if horizon is not None else scenario.numerics.horizon)
    dt = float(dt if dt is not None else scenario.numerics.dt)
    if not dt > 0 or not horizon > 0:
        raise ConfigError("dt and horizon must be > 0")
    s = scenario.safe_set
    x = np.array(scenario.initial_state if x0 is None else x0, dtype=float)
    if x.shape != (scenario.partition.n,):
        raise ConfigError(f"initial state has shape {x.shape}")
    g = s.level(x)
    if g > BOUNDARY_BAND:
        raise ConfigError(f"initial state lies outside the safe set (g={g:.6g})")
    ctx = scenario.context
    B = scenario.control.B
    sched = scenario.capability
    n, m = scenario.partition.n, scenario.control.m
    n_steps = max(1, math.ceil(horizon / dt - 1e-9))
    rec = _Recorder()
    clips: list = []
    history = History()
    terminated = "horizon"

    for k in range(n_steps):
        t = k * dt
        u = evaluate_policy(policy, t, x, history, ctx, clips)
        if clips:
            rec.events.extend(Event("clip", c.t, tuple(x.tolist())) for c in clips)
            clips.clear()
        rec.add(t, x.tolist(), kappa_at(sched, t), u.tolist(), g)
        t_next = horizon if k == n_steps - 1 else (k + 1) * dt
        x_new = _rk4_step(scenario, x, t, t_next - t, B @ u)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(
                f"non-finite state after t={t:.6g}",
                rec.build(n, m, dt, "error", policy, scenario),
            )
        g_new = s.level(x_new)
        if stop_on_exit and g_new > BOUNDARY_BAND:
            if g < 0:
                t_star, x_star = refine_crossing(scenario, policy, (t, x), (t_next, x_new), u)
                rec.add(t_star, x_star.tolist(), kappa_at(sched, t_star), u.tolist(), s.level(x_star))
            else:
                t_star, x_star = t, x
            state = tuple(x_star.tolist())
            if scenario.gamma(x_star):
                rec.events.append(Event("gamma-contact", t_star, state))
            rec.events.append(Event("boundary-crossing", t_star, state))
            terminated = "exit"
            break
        history = History(k + 1, t, tuple(x.tolist()), tuple(u.tolist()))
        x, g = x_new, g_new
    else:
        u = evaluate_policy(policy, horizon, x, history, ctx, clips)
        rec.events.extend(Event("clip", c.t, tuple(x.tolist())) for c in clips)
        rec.add(horizon, x.tolist(), kappa_at(sched, horizon), u.tolist(), g)
    return rec.build(n, m, dt, terminated, policy, scenario)


class InvarianceAudit(NamedTuple):
    invariant: bool
    min_neg_g: float  # min over samples of -g(x)
    t_worst: float
    exit_time: float | None


def invariance_audit(traj: Trajectory) -> InvarianceAudit:
    if len(traj) == 0:
        raise ConfigError("empty trajectory")
    neg = -traj.g
    i = int(np.argmin(neg))
    exit_ev = traj.exit_event
    ok = bool(np.all(traj.g <= BOUNDARY_BAND)) and exit_ev is None
    return InvarianceAudit(ok, float(neg[i]), float(traj.t[i]), exit_ev.t if exit_ev else None)


# reachability ------------------------------------------------------------


class Attempt(NamedTuple):
    x0: tuple
    outcome: str
    t_contact: float | None


@dataclass(frozen=True, eq=False)
class ReachabilityCertificate:
    """Outcome of the forward search for a trajectory reaching Gamma after T_kappa.

    ``found=False`` means "not certified": the search is a semi-decision.
    """

    found: bool
    x0: tuple | None
    t_reach: float | None
    t_kappa: float | None
    interior_before: bool
    contact_point: tuple | None
    attempts: tuple
    policy_id: str
    trajectory: Trajectory | None = field(default=None, repr=False)

    def as_certificate(self, seed: int | None = None) -> Certificate:
        return Certificate(
            "A3",
            "pass" if self.found else "fail",
            (
                f"policy {self.policy_id!r}: trajectory from {list(self.x0)} reaches the boundary region "
                f"at t={self.t_reach:.6g} >= T_kappa={self.t_kappa:.6g}"
                if self.found
                else f"policy {self.policy_id!r}: reachability not certified ({len(self.attempts)} candidates tried)"
            ),
            evidence={
                "found": self.found,
                "x0": self.x0,
                "t_reach": self.t_reach,
                "t_kappa": self.t_kappa,
                "interior_before": self.interior_before,
                "contact_point": self.contact_point,
                "attempts": [a._asdict() for a in self.attempts],
            },
            parameters={"policy": self.policy_id, "seed": seed},
            caveats=("forward search over finitely many initial states; failure means 'not certified', not 'unreachable'",),
        )


def a3_candidates(scenario: Scenario, count: int | None = None) -> list[np.ndarray]:
    """Explicit scenario candidates followed by seeded interior samples."""
    out = [np.asarray(c, dtype=float) for c in scenario.a3_candidates]
    count = scenario.numerics.a3_random_candidates if count is None else count
    if count:
        pts = scenario.safe_set.sample_interior(count, stream(scenario.numerics.seed, "a3-candidates"))
        out.extend(p for p in pts if scenario.safe_set.level(p) < -BOUNDARY_BAND)
    return out


def certify_a3(scenario: Scenario, policy: Policy, candidates, t_kappa: float | None) -> ReachabilityCertificate:
    """Search candidate initial states for a trajectory whose first boundary
    contact lies in Gamma at or after ``t_kappa``."""
    if isinstance(candidates, int):
        candidates = a3_candidates(scenario, candidates)
    cands = [np.asarray(c, dtype=float) for c in candidates]
    s = scenario.safe_set
    for c in cands:
        if c.shape != (scenario.partition.n,) or not s.level(c) < -BOUNDARY_BAND:
            raise ConfigError(f"reachability candidate {c.tolist()} is not in the interior of the safe set")
    attempts = []
    if t_kappa is None:
        attempts = [Attempt(tuple(c.tolist()), "capability threshold never reached", None) for c in cands]
        return ReachabilityCertificate(False, None, None, None, False, None, tuple(attempts), policy.id)
    for c in cands:
        traj = simulate(scenario, policy, x0=c)
        ev = traj.exit_event
        x0 = tuple(c.tolist())
        if ev is None:
            attempts.append(Attempt(x0, "no boundary contact within horizon", None))
            continue
        interior_before = bool(np.all(traj.g[:-1] < 0))
        in_gamma = bool(traj.events_of("gamma-contact"))
        if not in_gamma:
            attempts.append(Attempt(x0, "first contact outside the boundary region", ev.t))
        elif ev.t < t_kappa:
            attempts.append(Attempt(x0, "contact before T_kappa", ev.t))
        elif not interior_before:
            attempts.append(Attempt(x0, "left the interior before contact", ev.t))
        else:
            attempts.append(Attempt(x0, "reached", ev.t))
            return ReachabilityCertificate(True, x0, ev.t, t_kappa, True, ev.state, tuple(attempts), policy.id, traj)
    return ReachabilityCertificate(False, None, None, t_kappa, False, None, tuple(attempts), policy.id)


# impossibility harness --------------------------------------------------


def confirm_exit(scenario: Scenario, policy: Policy, t0: float, x0, steps: int, dt: float | None = None) -> float:
    """Integrate ``steps`` steps past a contact; return the largest g seen."""
    dt = dt or scenario.numerics.dt
    x = np.asarray(x0, dtype=float)
    history = History()
    worst = scenario.safe_set.level(x)
    for k in range(steps):
        t = t0 + k * dt
        u = evaluate_policy(policy, t, x, history, scenario.context)
        x_new = _rk4_step(scenario, x, t, dt, scenario.control.B @ u)
        history = History(k + 1, t, tuple(x.tolist()), tuple(u.tolist()))
        x = x_new
        worst = max(worst, scenario.safe_set.level(x))
    return worst


@dataclass(frozen=True)
class PolicyOutcome:
    policy_id: str
    u_bound: float
    kappa_star: float | None
    t_kappa: float | None
    t_kappa_within_horizon: bool
    reach_found: bool
    x0: tuple | None
    exited: bool
    exit_time: float | None
    outward_component: float | None
    invariance_violated: bool
    exit_confirmed: bool
    invariance_held: bool
    note: str

    def as_dict(self) -> dict:
        return dict(self.__dict__)


THEOREM_INSTANTIATED = "theorem-instantiated"


@dataclass(frozen=True)
class HarnessReport:
    outcomes: tuple
    verdict: str

    @property
    def instantiated(self) -> bool:
        return self.verdict == THEOREM_INSTANTIATED

    def as_certificate(self, parameters: dict | None = None) -> Certificate:
        n_exit = sum(o.exited for o in self.outcomes)
        return Certificate(
            "Theorem1",
            "pass" if self.instantiated else "fail",
            f"{self.verdict}: {n_exit}/{len(self.outcomes)} policies left the safe set from a certified initial state",
            evidence={"verdict": self.verdict, "outcomes": [o.as_dict() for o in self.outcomes]},
            parameters=parameters or {},
            caveats=(
                "the impossibility is demonstrated on a finite policy suite; the worst-case bound at the "
                "boundary is what extends it to every policy obeying the authority bound",
                "the boundary invariance condition is checked numerically at the contact point",
            ),
        )


def _policy_outcome(scenario: Scenario, policy: Policy, gamma_samples, candidates) -> PolicyOutcome:
    bound = policy.u_max
    scen = scenario.replace(u_max=bound, policy=policy, drift_bound=scenario.mf)
    try:
        thr = find_kappa_star(scen, gamma_samples)
    except BracketError as exc:
        return PolicyOutcome(policy.id, bound, None, None, False, False, None, False, None, None, False, False,
                             True, f"no supercritical threshold in bracket: {exc}")
    reach = certify_a3(scen, policy, candidates, thr.t_kappa)
    if not reach.found:
        held = all(a.outcome in ("no boundary contact within horizon", "capability threshold never reached")
                   for a in reach.attempts)
        reasons = sorted({a.outcome for a in reach.attempts})
        return PolicyOutcome(policy.id, bound, thr.kappa_star, thr.t_kappa, thr.within_horizon, False, None, False,
                             None, None, False, False, held, "; ".join(reasons))
    x_b = np.asarray(reach.contact_point)
    t_r = reach.t_reach
    traj = reach.trajectory
    hist = History(len(traj) - 1, float(traj.t[-2]), tuple(traj.x[-2]), tuple(traj.u[-2]))
    u = evaluate_policy(policy, t_r, x_b, hist, scen.context)
    outward = outward_total(scen, x_b, t_r, u)
    worst_g = confirm_exit(scen, policy, t_r, x_b, scenario.numerics.confirm_steps)
    return PolicyOutcome(
        policy.id, bound, thr.kappa_star, thr.t_kappa, thr.within_horizon, True, reach.x0, True, t_r,
        outward, outward > STRICTNESS_FLOOR, worst_g > BOUNDARY_BAND, False, "reached the boundary region",
    )


def theorem1_harness(
    scenario: Scenario,
    policy_suite: Sequence[Policy],
    gamma_samples,
    a2: Certificate | None,
    lemma1: Certificate | None,
    candidates=None,
) -> HarnessReport:
    """Run every suite policy from the reachability candidates and check the
    boundary velocity at the contact.

    Each policy is judged against its own authority bound, so aggregates
    get their own (higher) threshold. The scenario-level boundary-gap and
    outward-velocity certificates are prerequisites.
    """
    if a2 is None or a2.check_id != "A2":
        raise OrderingError("harness needs the boundary-gap (A2) certificate")
    if a2.passed and (lemma1 is None or lemma1.check_id != "Lemma1"):
        raise OrderingError("harness needs the outward-velocity (Lemma1) certificate")
    suite = list(policy_suite)
    if not suite:
        raise ConfigError("empty policy suite")
    if candidates is None:
        candidates = a3_candidates(scenario)
    if not len(candidates):
        raise ConfigError("no reachability candidates")
    outcomes = tuple(_policy_outcome(scenario, p, gamma_samples, candidates) for p in suite)
    if not a2.passed:
        verdict = "not instantiated (A2 fails)"
    elif not lemma1.passed:
        verdict = "not instantiated (Lemma 1 fails)"
    elif any(o.t_kappa is None or not o.t_kappa_within_horizon for o in outcomes):
        verdict = "not instantiated (horizon below T_kappa)"
    elif all(o.exited and o.invariance_violated and o.exit_confirmed for o in outcomes):
        verdict = THEOREM_INSTANTIATED
    else:
        missing = [o.policy_id for o in outcomes if not (o.exited and o.invariance_violated)]
        verdict = f"not instantiated (reachability not certified for {', '.join(missing)})"
    return HarnessReport(outcomes, verdict)
