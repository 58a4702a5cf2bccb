"""End-to-end runs over one scenario: premise certificates, threshold,
impossibility harness, requirement audits and parameter sweeps."""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .certificates import WORLD_PREMISES, Certificate
from .channels import check_h2_monotone, probe_h1_continuity
from .errors import BracketError, ConfigError
from .intrinsic import (
    check_r1_no_external,
    check_r2_genesis,
    check_r3_invariance,
    check_r4_scaling,
    classify_strategy,
    zero_policy_rerun,
)
from .policies import verify_policy_bound
from .safe_set import sample_boundary_region
from .scenario import Scenario
from .simulator import HarnessReport, a3_candidates, certify_a3, simulate, theorem1_harness
from .streams import stream
from .supercritical import (
    BRACKET_GRID_POINTS,
    Threshold,
    certify_a2,
    find_kappa_star,
    kappa_grid_for,
    lemma1_certificate,
    time_grid_for,
)

CHECKS = ("a1", "a2", "a3", "h1", "h2", "lemma1")
H1_KAPPA_POINTS = 8


def gamma_samples(scen: Scenario, count: int | None = None) -> np.ndarray:
    return sample_boundary_region(
        scen.safe_set, scen.gamma, count or scen.numerics.gamma_samples, scen.numerics.seed
    )


def _interior(scen: Scenario, count: int, label: str) -> np.ndarray:
    return scen.safe_set.sample_interior(count, stream(scen.numerics.seed, label))


def _stamp(cert: Certificate, scen: Scenario) -> Certificate:
    params = {"seed": scen.numerics.seed, **cert.parameters}
    return dataclasses.replace(cert, parameters=params, declarations={**scen.declarations, **cert.declarations})


def threshold(scen: Scenario, X=None) -> Threshold:
    return find_kappa_star(scen, gamma_samples(scen) if X is None else X)


def _threshold_or_none(scen: Scenario, X) -> tuple[Threshold | None, str | None]:
    try:
        return find_kappa_star(scen, X), None
    except BracketError as exc:
        return None, str(exc)


def _certify_a1(scen: Scenario, X) -> Certificate:
    states = np.vstack([_interior(scen, scen.numerics.policy_audit_samples, "policy-audit"), X])
    times = scen.drift_time_grid()
    rows, ok = [], True
    for p in (scen.policy, *scen.suite):
        chk = verify_policy_bound(p, scen.context, states, times)
        rows.append({"policy": p.id, "u_max": p.u_max, "max_norm": chk.max_norm, "clips": chk.clips})
        ok &= chk.ok
    ok &= scen.policy.u_max <= scen.u_max
    return Certificate(
        "A1",
        "pass" if ok else "fail",
        f"authority bound held on {len(states) * len(times)} evaluations per policy ({len(rows)} policies)",
        evidence={"policies": rows, "scenario_u_max": scen.u_max},
        caveats=("bound enforced by radial clipping; checked on sampled states",),
    )


def _certify_h2(scen: Scenario, X) -> Certificate:
    lo, hi = scen.numerics.kappa_bracket
    states = np.vstack([X, _interior(scen, scen.numerics.h_probe_samples, "admissibility")])
    chk = check_h2_monotone(scen.endogenous, states, np.linspace(lo, hi, BRACKET_GRID_POINTS))
    return Certificate(
        "H2",
        "pass" if chk.ok else "fail",
        "norm of h non-decreasing in capability on the grid" if chk.ok else f"norm of h decreases: {chk.violation}",
        evidence={"violation": chk.violation, "states": len(states), "kappa_range": [lo, hi]},
    )


def _certify_h1(scen: Scenario, X) -> Certificate:
    lo, hi = scen.numerics.kappa_bracket
    k = scen.numerics.h_probe_samples
    states = np.vstack([X[:k], _interior(scen, k, "admissibility")])
    probe = probe_h1_continuity(scen.endogenous, states, np.linspace(lo, hi, H1_KAPPA_POINTS), scen.numerics.h_probe_delta)
    return Certificate(
        "H1",
        "fail" if probe.flagged else "pass",
        (
            f"likely discontinuity: variation {probe.max_variation:.3g} under step {probe.delta:g}"
            if probe.flagged
            else f"probe passed (max variation {probe.max_variation:.3g})"
        ),
        evidence=probe._asdict(),
        caveats=("falsification probe only; passing does not prove continuity",),
    )


def _a2_and_threshold(scen: Scenario, X) -> tuple[Certificate, Threshold | None]:
    thr, err = _threshold_or_none(scen, X)
    t_start = thr.t_kappa if thr and thr.t_kappa is not None else 0.0
    cert = certify_a2(scen, kappa_grid_for(scen, t_start), X)
    ev = dict(cert.evidence)
    ev["threshold"] = thr.as_dict() if thr else {"error": err}
    summary = cert.summary
    verdict = cert.verdict
    if thr is None or thr.t_kappa is None:
        verdict = "fail"
        summary = f"capability threshold never reached; {summary}"
    return dataclasses.replace(cert, verdict=verdict, summary=summary, evidence=ev), thr


def _lemma1(scen: Scenario, X, a2: Certificate, thr: Threshold | None) -> Certificate:
    t_start = thr.t_kappa if thr and thr.t_kappa is not None else 0.0
    return lemma1_certificate(scen, X, time_grid_for(scen, t_start), a2)


def certify(scen: Scenario, checks: Sequence[str] = CHECKS) -> list[Certificate]:
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks: {', '.join(unknown)}")
    X = gamma_samples(scen)
    out = []
    a2 = thr = None
    for name in CHECKS:
        if name not in checks:
            continue
        if name == "a1":
            out.append(_certify_a1(scen, X))
        elif name == "h1":
            out.append(_certify_h1(scen, X))
        elif name == "h2":
            out.append(_certify_h2(scen, X))
        elif name in ("a2", "a3", "lemma1") and a2 is None:
            a2, thr = _a2_and_threshold(scen, X)
        if name == "a2":
            out.append(a2)
        elif name == "a3":
            t_k = thr.t_kappa if thr else None
            reach = certify_a3(scen, scen.policy, a3_candidates(scen), t_k)
            out.append(reach.as_certificate(scen.numerics.seed))
        elif name == "lemma1":
            out.append(_lemma1(scen, X, a2, thr))
    return [_stamp(c, scen) for c in out]


def harness(scen: Scenario) -> tuple[list[Certificate], HarnessReport]:
    X = gamma_samples(scen)
    a2, thr = _a2_and_threshold(scen, X)
    lemma1 = _lemma1(scen, X, a2, thr)
    suite = scen.suite or (scen.policy,)
    rep = theorem1_harness(scen, suite, X, a2, lemma1)
    th = rep.as_certificate({"suite": [p.id for p in suite], "horizon": scen.numerics.horizon})
    th = dataclasses.replace(th, declarations=dict(WORLD_PREMISES))
    return [_stamp(c, scen) for c in (a2, lemma1, th)], rep


def _not_checkable(check_id: str, why: str) -> Certificate:
    return Certificate(check_id, "not-checkable", why)


def requirements(scen: Scenario) -> list[Certificate]:
    r1 = check_r1_no_external(scen)
    if scen.strategy is not None:
        cls = classify_strategy(scen.strategy)
        ev = {**r1.evidence, "strategy_class": cls.strategy_class, "rationale": cls.rationale,
              "class_mismatch": cls.mismatch}
        r1 = dataclasses.replace(r1, evidence=ev)
    out = [r1]
    if scen.phi is None:
        out.append(_not_checkable("R2", "no internal-configuration set declared"))
        out.append(_not_checkable("R3", "no internal-configuration set declared"))
    else:
        out.append(check_r2_genesis(scen.initial_state, scen.partition, scen.phi))
        traj = simulate(zero_policy_rerun(scen), stop_on_exit=False)
        out.append(check_r3_invariance(traj, scen.partition, scen.phi))
    if len(scen.kappa_levels) >= 2:
        out.append(check_r4_scaling(scen, scen.kappa_levels))
    else:
        out.append(_not_checkable("R4", "fewer than two capability levels declared"))
    return [_stamp(c, scen) for c in out]


def any_failed(certs: Sequence[Certificate]) -> bool:
    return any(c.failed for c in certs)
