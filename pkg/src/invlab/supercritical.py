"""Boundary-gap margins, the capability threshold, and the pointwise
outward-velocity certificate.

The boundary gap at a point ``x_b`` of Gamma and capability ``kappa`` is

    margin = <G h(x_b, kappa), n(x_b)> - (U_max + M_f)

and the regime is supercritical where every sampled margin exceeds the
strictness floor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .certificates import STRICTNESS_FLOOR, Certificate, MarginSample
from .channels import check_h2_monotone
from .errors import BracketError, ConfigError, DomainError, OrderingError
from .policies import restoring_optimal_control
from .safe_set import outward_normal
from .scenario import Scenario
from .state_model import first_time_at_least, kappa_at

KAPPA_TOL = 1e-6
T_KAPPA_TOL = 1e-9
BRACKET_GRID_POINTS = 33

FINITE_GRID_CAVEAT = (
    "the for-all-later-times claim is checked on a finite capability grid and a finite "
    "sample of boundary points (surrogate, not proof)"
)
MEASURE_CAVEAT = (
    "positive surface measure of Gamma is replaced by the surrogate 'the sampler found "
    "boundary points satisfying the region predicate'"
)


def _normals(scenario: Scenario, gamma_samples) -> np.ndarray:
    X = np.atleast_2d(np.asarray(gamma_samples, dtype=float))
    if X.shape[0] == 0:
        raise ConfigError("no boundary-region samples supplied")
    return X, np.array([outward_normal(scenario.safe_set, x) for x in X])


def inward_authority(scenario: Scenario) -> float:
    return scenario.u_max + scenario.mf.value


def a2_margin(scenario: Scenario, x_b, kappa: float) -> MarginSample:
    x_b = np.asarray(x_b, dtype=float)
    if not scenario.gamma(x_b):
        raise DomainError(f"{x_b.tolist()} is not in the boundary region")
    n = outward_normal(scenario.safe_set, x_b)
    outward = float(scenario.endogenous.effect(x_b, kappa) @ n)
    authority = inward_authority(scenario)
    return MarginSample(tuple(x_b.tolist()), float(kappa), authority, outward, outward - authority)


def min_margin(scenario: Scenario, X: np.ndarray, N: np.ndarray, kappa: float) -> tuple[float, int]:
    """Smallest margin over boundary samples ``X`` with normals ``N``."""
    ch = scenario.endogenous
    outward = np.array([ch.effect(x, kappa) @ n for x, n in zip(X, N)])
    margins = outward - inward_authority(scenario)
    i = int(np.argmin(margins))
    return float(margins[i]), i


def _base_parameters(scenario: Scenario, n_samples: int) -> dict:
    return {
        "u_max": scenario.u_max,
        "drift_bound": scenario.mf.as_dict(),
        "gamma": scenario.gamma.description,
        "gamma_sample_count": n_samples,
        "seed": scenario.numerics.seed,
    }


def certify_a2(scenario: Scenario, kappa_grid: Sequence[float], gamma_samples) -> Certificate:
    """Certify the boundary gap at every (sample, grid capability) pair."""
    X, _ = _normals(scenario, gamma_samples)
    grid = [float(k) for k in kappa_grid]
    if not grid:
        raise ConfigError("empty capability grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError("capability grid must be non-decreasing")
    margins = [a2_margin(scenario, x, k) for k in grid for x in X]
    worst = min(margins, key=lambda m: m.margin)
    # per-sample margin must not decrease along the grid
    table = np.array([m.margin for m in margins]).reshape(len(grid), X.shape[0])
    monotone = bool(np.all(np.diff(table, axis=0) >= -1e-12))
    positive = worst.margin > STRICTNESS_FLOOR
    verdict = "pass" if positive and monotone else "fail"
    if not positive:
        summary = f"boundary gap not strictly positive: min margin {worst.margin:.6g} at kappa={worst.kappa:.6g}"
    elif not monotone:
        summary = "margin decreases along the capability grid; finite-grid certification unsound"
    else:
        summary = f"supercritical on all {len(margins)} (sample, kappa) pairs; min margin {worst.margin:.6g}"
    return Certificate(
        "A2",
        verdict,
        summary,
        margins=tuple(margins),
        evidence={
            "min_margin": worst.margin,
            "min_margin_at": worst.as_dict(),
            "margin_monotone_on_grid": monotone,
            "kappa_grid": grid,
            "failing_pairs": sum(m.margin <= STRICTNESS_FLOOR for m in margins),
        },
        parameters=_base_parameters(scenario, X.shape[0]),
        caveats=(FINITE_GRID_CAVEAT, MEASURE_CAVEAT),
    )


@dataclass(frozen=True)
class Threshold:
    """Capability threshold and the first time the schedule reaches it."""

    kappa_star: float
    t_kappa: float | None
    within_horizon: bool
    bracket: tuple
    iterations: int
    h2_ok: bool
    margin_monotone: bool

    @property
    def reached(self) -> bool:
        return self.t_kappa is not None

    def as_dict(self) -> dict:
        return {
            "kappa_star": self.kappa_star,
            "t_kappa": self.t_kappa,
            "t_kappa_status": (
                "never reached" if self.t_kappa is None else ("within horizon" if self.within_horizon else "beyond horizon")
            ),
            "bracket": list(self.bracket),
            "iterations": self.iterations,
            "h2_ok": self.h2_ok,
            "margin_monotone_on_bracket": self.margin_monotone,
        }


def threshold_time(scenario: Scenario, kappa_star: float) -> tuple[float | None, bool]:
    """First schedule time reaching ``kappa_star``; also whether it is within the horizon."""
    horizon = scenario.numerics.horizon
    t = first_time_at_least(scenario.capability, kappa_star, horizon, T_KAPPA_TOL)
    if t is not None:
        return t, True
    t = first_time_at_least(scenario.capability, kappa_star, max(horizon, scenario.numerics.t_kappa_search), T_KAPPA_TOL)
    return t, False


def find_kappa_star(scenario: Scenario, gamma_samples, bracket: Sequence[float] | None = None) -> Threshold:
    """Bisect on the smallest sampled margin to locate the threshold.

    Assumes a single sign change of the min-margin inside the bracket. A
    capability counts as supercritical when the min margin exceeds the
    strictness floor, and the returned threshold is the supercritical end
    of the final bracket.
    """
    X, N = _normals(scenario, gamma_samples)
    lo, hi = (float(b) for b in (bracket or scenario.numerics.kappa_bracket))
    if not 0 <= lo < hi:
        raise BracketError(f"invalid capability bracket [{lo}, {hi}]")
    grid = np.linspace(lo, hi, BRACKET_GRID_POINTS)
    h2 = check_h2_monotone(scenario.endogenous, X, grid)
    if not h2.ok:
        raise ConfigError(f"endogenous channel fails H2 on the bracket: {h2.violation}")
    grid_margins = [min_margin(scenario, X, N, k)[0] for k in grid]
    monotone = bool(np.all(np.diff(grid_margins) >= -1e-12))

    def supercritical(k):
        return min_margin(scenario, X, N, k)[0] > STRICTNESS_FLOOR

    if supercritical(lo) or not supercritical(hi):
        raise BracketError(
            f"bracket [{lo}, {hi}] does not contain the threshold "
            f"(min margins {grid_margins[0]:.6g}, {grid_margins[-1]:.6g})"
        )
    iterations = 0
    while hi - lo > KAPPA_TOL:
        mid = 0.5 * (lo + hi)
        if supercritical(mid):
            hi = mid
        else:
            lo = mid
        iterations += 1
    t_kappa, within = threshold_time(scenario, hi)
    return Threshold(hi, t_kappa, within, (lo, hi), iterations, True, monotone)


def outward_total(scenario: Scenario, x_b, t: float, u) -> float:
    """<f + B u + G h, n> at boundary point ``x_b`` and time ``t``."""
    x_b = np.asarray(x_b, dtype=float)
    n = outward_normal(scenario.safe_set, x_b)
    kappa = kappa_at(scenario.capability, t)
    v = scenario.drift(x_b, t) + scenario.control.B @ np.atleast_1d(u) + scenario.endogenous.effect(x_b, kappa)
    return float(v @ n)


def lemma1_certificate(scenario: Scenario, gamma_samples, t_grid: Sequence[float], a2: Certificate | None) -> Certificate:
    """Evaluate the total outward normal velocity under the worst admissible control.

    The worst case for the outward component is the restoring-optimal
    control at the boundary normal, so positivity there covers every
    control obeying the authority bound.
    """
    if a2 is None or a2.check_id != "A2":
        raise OrderingError("the boundary-gap (A2) certificate must be computed first")
    X, N = _normals(scenario, gamma_samples)
    times = [float(t) for t in t_grid]
    if not times:
        raise ConfigError("empty time grid")
    records = []
    for t in times:
        for x, n in zip(X, N):
            u = restoring_optimal_control(scenario.control, n, scenario.u_max)
            records.append((t, tuple(x.tolist()), outward_total(scenario, x, t, u)))
    values = np.array([r[2] for r in records])
    i = int(np.argmin(values))
    ok = bool(values[i] > STRICTNESS_FLOOR)
    caveats = [FINITE_GRID_CAVEAT]
    if not a2.passed:
        caveats.append("boundary-gap premise did not pass; the outward inequality is not expected to hold")
    return Certificate(
        "Lemma1",
        "pass" if ok else "fail",
        (
            f"total outward velocity positive under worst-case control at all {len(records)} points; "
            f"min {values[i]:.6g}"
            if ok
            else f"total outward velocity not strictly positive: min {values[i]:.6g} at t={records[i][0]:.6g}"
        ),
        evidence={
            "min_outward_total": float(values[i]),
            "max_outward_total": float(values.max()),
            "min_at": {"t": records[i][0], "x_b": list(records[i][1])},
            "a2_verdict": a2.verdict,
            "time_grid": times,
        },
        parameters=_base_parameters(scenario, X.shape[0]),
        caveats=tuple(caveats),
    )


def kappa_grid_for(scenario: Scenario, t_kappa: float, points: int | None = None) -> list[float]:
    """Capability values on an even time grid over ``[t_kappa, max(horizon, t_kappa)]``."""
    points = points or scenario.numerics.a2_grid_points
    t_end = max(scenario.numerics.horizon, t_kappa)
    return [kappa_at(scenario.capability, t) for t in np.linspace(t_kappa, t_end, points)]


def time_grid_for(scenario: Scenario, t_kappa: float, points: int | None = None) -> list[float]:
    points = points or scenario.numerics.lemma1_time_points
    return np.linspace(t_kappa, max(scenario.numerics.horizon, t_kappa), points).tolist()
