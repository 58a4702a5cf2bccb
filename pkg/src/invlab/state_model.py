"""State partition and closed-form capability schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, DomainError

MONOTONE_TOL = 1e-12
SCHEDULE_KINDS = ("constant", "linear", "logistic", "piecewise-linear")


def as_state(x, n: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite float vector, optionally of length ``n``."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"state must be a vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionError(f"state has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("state has non-finite coordinates")
    return arr


@dataclass(frozen=True)
class StatePartition:
    """Contiguous split of the state into environment and internal blocks.

    Indices ``[0, n_env)`` are the environment block and ``[n_env, n)`` the
    internal configuration.
    """

    n: int
    n_env: int

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.n}")
        if not 0 <= self.n_env <= self.n:
            raise ConfigError(f"n_env={self.n_env} outside [0, {self.n}]")

    @property
    def n_int(self) -> int:
        return self.n - self.n_env

    @property
    def internal_slice(self) -> slice:
        return slice(self.n_env, self.n)


def split_internal(x, p: StatePartition) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != p.n:
        raise DimensionError(f"state length {x.shape} does not match partition n={p.n}")
    return x[: p.n_env].copy(), x[p.n_env :].copy()


@dataclass(frozen=True)
class CapabilitySchedule:
    """Closed-form capability level kappa(t).

    ``params`` per kind:

    - ``constant``: ``level``
    - ``linear``: ``kappa0``, ``rate``
    - ``logistic``: ``L``, ``k``, ``t0`` with kappa = L / (1 + exp(-k (t - t0)))
    - ``piecewise-linear``: ``knots``, a sequence of ``(t, kappa)`` pairs with
      strictly increasing times; held constant outside the knot range.

    Construction checks signs; monotonicity is audited separately by
    :func:`verify_schedule_monotone` so that bad schedules can be reported
    rather than merely refused.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        k, p = self.kind, self.params
        if k not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown capability schedule kind {k!r}")
        if k == "constant":
            _need(p, "level")
            if p["level"] < 0:
                raise ConfigError("constant capability level must be >= 0")
        elif k == "linear":
            _need(p, "kappa0", "rate")
            if p["kappa0"] < 0 or p["rate"] < 0:
                raise ConfigError("linear schedule needs kappa0 >= 0 and rate >= 0")
        elif k == "logistic":
            _need(p, "L", "k", "t0")
            if p["L"] < 0 or p["k"] < 0:
                raise ConfigError("logistic schedule needs L >= 0 and k >= 0")
        else:
            _need(p, "knots")
            knots = [tuple(map(float, kn)) for kn in p["knots"]]
            if not knots:
                raise ConfigError("piecewise-linear schedule needs at least one knot")
            ts = [kn[0] for kn in knots]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ConfigError("piecewise-linear knot times must be strictly increasing")
            if any(kn[1] < 0 for kn in knots):
                raise ConfigError("piecewise-linear levels must be >= 0")
            object.__setattr__(self, "params", {**p, "knots": knots})

    @classmethod
    def constant(cls, level: float) -> CapabilitySchedule:
        return cls("constant", {"level": float(level)})

    @classmethod
    def linear(cls, kappa0: float, rate: float) -> CapabilitySchedule:
        return cls("linear", {"kappa0": float(kappa0), "rate": float(rate)})

    @classmethod
    def logistic(cls, L: float, k: float, t0: float) -> CapabilitySchedule:
        return cls("logistic", {"L": float(L), "k": float(k), "t0": float(t0)})

    @classmethod
    def piecewise(cls, knots: Sequence[tuple[float, float]]) -> CapabilitySchedule:
        return cls("piecewise-linear", {"knots": list(knots)})

    def __call__(self, t: float) -> float:
        return kappa_at(self, t)


def _need(params, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConfigError(f"missing schedule parameters: {', '.join(missing)}")


def kappa_at(schedule: CapabilitySchedule, t: float) -> float:
    if not t >= 0:  # also rejects NaN
        raise DomainError(f"capability queried at negative time t={t}")
    p = schedule.params
    kind = schedule.kind
    if kind == "constant":
        return float(p["level"])
    if kind == "linear":
        return float(p["kappa0"] + p["rate"] * t)
    if kind == "logistic":
        z = -p["k"] * (t - p["t0"])
        # overflow-safe for large |z|
        if z > 700:
            return 0.0
        return float(p["L"] / (1.0 + math.exp(z)))
    knots = p["knots"]
    if t <= knots[0][0]:
        return knots[0][1]
    for (t1, k1), (t2, k2) in zip(knots, knots[1:]):
        if t <= t2:
            return k1 + (k2 - k1) * (t - t1) / (t2 - t1)
    return knots[-1][1]


class MonotoneCheck(NamedTuple):
    ok: bool
    violation: tuple[float, float] | None = None


def verify_schedule_monotone(schedule: CapabilitySchedule, grid: Sequence[float]) -> MonotoneCheck:
    """Check kappa is non-decreasing across adjacent grid points.

    Returns the first violating time pair on failure.
    """
    grid = [float(t) for t in grid]
    if not grid:
        raise ConfigError("monotonicity grid is empty")
    if grid[0] < 0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("monotonicity grid must be strictly increasing and >= 0")
    values = [kappa_at(schedule, t) for t in grid]
    for i in range(len(grid) - 1):
        if values[i + 1] < values[i] - MONOTONE_TOL:
            return MonotoneCheck(False, (grid[i], grid[i + 1]))
    return MonotoneCheck(True)


def schedule_check_grid(schedule: CapabilitySchedule, horizon: float, points: int = 257) -> list[float]:
    """Grid covering ``[0, horizon]`` plus every knot of a piecewise schedule."""
    grid = set(np.linspace(0.0, horizon, points).tolist())
    if schedule.kind == "piecewise-linear":
        grid.update(t for t, _ in schedule.params["knots"] if t >= 0)
    return sorted(grid)


def first_time_at_least(
    schedule: CapabilitySchedule,
    level: float,
    t_max: float,
    tol: float = 1e-9,
) -> float | None:
    """Earliest t in ``[0, t_max]`` with kappa(t) >= level, or None.

    Bisection on the schedule; the returned time is the upper end of the
    final bracket, so ``kappa(result) >= level`` always holds.
    """
    if kappa_at(schedule, 0.0) >= level:
        return 0.0
    if kappa_at(schedule, t_max) < level:
        return None
    lo, hi = 0.0, float(t_max)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kappa_at(schedule, mid) >= level:
            hi = mid
        else:
            lo = mid
    return hi
