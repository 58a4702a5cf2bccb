"""Causal bounded external-control policies.

A policy sees only the current time, the current state and a by-value
summary of the past (:class:`History`); nothing in the call signature can
reach future states. Every evaluation goes through :func:`evaluate_policy`,
which enforces ``||B u|| <= u_max`` by radial clipping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .channels import ControlChannel
from .errors import ConfigError, DomainError, PolicyError
from .safe_set import SafeSet

POLICY_KINDS = ("zero", "constant", "restoring-optimal", "aggregate", "custom")
UNIT_TOL = 1e-9
PROJECTION_FLOOR = 1e-12
BOUND_SLACK = 1e-9
#: default activation band (in level-function units) of the restoring policy
RESTORING_BAND = 0.05


class History(NamedTuple):
    """Summary of the past passed to a policy: the previous sample only."""

    steps: int = 0
    t_prev: float | None = None
    x_prev: tuple | None = None
    u_prev: tuple | None = None


class PolicyContext(NamedTuple):
    control: ControlChannel
    safe_set: SafeSet | None = None


class ClipEvent(NamedTuple):
    t: float
    policy_id: str
    norm_before: float
    u_max: float


@dataclass(frozen=True, eq=False)
class Policy:
    """External-control policy with authority bound ``u_max`` on ||B u||.

    ``params``: ``u0`` for ``constant``; ``band`` for ``restoring-optimal``
    (the policy acts where g(x) >= -band; ``None`` means everywhere).
    ``custom`` policies supply ``law(t, x, history, context)``.
    """

    kind: str
    u_max: float
    params: dict = field(default_factory=dict)
    children: tuple = ()
    law: Callable | None = None
    id: str = ""

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        if not (np.isfinite(self.u_max) and self.u_max > 0):
            raise ConfigError(f"policy authority bound must be finite and > 0, got {self.u_max}")
        if self.kind == "constant":
            if "u0" not in self.params:
                raise ConfigError("constant policy needs u0")
            u0 = np.atleast_1d(np.asarray(self.params["u0"], dtype=float))
            object.__setattr__(self, "params", {**self.params, "u0": u0})
        if self.kind == "restoring-optimal":
            band = self.params.get("band", RESTORING_BAND)
            if band is not None and not band > 0:
                raise ConfigError("restoring band must be > 0 or null")
            object.__setattr__(self, "params", {**self.params, "band": band})
        if self.kind == "aggregate" and not self.children:
            raise ConfigError("aggregate policy needs at least one child")
        if self.kind == "custom" and self.law is None:
            raise ConfigError("custom policy needs a law callable")
        if not self.id:
            object.__setattr__(self, "id", self.kind)

    @classmethod
    def zero(cls, u_max: float = 1.0, id: str = "zero") -> Policy:
        return cls("zero", u_max, id=id)

    @classmethod
    def constant(cls, u0, u_max: float, id: str = "constant") -> Policy:
        return cls("constant", u_max, {"u0": u0}, id=id)

    @classmethod
    def restoring(cls, u_max: float, band: float | None = RESTORING_BAND, id: str = "restoring-optimal") -> Policy:
        return cls("restoring-optimal", u_max, {"band": band}, id=id)

    @classmethod
    def custom(cls, law: Callable, u_max: float, id: str = "custom") -> Policy:
        return cls("custom", u_max, law=law, id=id)


def restoring_optimal_control(B: ControlChannel, n, u_max: float) -> np.ndarray:
    """Control minimizing <B u, n> subject to ||B u|| <= u_max.

    The minimizer sets B u to ``-u_max`` times the unit projection of ``n``
    onto range(B). When ``n`` is orthogonal to range(B) no control moves the
    state along ``n`` and zero is returned.
    """
    n = np.asarray(n, dtype=float)
    if abs(float(np.linalg.norm(n)) - 1.0) > UNIT_TOL:
        raise DomainError("restoring control needs a unit normal")
    r = B.project(n)
    r_norm = float(np.linalg.norm(r))
    if r_norm <= PROJECTION_FLOOR:
        return np.zeros(B.m)
    return B.pinv @ (-u_max * r / r_norm)


def _raw_control(p: Policy, t: float, x: np.ndarray, history: History, ctx: PolicyContext, clip_log) -> np.ndarray:
    m = ctx.control.m
    if p.kind == "zero":
        return np.zeros(m)
    if p.kind == "constant":
        return p.params["u0"].copy()
    if p.kind == "restoring-optimal":
        s = ctx.safe_set
        if s is None:
            raise PolicyError("restoring policy needs the safe set in its context")
        band = p.params["band"]
        if band is not None and s.level(x) < -band:
            return np.zeros(m)
        normal = s.unit_gradient(x)
        if normal is None:
            return np.zeros(m)
        return restoring_optimal_control(ctx.control, normal, p.u_max)
    if p.kind == "aggregate":
        total = np.zeros(m)
        for child in p.children:
            total = total + evaluate_policy(child, t, x, history, ctx, clip_log)
        return total
    return np.atleast_1d(np.asarray(p.law(t, x, history, ctx), dtype=float))


def evaluate_policy(
    p: Policy,
    t: float,
    x,
    history: History,
    context: PolicyContext,
    clip_log: list | None = None,
) -> np.ndarray:
    """Evaluate ``p`` and enforce its authority bound.

    Candidates with ||B u|| > u_max are scaled radially onto the bound and a
    :class:`ClipEvent` is appended to ``clip_log`` when one is given.
    """
    if not t >= 0:
        raise DomainError(f"policy evaluated at negative time {t}")
    x = np.asarray(x, dtype=float)
    u = _raw_control(p, t, x, history, context, clip_log)
    if u.shape != (context.control.m,):
        raise PolicyError(f"policy {p.id!r} returned control of shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise PolicyError(f"policy {p.id!r} returned a non-finite control")
    norm = float(np.linalg.norm(context.control.B @ u))
    if norm > p.u_max:
        u = u * (p.u_max / norm)
        if clip_log is not None:
            clip_log.append(ClipEvent(float(t), p.id, norm, p.u_max))
    return u


def aggregate_policies(children: Sequence[Policy], id: str = "aggregate") -> Policy:
    """Sum of child controls, bounded by the sum of child bounds."""
    children = tuple(children)
    if not children:
        raise ConfigError("cannot aggregate an empty list of policies")
    return Policy("aggregate", float(sum(c.u_max for c in children)), children=children, id=id)


def is_provably_zero(p: Policy | None) -> bool:
    if p is None or p.kind == "zero":
        return True
    if p.kind == "constant":
        return not np.any(p.params["u0"])
    if p.kind == "aggregate":
        return all(is_provably_zero(c) for c in p.children)
    return False


class BoundCheck(NamedTuple):
    ok: bool
    max_norm: float
    clips: int


def verify_policy_bound(
    p: Policy,
    context: PolicyContext,
    sample_states,
    time_grid: Sequence[float],
    enforce: bool = True,
) -> BoundCheck:
    """Largest ||B u|| over a grid of states and times.

    With ``enforce=False`` the policy's law is queried directly, bypassing
    the clipping layer; that mode exists to expose misbehaving laws.
    """
    X = np.atleast_2d(np.asarray(sample_states, dtype=float))
    if X.shape[0] == 0:
        raise ConfigError("policy bound check needs state samples")
    clips: list = []
    worst = 0.0
    for t in time_grid:
        for x in X:
            if enforce:
                u = evaluate_policy(p, float(t), x, History(), context, clips)
            else:
                u = _raw_control(p, float(t), x, History(), context, clips)
            worst = max(worst, float(np.linalg.norm(context.control.B @ u)))
    return BoundCheck(worst <= p.u_max + BOUND_SLACK, worst, len(clips))
