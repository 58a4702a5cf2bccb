"""Runtime scenario: one complete, validated model instance."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channels import ControlChannel, Drift, EndogenousChannel
from .errors import ConfigError, DimensionError
from .policies import Policy, PolicyContext
from .safe_set import (
    BoundaryRegion,
    DriftBound,
    SafeSet,
    audit_drift_bound,
    estimate_drift_bound,
)
from .state_model import CapabilitySchedule, StatePartition


@dataclass(frozen=True)
class Numerics:
    dt: float = 1e-3
    horizon: float = 10.0
    seed: int = 0
    gamma_samples: int = 64
    kappa_bracket: tuple = (0.0, 100.0)
    a2_grid_points: int = 16
    lemma1_time_points: int = 16
    t_kappa_search: float = 1e6
    drift_samples: int = 2000
    drift_time_points: int = 5
    drift_audit_samples: int = 1000
    policy_audit_samples: int = 200
    h_probe_delta: float = 1e-6
    h_probe_samples: int = 32
    a3_random_candidates: int = 0
    confirm_steps: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("numerics.dt must be > 0")
        if not self.horizon > 0:
            raise ConfigError("numerics.horizon must be > 0")
        lo, hi = self.kappa_bracket
        if not 0 <= lo < hi:
            raise ConfigError("numerics.kappa_bracket must satisfy 0 <= lo < hi")


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything needed to simulate and certify one instance.

    ``u_max`` is the authority bound asserted for external control. The
    drift bound is either declared (``drift_bound``) or estimated lazily by
    sampling; see :attr:`mf`.
    """

    partition: StatePartition
    safe_set: SafeSet
    drift: Drift
    control: ControlChannel
    u_max: float
    endogenous: EndogenousChannel
    capability: CapabilitySchedule
    policy: Policy
    initial_state: np.ndarray
    gamma: BoundaryRegion = field(default_factory=BoundaryRegion)
    numerics: Numerics = field(default_factory=Numerics)
    drift_bound: DriftBound | None = None
    suite: tuple = ()
    phi: object = None
    strategy: object = None
    a3_candidates: tuple = ()
    kappa_levels: tuple = ()
    declarations: dict = field(default_factory=dict)
    name: str = "scenario"

    def __post_init__(self):
        n = self.partition.n
        x0 = np.atleast_1d(np.asarray(self.initial_state, dtype=float))
        object.__setattr__(self, "initial_state", x0)
        dims = {
            "safe_set": self.safe_set.dim,
            "drift": self.drift.n,
            "control.B rows": self.control.n,
            "endogenous.G rows": self.endogenous.n,
            "initial_state": x0.shape[0],
        }
        bad = {k: v for k, v in dims.items() if v != n}
        if bad:
            raise DimensionError(f"dimension mismatch with n={n}: {bad}")
        if not (np.isfinite(self.u_max) and self.u_max > 0):
            raise ConfigError("u_max must be finite and > 0")
        if self.policy.u_max > self.u_max + 1e-12:
            raise ConfigError("deployed policy bound exceeds the scenario authority bound u_max")

    def replace(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)

    @property
    def context(self) -> PolicyContext:
        return PolicyContext(self.control, self.safe_set)

    def drift_time_grid(self) -> list[float]:
        return np.linspace(0.0, self.numerics.horizon, self.numerics.drift_time_points).tolist()

    @cached_property
    def mf(self) -> DriftBound:
        """Declared drift bound, or a sampled estimate (computed once)."""
        if self.drift_bound is not None:
            return self.drift_bound
        if self.drift.kind == "zero":
            return DriftBound(0.0, "sampled", 0, 1.1, 0.0)
        return estimate_drift_bound(
            self.drift,
            self.safe_set,
            self.drift_time_grid(),
            self.numerics.drift_samples,
            self.numerics.seed,
        )

    def drift_audit(self):
        return audit_drift_bound(
            self.drift,
            self.safe_set,
            self.mf,
            self.drift_time_grid(),
            self.numerics.drift_audit_samples,
            self.numerics.seed,
        )

    def with_u_max(self, u_max: float) -> Scenario:
        """Same instance asserting a different authority bound."""
        policy = self.policy
        if policy.u_max > u_max:
            policy = Policy.zero(u_max)
        return self.replace(u_max=float(u_max), policy=policy, drift_bound=self.mf)
