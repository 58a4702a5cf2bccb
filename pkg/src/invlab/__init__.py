"""Numerical checks of when bounded external control cannot keep a system
with growing endogenous outward dynamics inside its safe set."""

from .certificates import Certificate, MarginSample
from .channels import ControlChannel, Drift, EndogenousChannel
from .document import ScenarioDocument, load_validate, loads, serialize
from .errors import (
    ConfigError,
    DivergenceError,
    InvlabError,
    OrderingError,
    ScenarioError,
)
from .intrinsic import PhiPredicate, StrategyDeclaration, classify_strategy
from .policies import Policy, aggregate_policies, evaluate_policy, restoring_optimal_control
from .safe_set import BoundaryRegion, DriftBound, SafeSet
from .scenario import Numerics, Scenario
from .simulator import simulate, theorem1_harness
from .state_model import CapabilitySchedule, StatePartition
from .supercritical import certify_a2, find_kappa_star, lemma1_certificate

__all__ = [
    "BoundaryRegion",
    "CapabilitySchedule",
    "Certificate",
    "ConfigError",
    "ControlChannel",
    "DivergenceError",
    "Drift",
    "DriftBound",
    "EndogenousChannel",
    "InvlabError",
    "MarginSample",
    "Numerics",
    "OrderingError",
    "PhiPredicate",
    "Policy",
    "Scenario",
    "ScenarioDocument",
    "ScenarioError",
    "SafeSet",
    "StatePartition",
    "StrategyDeclaration",
    "aggregate_policies",
    "certify_a2",
    "classify_strategy",
    "evaluate_policy",
    "find_kappa_star",
    "lemma1_certificate",
    "load_validate",
    "loads",
    "restoring_optimal_control",
    "serialize",
    "simulate",
    "theorem1_harness",
]
