"""Certificate records shared by every check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

STRICTNESS_FLOOR = 1e-9

CHECK_IDS = ("A1", "A2", "A3", "H1", "H2", "Lemma1", "Theorem1", "R1", "R2", "R3", "R4")
VERDICTS = ("pass", "fail", "not-checkable")

#: numerical conventions echoed into every certificate
TOLERANCES = {
    "boundary_band": 1e-9,
    "gradient_floor": 1e-9,
    "normal_band": 1e-6,
    "finite_difference_step": 1e-6,
    "strictness_floor": STRICTNESS_FLOOR,
    "monotone_tol": 1e-12,
    "kappa_bisection_tol": 1e-6,
    "t_kappa_bisection_tol": 1e-9,
    "event_time_tol": 1e-9,
    "policy_bound_slack": 1e-9,
}

#: premises taken on assertion, never computed
WORLD_PREMISES = {
    "E1": "capability ceilings cannot be guaranteed (declared, not checkable)",
    "E4": "at least one intrinsic candidate remains (declared, not checkable)",
}


class MarginSample(NamedTuple):
    """Boundary-gap evaluation at one boundary point and capability level."""

    x_b: tuple
    kappa: float
    inward_authority: float
    outward_component: float
    margin: float

    def consistent(self, tol: float = 1e-12) -> bool:
        return abs(self.outward_component - self.inward_authority - self.margin) <= tol

    def as_dict(self) -> dict:
        return {
            "x_b": list(self.x_b),
            "kappa": self.kappa,
            "inward_authority": self.inward_authority,
            "outward_component": self.outward_component,
            "margin": self.margin,
        }


@dataclass(frozen=True)
class Certificate:
    """Outcome of one premise, lemma or requirement audit."""

    check_id: str
    verdict: str
    summary: str
    margins: tuple = ()
    evidence: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    declarations: dict = field(default_factory=dict)
    caveats: tuple = ()

    def __post_init__(self):
        if self.check_id not in CHECK_IDS:
            raise ValueError(f"unknown check id {self.check_id!r}")
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "pass" and any(m.margin <= STRICTNESS_FLOOR for m in self.margins):
            raise ValueError("a passing certificate cannot carry non-positive margins")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def failed(self) -> bool:
        return self.verdict == "fail"

    def as_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "verdict": self.verdict,
            "summary": self.summary,
            "margins": [m.as_dict() for m in self.margins],
            "evidence": to_plain(self.evidence),
            "parameters": to_plain({"tolerances": TOLERANCES, **self.parameters}),
            "declarations": to_plain(self.declarations),
            "caveats": list(self.caveats),
        }


def to_plain(obj):
    """Recursively convert numpy values and tuples to JSON-friendly types."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        if hasattr(obj, "_asdict"):
            return to_plain(obj._asdict())
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj
