"""Scenario files: YAML text checked against a strict schema, then
cross-checked for dimensional consistency, then built into a Scenario.

Only built-in kinds are expressible in a file; custom callables go
through the Python API. Matrices are row-major nested lists.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from jsonschema import Draft202012Validator

from .channels import ControlChannel, Drift, EndogenousChannel
from .errors import ConfigError, ScenarioError
from .policies import Policy, aggregate_policies
from .safe_set import BoundaryRegion, DriftBound, SafeSet
from .scenario import Numerics, Scenario
from .state_model import CapabilitySchedule, StatePartition

SCHEMA_VERSION = 1

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_policy = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["zero", "constant", "restoring-optimal", "aggregate"]},
        "id": {"type": "string", "minLength": 1},
        "u_max": _num,
        "u0": _vec,
        "band": {"type": ["number", "null"]},
        "children": {"type": "array", "items": {"$ref": "#/$defs/policy"}, "minItems": 1},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"policy": _policy},
    "type": "object",
    "additionalProperties": False,
    "required": [
        "schema_version", "dimension", "safe_set", "drift", "control",
        "endogenous", "capability", "initial_state",
    ],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "partition": _obj({"n_env": {"type": "integer", "minimum": 0}}, ["n_env"]),
        "safe_set": _obj(
            {
                "kind": {"enum": ["ball", "ellipsoid", "p-norm-ball"]},
                "center": _vec,
                "radius": _num,
                "axes": _vec,
                "p": {"type": "integer"},
            },
            ["kind", "center"],
        ),
        "drift": _obj({"kind": {"enum": ["zero", "linear"]}, "A": _mat, "bound": _num}, ["kind"]),
        "control": _obj({"B": _mat, "u_max": _num}, ["B", "u_max"]),
        "endogenous": _obj(
            {
                "G": _mat,
                "h": _obj(
                    {
                        "kind": {
                            "enum": [
                                "radial-outward", "linear-gain", "saturating-gain",
                                "target-seeking", "internal-drift",
                            ]
                        },
                        "center": _vec,
                        "gain": _mat,
                        "scale": _num,
                        "target": _vec,
                        "rate": _vec,
                    },
                    ["kind"],
                ),
            },
            ["G", "h"],
        ),
        "capability": _obj(
            {
                "kind": {"enum": ["constant", "linear", "logistic", "piecewise-linear"]},
                "level": _num,
                "kappa0": _num,
                "rate": _num,
                "L": _num,
                "k": _num,
                "t0": _num,
                "knots": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
            },
            ["kind"],
        ),
        "policy": {"$ref": "#/$defs/policy"},
        "suite": {"type": "array", "items": {"$ref": "#/$defs/policy"}},
        "gamma": _obj({"kind": {"enum": ["full", "halfspace"]}, "normal": _vec, "offset": _num}, ["kind"]),
        "phi": _obj(
            {
                "kind": {"enum": ["ball", "halfspace"]},
                "center": _vec,
                "radius": _num,
                "direction": _vec,
                "offset": _num,
            },
            ["kind"],
        ),
        "strategy": _obj(
            {
                "sustain_stage_policy": {"type": ["string", "null"]},
                "genesis_interventions": {"type": "array", "items": {"type": "string"}},
                "claimed_class": {"enum": ["externally-enforced", "intrinsic"]},
            },
            ["claimed_class"],
        ),
        "initial_state": _vec,
        "a3_candidates": {"type": "array", "items": _vec},
        "kappa_levels": {"type": "array", "items": _num},
        "declarations": {
            "type": "object",
            "additionalProperties": {"type": ["string", "number", "boolean"]},
        },
        "numerics": _obj(
            {
                "dt": _num,
                "horizon": _num,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "gamma_samples": {"type": "integer", "minimum": 1},
                "kappa_bracket": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "a2_grid_points": {"type": "integer", "minimum": 1},
                "lemma1_time_points": {"type": "integer", "minimum": 1},
                "t_kappa_search": _num,
                "drift_samples": {"type": "integer", "minimum": 1},
                "drift_time_points": {"type": "integer", "minimum": 1},
                "drift_audit_samples": {"type": "integer", "minimum": 1},
                "policy_audit_samples": {"type": "integer", "minimum": 1},
                "h_probe_delta": _num,
                "h_probe_samples": {"type": "integer", "minimum": 1},
                "a3_random_candidates": {"type": "integer", "minimum": 0},
                "confirm_steps": {"type": "integer", "minimum": 1},
            }
        ),
    },
}

_VALIDATOR = Draft202012Validator(SCHEMA)


@dataclass(frozen=True)
class ScenarioDocument:
    """Validated scenario file content (plain data, defaults not filled in)."""

    data: dict
    source: str = "<memory>"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.data["dimension"]

    @property
    def seed(self) -> int:
        return self.data.get("numerics", {}).get("seed", 0)

    def fingerprint(self) -> str:
        return fingerprint(self.data)

    def with_value(self, path: str, value) -> ScenarioDocument:
        """Copy with the dotted ``path`` set to ``value``, re-validated."""
        data = copy.deepcopy(self.data)
        set_path(data, path, value)
        return validate(data, self.source)

    def with_seed(self, seed: int) -> ScenarioDocument:
        return self.with_value("numerics.seed", int(seed))

    def build(self) -> Scenario:
        if "scenario" not in self._cache:
            self._cache["scenario"] = build(self)
        return self._cache["scenario"]


# paths ---------------------------------------------------------------


def _key(part: str):
    return int(part) if part.lstrip("-").isdigit() else part


def get_path(data, path: str):
    node = data
    for part in path.split("."):
        node = node[_key(part)]
    return node


def set_path(data: dict, path: str, value) -> None:
    parts = path.split(".")
    node = data
    for part in parts[:-1]:
        k = _key(part)
        if isinstance(node, dict):
            node = node.setdefault(k, {})
        else:
            node = node[k]
    node[_key(parts[-1])] = value


def fingerprint(data: dict) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def document_diff(a: dict, b: dict, prefix: str = "") -> list[str]:
    """Dotted paths at which two documents differ."""
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for k in sorted(set(a) | set(b), key=str):
            p = f"{prefix}.{k}" if prefix else str(k)
            if k not in a or k not in b:
                out.append(p)
            else:
                out.extend(document_diff(a[k], b[k], p))
        return out
    return [] if a == b else [prefix]


# validation ------------------------------------------------------------


def _schema_issues(data) -> list[tuple]:
    issues = []
    for err in sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(map(str, e.absolute_path))):
        path = ".".join(str(p) for p in err.absolute_path)
        issues.append(("schema", path, err.message))
    return issues


def _shape(a) -> tuple:
    return np.asarray(a, dtype=float).shape


def _policy_issues(pol: dict, path: str, m: int, ids: list) -> list[tuple]:
    issues = []
    ids.append(pol.get("id", pol["kind"]))
    if "u_max" in pol and not pol["u_max"] > 0:
        issues.append(("consistency", f"{path}.u_max", "policy u_max must be > 0"))
    if pol["kind"] == "constant":
        if "u0" not in pol:
            issues.append(("consistency", path, "constant policy needs u0"))
        elif len(pol["u0"]) != m:
            issues.append(("consistency", f"{path}.u0", f"u0 needs {m} entries (columns of B)"))
    if pol["kind"] == "aggregate":
        if "children" not in pol:
            issues.append(("consistency", path, "aggregate policy needs children"))
        if "u_max" in pol:
            issues.append(("consistency", f"{path}.u_max", "aggregate bound is the sum of child bounds"))
        for i, child in enumerate(pol.get("children", [])):
            issues.extend(_policy_issues(child, f"{path}.children.{i}", m, []))
    return issues


def _consistency_issues(d: dict) -> list[tuple]:
    n = d["dimension"]
    issues = []

    def need(cond, path, msg):
        if not cond:
            issues.append(("consistency", path, msg))

    n_env = d.get("partition", {}).get("n_env", n)
    need(n_env <= n, "partition.n_env", f"n_env must be <= dimension {n}")
    ss = d["safe_set"]
    need(len(ss["center"]) == n, "safe_set.center", f"center needs {n} entries")
    if ss["kind"] in ("ball", "p-norm-ball"):
        need(ss.get("radius", 0) > 0, "safe_set.radius", "radius must be > 0")
    if ss["kind"] == "ellipsoid":
        axes = ss.get("axes", [])
        need(len(axes) == n and all(a > 0 for a in axes), "safe_set.axes", f"axes needs {n} positive entries")
    if ss["kind"] == "p-norm-ball":
        p = ss.get("p", 0)
        need(p >= 2 and p % 2 == 0, "safe_set.p", "p must be an even integer >= 2")
    dr = d["drift"]
    if dr["kind"] == "linear":
        need("A" in dr and _shape(dr["A"]) == (n, n), "drift.A", f"A must be {n}x{n}")
    if "bound" in dr:
        need(dr["bound"] >= 0, "drift.bound", "declared drift bound must be >= 0")
    B = d["control"]["B"]
    need(len(B) == n, "control.B", f"B has {len(B)} rows, dimension is {n}")
    need(len({len(r) for r in B}) == 1, "control.B", "B rows differ in length")
    m = len(B[0])
    u_max = d["control"]["u_max"]
    need(u_max > 0, "control.u_max", "u_max must be > 0")
    en = d["endogenous"]
    G = en["G"]
    need(len(G) == n, "endogenous.G", f"G has {len(G)} rows, dimension is {n}")
    need(len({len(r) for r in G}) == 1, "endogenous.G", "G rows differ in length")
    k = len(G[0])
    h = en["h"]
    if h["kind"] != "linear-gain":
        need(k == n, "endogenous.G", f"h kind {h['kind']!r} needs G to be {n}x{n}")
    for key in ("center", "target"):
        if key in h:
            need(len(h[key]) == n, f"endogenous.h.{key}", f"{key} needs {n} entries")
    if h["kind"] == "target-seeking":
        need("target" in h, "endogenous.h", "target-seeking h needs a target")
    if "gain" in h:
        need(_shape(h["gain"]) == (k, n), "endogenous.h.gain", f"gain must be {k}x{n}")
    if h["kind"] == "internal-drift":
        need(len(h.get("rate", [])) == n - n_env, "endogenous.h.rate", f"rate needs {n - n_env} entries")
    need(len(d["initial_state"]) == n, "initial_state", f"initial_state needs {n} entries")
    for i, c in enumerate(d.get("a3_candidates", [])):
        need(len(c) == n, f"a3_candidates.{i}", f"candidate needs {n} entries")
    ga = d.get("gamma", {"kind": "full"})
    if ga["kind"] == "halfspace":
        need("normal" in ga and len(ga["normal"]) == n, "gamma.normal", f"normal needs {n} entries")
        need("offset" in ga, "gamma.offset", "halfspace region needs an offset")
    ids = []
    if "policy" in d:
        issues.extend(_policy_issues(d["policy"], "policy", m, ids))
        pol_u = d["policy"].get("u_max", u_max)
        if d["policy"]["kind"] != "aggregate":
            need(pol_u <= u_max, "policy.u_max", "deployed policy bound exceeds control.u_max")
    for i, pol in enumerate(d.get("suite", [])):
        issues.extend(_policy_issues(pol, f"suite.{i}", m, ids))
    st = d.get("strategy")
    if st and st.get("sustain_stage_policy") is not None:
        need(st["sustain_stage_policy"] in ids, "strategy.sustain_stage_policy", "unknown policy id")
    ph = d.get("phi")
    if ph:
        n_int = n - n_env
        if ph["kind"] == "ball":
            need(len(ph.get("center", [])) == n_int, "phi.center", f"center needs {n_int} entries (internal block)")
            need(ph.get("radius", 0) > 0, "phi.radius", "radius must be > 0")
        else:
            need(len(ph.get("direction", [])) == n_int, "phi.direction", f"direction needs {n_int} entries")
    lv = d.get("kappa_levels", [])
    need(all(b > a for a, b in zip(lv, lv[1:])), "kappa_levels", "levels must be strictly increasing")
    return issues


def validate(data, source: str = "<memory>") -> ScenarioDocument:
    """Validate plain data; raise :class:`ScenarioError` listing every issue."""
    issues = _schema_issues(data)
    if issues:
        raise ScenarioError(issues)
    issues = _consistency_issues(data)
    if issues:
        raise ScenarioError(issues)
    doc = ScenarioDocument(data, source)
    try:
        doc.build()
    except ConfigError as exc:
        raise ScenarioError([("consistency", "", str(exc))]) from exc
    return doc


def loads(text: str, source: str = "<string>") -> ScenarioDocument:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([("parse", "", str(exc))]) from exc
    return validate(data, source)


def load_validate(path) -> ScenarioDocument:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError([("io", str(path), exc.strerror or str(exc))]) from exc
    return loads(text, str(path))


def serialize(doc: ScenarioDocument) -> str:
    return yaml.safe_dump(doc.data, sort_keys=False, default_flow_style=None)


def dump(doc: ScenarioDocument, path) -> None:
    Path(path).write_text(serialize(doc))


# building --------------------------------------------------------------


def build_policy(pol: dict, u_max: float) -> Policy:
    kind = pol["kind"]
    pid = pol.get("id", kind)
    if kind == "aggregate":
        return aggregate_policies([build_policy(c, u_max) for c in pol["children"]], id=pid)
    bound = float(pol.get("u_max", u_max))
    if kind == "zero":
        return Policy.zero(bound, id=pid)
    if kind == "constant":
        return Policy.constant(pol["u0"], bound, id=pid)
    params = {"band": pol["band"]} if "band" in pol else {}
    return Policy("restoring-optimal", bound, params, id=pid)


def build(doc: ScenarioDocument) -> Scenario:
    from .intrinsic import PhiPredicate, StrategyDeclaration

    d = doc.data
    n = d["dimension"]
    ss = d["safe_set"]
    params = {k: v for k, v in ss.items() if k not in ("kind", "center")}
    safe = SafeSet(ss["kind"], ss["center"], params)
    dr = d["drift"]
    drift = Drift.linear(dr["A"]) if dr["kind"] == "linear" else Drift.zero(n)
    u_max = float(d["control"]["u_max"])
    h = dict(d["endogenous"]["h"])
    kind = h.pop("kind")
    n_env = d.get("partition", {}).get("n_env", n)
    if kind == "internal-drift":
        h["n_env"] = n_env
    cap = dict(d["capability"])
    cap_kind = cap.pop("kind")
    policy = build_policy(d["policy"], u_max) if "policy" in d else Policy.zero(u_max)
    suite = tuple(build_policy(s, u_max) for s in d.get("suite", []))
    ga = d.get("gamma", {"kind": "full"})
    gamma = BoundaryRegion(ga["kind"], {k: v for k, v in ga.items() if k != "kind"})
    phi = None
    if "phi" in d:
        ph = dict(d["phi"])
        phi = PhiPredicate(ph.pop("kind"), ph)
    strategy = None
    if "strategy" in d:
        st = d["strategy"]
        by_id = {p.id: p for p in (policy, *suite)}
        sid = st.get("sustain_stage_policy")
        strategy = StrategyDeclaration(
            by_id[sid] if sid is not None else None,
            tuple(st.get("genesis_interventions", [])),
            st["claimed_class"],
        )
    num = dict(d.get("numerics", {}))
    if "kappa_bracket" in num:
        num["kappa_bracket"] = tuple(num["kappa_bracket"])
    return Scenario(
        partition=StatePartition(n, n_env),
        safe_set=safe,
        drift=drift,
        control=ControlChannel(d["control"]["B"]),
        u_max=u_max,
        endogenous=EndogenousChannel(d["endogenous"]["G"], kind, h),
        capability=CapabilitySchedule(cap_kind, cap),
        policy=policy,
        initial_state=np.asarray(d["initial_state"], dtype=float),
        gamma=gamma,
        numerics=Numerics(**num),
        drift_bound=DriftBound.declared(dr["bound"]) if "bound" in dr else None,
        suite=suite,
        phi=phi,
        strategy=strategy,
        a3_candidates=tuple(np.asarray(c, dtype=float) for c in d.get("a3_candidates", [])),
        kappa_levels=tuple(float(k) for k in d.get("kappa_levels", [])),
        declarations=dict(d.get("declarations", {})),
        name=d.get("name", Path(doc.source).stem),
    )
