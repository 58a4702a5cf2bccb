"""Trajectory CSV and certificate reports.

Both report formats render the same in-memory record; the text form only
reads fields that the JSON form also carries.
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .certificates import TOLERANCES, WORLD_PREMISES, Certificate, to_plain
from .errors import ConfigError
from .simulator import Trajectory
from .streams import STREAM_LABELS

REPORT_FORMATS = ("human-text", "machine-json")
REPORT_SCHEMA = "invlab-report/1"

NARRATIVE_EXTERNAL_FAILS = "externally enforced class fails on this instance; premises certified numerically"
NARRATIVE_SUBCRITICAL = "subcritical regime; Theorem 1 not instantiated"


def _g17(v: float) -> str:
    return "%.17g" % v


def trajectory_csv(traj: Trajectory) -> str:
    if len(traj) == 0:
        raise ConfigError("cannot emit an empty trajectory")
    n, m = traj.x.shape[1], traj.u.shape[1]
    buf = io.StringIO()
    header = ["t", *(f"x_{i}" for i in range(n)), "kappa", *(f"u_{j}" for j in range(m)), "g"]
    buf.write(",".join(header) + "\n")
    for i in range(len(traj)):
        row = [traj.t[i], *traj.x[i], traj.kappa[i], *traj.u[i], traj.g[i]]
        buf.write(",".join(_g17(v) for v in row) + "\n")
    for ev in traj.events:
        buf.write(",".join(["# event", ev.kind, _g17(ev.t), *(_g17(v) for v in ev.state)]) + "\n")
    return buf.getvalue()


def emit_trajectory_csv(traj: Trajectory, path) -> None:
    text = trajectory_csv(traj)
    Path(path).write_text(text)


def read_trajectory_csv(path) -> tuple[list[str], np.ndarray, list[list[str]]]:
    """Parse an emitted CSV back into (header, samples, event rows)."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if not ln.startswith("#")]
    events = [ln.split(",")[1:] for ln in lines[1:] if ln.startswith("# event")]
    return header, np.array(rows, dtype=float).reshape(-1, len(header)), events


def narrative(certs: Sequence[Certificate]) -> str:
    by_id = {c.check_id: c for c in certs}
    a2, l1, th = by_id.get("A2"), by_id.get("Lemma1"), by_id.get("Theorem1")
    if a2 is not None and a2.failed:
        return NARRATIVE_SUBCRITICAL
    if a2 and l1 and th and a2.passed and l1.passed and th.passed:
        return NARRATIVE_EXTERNAL_FAILS
    if th is not None and not th.passed:
        return f"Theorem 1 not instantiated: {th.evidence.get('verdict', th.summary)}"
    failed = [c.check_id for c in certs if c.failed]
    if failed:
        return f"{len(failed)} of {len(certs)} checks failed: {', '.join(failed)}"
    return f"all {len(certs)} checks passed or were not checkable"


def build_report(certs: Sequence[Certificate], meta: dict | None = None) -> dict:
    """The single record both report formats are rendered from."""
    certs = list(certs)
    if not certs:
        raise ConfigError("report needs at least one certificate")
    meta = dict(meta or {})
    return to_plain(
        {
            "schema": REPORT_SCHEMA,
            "scenario": meta.pop("scenario", None),
            "fingerprint": meta.pop("fingerprint", None),
            "seed": meta.pop("seed", None),
            "stream_scheme": {
                "method": "SeedSequence(entropy=seed, spawn_key=(crc32(label),))",
                "labels": list(STREAM_LABELS),
            },
            "tolerances": TOLERANCES,
            "world_premises": WORLD_PREMISES,
            "narrative": narrative(certs),
            "table": [[c.check_id, c.verdict, c.summary] for c in certs],
            "certificates": [c.as_dict() for c in certs],
            "meta": meta,
        }
    )


def render_text(record: dict) -> str:
    rows = record["table"]
    w_id = max(len("check"), *(len(r[0]) for r in rows))
    w_v = max(len("verdict"), *(len(r[1]) for r in rows))
    out = []
    if record.get("scenario"):
        out.append(f"scenario: {record['scenario']}   seed: {record['seed']}")
    out.append(f"{'check':<{w_id}}  {'verdict':<{w_v}}  summary")
    out.append(f"{'-' * w_id}  {'-' * w_v}  {'-' * 7}")
    out.extend(f"{r[0]:<{w_id}}  {r[1]:<{w_v}}  {r[2]}" for r in rows)
    out.append("")
    out.append(f"narrative: {record['narrative']}")
    caveats = []
    for cert in record["certificates"]:
        caveats.extend(c for c in cert["caveats"] if c not in caveats)
    if caveats:
        out.append("caveats:")
        out.extend(f"  - {c}" for c in caveats)
    if any(c["check_id"] == "Theorem1" for c in record["certificates"]):
        out.append("declared premises (not checkable):")
        out.extend(f"  {k}: {v}" for k, v in record["world_premises"].items())
    return "\n".join(out) + "\n"


def render_json(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def render_report(certs: Sequence[Certificate], fmt: str, meta: dict | None = None) -> str:
    if fmt not in REPORT_FORMATS:
        raise ConfigError(f"unknown report format {fmt!r}")
    record = build_report(certs, meta)
    return render_text(record) if fmt == "human-text" else render_json(record)


def emit_certificate_report(certs: Sequence[Certificate], fmt: str, path, meta: dict | None = None) -> None:
    Path(path).write_text(render_report(certs, fmt, meta))
