"""Command-line driver.

Exit codes: 0 success, 2 a certificate failed, 3 configuration or
validation error, 4 runtime divergence or other numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import yaml

from . import pipeline
from .certificates import to_plain
from .document import ScenarioDocument, load_validate
from .errors import ConfigError, DivergenceError, InvlabError
from .report import render_json, render_report, render_text, build_report
from .simulator import invariance_audit, simulate

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3, 4
SEED_ENV = "INVLAB_SEED"


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=f"override the scenario seed (env {SEED_ENV})")
    p.add_argument("--report", default=argparse.SUPPRESS, metavar="PATH", help="write a report file")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="invlab", parents=[common], description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="integrate one run and optionally write a CSV")
    s.add_argument("scenario")
    s.add_argument("--policy", metavar="ID", help="policy id from the scenario (default: deployed policy)")
    s.add_argument("--out", metavar="CSV")

    c = sub.add_parser("certify", parents=[common], help="premise and outward-velocity certificates")
    c.add_argument("scenario")
    c.add_argument("--checks", default=",".join(pipeline.CHECKS))

    t = sub.add_parser("threshold", parents=[common], help="capability threshold and first time reached")
    t.add_argument("scenario")

    h = sub.add_parser("harness", parents=[common], help="run the policy suite against the impossibility claim")
    h.add_argument("scenario")

    r = sub.add_parser("requirements", parents=[common], help="R1-R4 requirement audits")
    r.add_argument("scenario")

    w = sub.add_parser("sweep", parents=[common], help="repeat certification over values of one parameter")
    w.add_argument("scenario")
    w.add_argument("--param", required=True, metavar="PATH", help="dotted document path, e.g. control.u_max")
    w.add_argument("--values", required=True, metavar="LIST", help="comma-separated values")
    w.add_argument("--checks", default="a2,lemma1")
    return ap


def _load(args) -> ScenarioDocument:
    doc = load_validate(args.scenario)
    seed = getattr(args, "seed", None)
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    if seed is not None:
        doc = doc.with_seed(seed)
    return doc


def _meta(doc: ScenarioDocument, **extra) -> dict:
    return {"scenario": doc.data.get("name", doc.source), "fingerprint": doc.fingerprint(), "seed": doc.seed, **extra}


def _emit(args, certs, meta) -> None:
    as_json = getattr(args, "json", False)
    record = build_report(certs, meta)
    sys.stdout.write(render_json(record) if as_json else render_text(record))
    path = getattr(args, "report", None)
    if path:
        fmt = "machine-json" if as_json or path.endswith(".json") else "human-text"
        with open(path, "w") as fh:
            fh.write(render_report(certs, fmt, meta))


def _write_plain(args, payload: dict, text: str) -> None:
    blob = json.dumps(to_plain(payload), indent=2, sort_keys=True) + "\n"
    sys.stdout.write(blob if getattr(args, "json", False) else text)
    path = getattr(args, "report", None)
    if path:
        with open(path, "w") as fh:
            fh.write(blob)


def cmd_simulate(args) -> int:
    from .report import emit_trajectory_csv

    doc = _load(args)
    scen = doc.build()
    policy = scen.policy
    if args.policy:
        by_id = {p.id: p for p in (scen.policy, *scen.suite)}
        if args.policy not in by_id:
            raise ConfigError(f"unknown policy id {args.policy!r}; known: {', '.join(by_id)}")
        policy = by_id[args.policy]
    traj = simulate(scen, policy)
    if args.out:
        emit_trajectory_csv(traj, args.out)
    audit = invariance_audit(traj)
    payload = {"policy": policy.id, "samples": len(traj), "terminated": traj.terminated, **audit._asdict()}
    text = (
        f"policy {policy.id}: {len(traj)} samples, terminated at {traj.terminated}, "
        f"min(-g)={audit.min_neg_g:.6g}"
        + (f", exit at t={audit.exit_time:.9g}" if audit.exit_time is not None else "")
        + "\n"
    )
    _write_plain(args, payload, text)
    return EXIT_OK


def cmd_certify(args) -> int:
    doc = _load(args)
    checks = [c.strip().lower() for c in args.checks.split(",") if c.strip()]
    certs = pipeline.certify(doc.build(), checks)
    _emit(args, certs, _meta(doc))
    return EXIT_FAILED if pipeline.any_failed(certs) else EXIT_OK


def cmd_threshold(args) -> int:
    doc = _load(args)
    thr = pipeline.threshold(doc.build())
    d = thr.as_dict()
    t = "never reached" if thr.t_kappa is None else f"{thr.t_kappa:.12g} ({d['t_kappa_status']})"
    _write_plain(args, d, f"kappa* = {thr.kappa_star:.9g}\nT_kappa = {t}\n")
    return EXIT_OK


def cmd_harness(args) -> int:
    doc = _load(args)
    certs, rep = pipeline.harness(doc.build())
    _emit(args, certs, _meta(doc, verdict=rep.verdict))
    return EXIT_OK if rep.instantiated else EXIT_FAILED


def cmd_requirements(args) -> int:
    doc = _load(args)
    certs = pipeline.requirements(doc.build())
    _emit(args, certs, _meta(doc))
    return EXIT_FAILED if pipeline.any_failed(certs) else EXIT_OK


def cmd_sweep(args) -> int:
    doc = _load(args)
    checks = [c.strip().lower() for c in args.checks.split(",") if c.strip()]
    values = [yaml.safe_load(v) for v in args.values.split(",")]
    rows, failed, all_certs = [], False, []
    for v in values:
        vdoc = doc.with_value(args.param, v)
        certs = pipeline.certify(vdoc.build(), checks)
        failed |= pipeline.any_failed(certs)
        all_certs.extend(certs)
        rows.append({"value": v, "verdicts": {c.check_id: c.verdict for c in certs}})
    lines = [f"{args.param}={r['value']}: " + ", ".join(f"{k} {v}" for k, v in r["verdicts"].items()) for r in rows]
    _write_plain(args, {"param": args.param, "rows": rows}, "\n".join(lines) + "\n")
    return EXIT_FAILED if failed else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "threshold": cmd_threshold,
    "harness": cmd_harness,
    "requirements": cmd_requirements,
    "sweep": cmd_sweep,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"invlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"invlab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"invlab: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except InvlabError as exc:
        print(f"invlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def main() -> None:
    sys.exit(run_cli())
