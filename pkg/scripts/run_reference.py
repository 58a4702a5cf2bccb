"""Run the full pipeline on every bundled scenario and write artefacts.

    python3 scripts/run_reference.py --out runs/reference

For each scenario this writes one CSV per policy plus machine-json reports
for certify / harness / requirements where the scenario supports them.
"""

import argparse
import json
from pathlib import Path

from invlab import pipeline
from invlab.document import load_validate
from invlab.errors import ConfigError
from invlab.report import build_report, emit_trajectory_csv, render_json
from invlab.simulator import simulate

HERE = Path(__file__).resolve().parents[1] / "scenarios"


def run_one(path: Path, out: Path) -> dict:
    doc = load_validate(path)
    scen = doc.build()
    meta = {"scenario": scen.name, "fingerprint": doc.fingerprint(), "seed": doc.seed}
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for p in (scen.policy, *scen.suite):
        traj = simulate(scen, p, stop_on_exit=False if scen.phi is not None else True)
        emit_trajectory_csv(traj, out / f"{p.id}.csv")
        summary[f"simulate:{p.id}"] = traj.terminated
    stages = {
        "certify": lambda: pipeline.certify(scen),
        "harness": lambda: pipeline.harness(scen)[0],
        "requirements": lambda: pipeline.requirements(scen),
    }
    for name, fn in stages.items():
        try:
            certs = fn()
        except ConfigError as exc:
            summary[name] = f"skipped: {exc}"
            continue
        record = build_report(certs, meta)
        (out / f"{name}.json").write_text(render_json(record))
        summary[name] = record["narrative"]
    return summary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/reference")
    ap.add_argument("--scenarios", nargs="*", help="scenario files (default: all bundled)")
    args = ap.parse_args()
    paths = [Path(p) for p in args.scenarios] if args.scenarios else sorted(HERE.glob("*.scenario"))
    results = {p.stem: run_one(p, Path(args.out) / p.stem) for p in paths}
    print(json.dumps(results, indent=2))


if __name__ == "__main__":
    main()
