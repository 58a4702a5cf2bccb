"""Tabulate kappa* and T_kappa against the analytic root U_max + M_f.

    python3 scripts/threshold_sweep.py --dim 2 --u-max 0.5 1 2 4 --mf 0 0.5
"""

import argparse
import itertools

import numpy as np

from invlab import (
    BoundaryRegion,
    CapabilitySchedule,
    ControlChannel,
    Drift,
    DriftBound,
    EndogenousChannel,
    Numerics,
    Policy,
    SafeSet,
    Scenario,
    StatePartition,
)
from invlab.safe_set import sample_boundary_region
from invlab.supercritical import find_kappa_star


def unit_ball(dim, u_max, mf, rate):
    return Scenario(
        partition=StatePartition(dim, dim),
        safe_set=SafeSet.ball(np.zeros(dim), 1.0),
        drift=Drift.zero(dim),
        control=ControlChannel(np.eye(dim)),
        u_max=u_max,
        endogenous=EndogenousChannel(np.eye(dim), "linear-gain"),
        capability=CapabilitySchedule.linear(0.0, rate),
        policy=Policy.zero(u_max),
        initial_state=np.zeros(dim),
        numerics=Numerics(horizon=100.0),
        drift_bound=DriftBound.declared(mf),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--u-max", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--mf", type=float, nargs="+", default=[0.0, 0.5])
    ap.add_argument("--rate", type=float, default=1.0)
    ap.add_argument("--samples", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'u_max':>6} {'M_f':>5} {'kappa*':>14} {'|err|':>9} {'T_kappa':>16} {'iters':>5}")
    for u_max, mf in itertools.product(args.u_max, args.mf):
        s = unit_ball(args.dim, u_max, mf, args.rate)
        X = sample_boundary_region(s.safe_set, BoundaryRegion(), args.samples, args.seed)
        thr = find_kappa_star(s, X, (0.0, 10.0 * (u_max + mf) + 1.0))
        err = abs(thr.kappa_star - (u_max + mf))
        print(f"{u_max:6.3g} {mf:5.3g} {thr.kappa_star:14.9f} {err:9.2e} {thr.t_kappa:16.12f} {thr.iterations:5d}")


if __name__ == "__main__":
    main()
