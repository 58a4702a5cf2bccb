"""Monte-Carlo check that the restoring control minimises the outward component.

    python3 scripts/extremality_mc.py --trials 1000 --fixtures 20
"""

import argparse

import numpy as np

from invlab.channels import ControlChannel
from invlab.policies import restoring_optimal_control


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--fixtures", type=int, default=20)
    ap.add_argument("--u-max", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"{'n':>2} {'m':>2} {'rank':>4} {'restoring':>11} {'best random':>12} {'gap':>10}")
    for _ in range(args.fixtures):
        n, m = rng.integers(1, 5, size=2)
        B = rng.standard_normal((n, m))
        ch = ControlChannel(B)
        nvec = rng.standard_normal(n)
        nvec /= np.linalg.norm(nvec)
        best = float(B @ restoring_optimal_control(ch, nvec, args.u_max) @ nvec)
        BU = rng.standard_normal((args.trials, m)) @ B.T
        BU *= (args.u_max / np.linalg.norm(BU, axis=1))[:, None]
        rand = float((BU @ nvec).min())
        print(f"{n:2d} {m:2d} {ch.basis.shape[1]:4d} {best:11.6f} {rand:12.6f} {rand - best:10.2e}")


if __name__ == "__main__":
    main()
