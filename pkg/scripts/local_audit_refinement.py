"""Local entropy audit with bump test functions under step refinement."""
import argparse

import numpy as np

from bmflow.sim.diagnostics import entropy_local_audit, random_bumps
from bmflow.sim.params import ModelParams
from bmflow.sim.runner import run_simulation
from bmflow.sim.spectral import Grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid-size", type=int, default=16)
    ap.add_argument("--t-end", type=float, default=0.5)
    ap.add_argument("--dts", type=float, nargs="+", default=[0.01, 0.005, 0.0025])
    ap.add_argument("--bumps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    p = ModelParams(A_minus2=1.0)
    grid = Grid(args.grid_size)
    bumps = random_bumps(np.random.default_rng(args.seed), args.bumps, args.t_end)
    for dt in args.dts:
        res = run_simulation(p, args.grid_size, dt, args.t_end, seed=args.seed, keep_history=True)
        vals = [entropy_local_audit(res.history, p, b, grid) for b in bumps]
        print(f"dt {dt:.4f}  " + "  ".join(f"{v:+.3e}" for v in vals), flush=True)


if __name__ == "__main__":
    main()
