"""Hessian lower-bound constant and the concavity check at half of it, per margin."""
import argparse

from bmflow import analysis as an


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--margins", type=float, nargs="+", default=[0.05, 0.02, 0.01, 0.005])
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    for rep in an.ftest1_sweep(args.margins, args.samples, args.seed):
        m = rep.extra["margin"]
        conc = an.check_h_concavity(rep.worst_value / 2, args.samples, m, args.seed)
        print(f"margin {m:<6} eps_hat {rep.worst_value:.4f}  nested {rep.extra['nested_infimum']:.4f}"
              f"  concavity min eig {conc.worst_value:.4f}  {'pass' if conc.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
