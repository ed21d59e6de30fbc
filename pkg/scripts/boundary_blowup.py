"""Potential along a ray into an eigenvalue face, with a log-linear fit."""
import argparse
import warnings

from bmflow import analysis as an


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--deltas", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4, 1e-5])
    ap.add_argument("--split", type=float, default=0.5)
    args = ap.parse_args()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = an.boundary_blowup_fit(args.deltas, split=args.split)
    for d, f in zip(fit["delta"], fit["f"]):
        print(f"delta {d:.0e}  f {f:.6f}")
    print(f"slope {fit['slope']:.5f}  intercept {fit['intercept']:.5f}  R^2 {fit['r2']:.8f}")


if __name__ == "__main__":
    main()
