"""Degenerate-direction moments f(alpha) beside their explicit majorant."""
import argparse

from bmflow import analysis as an


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, nargs="+", default=[1, 2])
    args = ap.parse_args()
    alphas = [0.01, 0.1] + [float(2**j) for j in range(10)]
    for k in args.k:
        print(f"k = {k}")
        for a, v in zip(alphas, an.case2_f_alpha(alphas, k)):
            bound = an.case2_majorant(a, k) if a >= 1 else float("nan")
            print(f"  alpha {a:>8g}  f {v:.6e}  majorant {bound:.6e}")


if __name__ == "__main__":
    main()
