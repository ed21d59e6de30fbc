"""rho^2-scaled pair integrals along rho = 2^j and their decay exponents."""
import argparse

import numpy as np

from bmflow import analysis as an


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--directions", type=int, default=10)
    ap.add_argument("--max-power", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rhos = [2.0**j for j in range(args.max_power + 1)]
    for g in an.random_directions(np.random.default_rng(args.seed), args.directions):
        norms = np.linalg.norm(an.asymptotic_Iij(g, rhos).reshape(len(rhos), -1), axis=1)
        print(np.array2string(g, precision=3), " ".join(f"{x:.4f}" for x in norms[-4:]))
    lap = an.check_laplace_coefficients(np.array([2.0, -1.0, -1.0]) / np.sqrt(6))
    print(f"slopes: denominator {lap['denominator_slope']:.4f}, numerator {lap['numerator_slope']:.4f}")


if __name__ == "__main__":
    main()
