"""Spatially uniform Q run against a stiff ODE reference of the reduced system."""
import argparse

import numpy as np
from scipy.integrate import solve_ivp

from bmflow import bm_potential as bm
from bmflow.sim import physics as ph
from bmflow.sim.params import ModelParams
from bmflow.sim.state import InitialData, initial_state
from bmflow.sim.stepper import Simulator


def reference(p, quad, t_end, y0):
    def rhs(t, y):
        q = ph.sym5_to_full(y[:5])
        th = y[5]
        df = bm.df_dQ(q, 1e-13, quad)
        gam = p.Gamma(th)
        h = -th * df + p.lambda_bulk * q
        de = th * np.sum(df * gam * h) + gam * np.sum(h * h)
        return np.r_[ph.full_to_sym5(gam * h), de / p.c_eff(th)]
    return solve_ivp(rhs, (0, t_end), y0, method="Radau", rtol=1e-10, atol=1e-12).y[:, -1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-end", type=float, default=1.0)
    ap.add_argument("--dts", type=float, nargs="+", default=[4e-3, 2e-3, 1e-3])
    args = ap.parse_args()
    p = ModelParams()
    sim = Simulator(p, 4, (12, 24), mu_tol=1e-13)
    st0 = initial_state(sim.grid, InitialData(kind="uniform_q"), 0)
    ref = reference(p, sim.singular.quad, args.t_end,
                    np.r_[st0.q[:, 0, 0, 0], st0.theta[0, 0, 0]])
    for dt in args.dts:
        st = st0
        for _ in range(int(round(args.t_end / dt))):
            st, _ = sim.step(st, dt)
        print(f"dt={dt:.1e}  |Q err|={np.max(np.abs(st.q[:, 0, 0, 0] - ref[:5])):.2e}  "
              f"|theta err|={abs(st.theta[0, 0, 0] - ref[5]):.2e}")


if __name__ == "__main__":
    main()
