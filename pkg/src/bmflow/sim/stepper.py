"""First-order IMEX time stepping.

Every right-hand side is explicit; stability against the diffusive terms
comes from a constant-coefficient implicit correction,

    (1 - dt beta Delta) (X_{n+1} - X_n) = dt R(X_n),

with beta the largest diffusion coefficient on the grid (mu for u, Gamma
for Q, kappa/c_eff for the thermal energy).  u and Q increments are
truncated to the dealiased band and u is Leray-projected, so u and Q stay
band-limited and divergence-free.  The thermal energy
e_th = theta + a(m-1) theta^m is advanced in conservative form and theta is
recovered nodewise, which makes the discrete total energy balance exact in
space: its drift is a pure time-discretization error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import physics as ph
from .params import ModelParams
from .physics import PhysicalityLoss, PositivityLoss
from .spectral import Grid
from .state import FieldState

THIRD = 1.0 / 3.0


class StepFailure(RuntimeError):
    """Step rejected after the maximum number of dt halvings, or NaN."""


@dataclass
class Rates:
    """Everything evaluated at one state; shared by the stepper and diagnostics."""

    grad_u: np.ndarray
    Q: np.ndarray
    grad_q: np.ndarray
    grad_theta: np.ndarray
    sing: ph.SingularEval
    H: np.ndarray
    S: np.ndarray
    sigma_tilde: np.ndarray
    r_u: np.ndarray        # spectral, projected
    r_q: np.ndarray        # nodal, full 3x3
    r_e: np.ndarray        # nodal thermal-energy rate
    q_src: np.ndarray      # theta L[df/dQ] : (S + Gamma H)


class Simulator:
    def __init__(self, params: ModelParams, grid_size: int = 32, quad_orders=(16, 32),
                 mu_tol: float = 1e-11, safety: float = 1e-3, max_halvings: int = 10):
        self.params = params
        self.grid = Grid(grid_size)
        self.singular = ph.NodewiseSingular(quad_orders, mu_tol)
        self.safety = safety
        self.max_halvings = max_halvings

    # ------------------------------------------------------------ rates
    def evaluate(self, state: FieldState) -> Rates:
        g, p = self.grid, self.params
        theta, u = state.theta, state.u
        if np.any(theta <= 0):
            raise PositivityLoss(f"theta <= 0 at {int(np.sum(theta <= 0))} nodes")
        q = state.Q
        grad_u = g.grad(u)
        grad_q = g.grad(q)
        grad_t = g.grad(theta)
        sing = self.singular(q)
        h = ph.compute_H_field(q, theta, p, g, df=sing.df)
        s = ph.compute_S(grad_u, q, p.xi)
        sig = ph.compute_stress(grad_u, q, grad_q, theta, p, h)

        mom = sig - np.einsum("i...,j...->ij...", u, u)
        mh = g.fft(mom)
        r_u = sum(1j * g.kd[j] * mh[:, j] for j in range(3))
        r_u = g.leray_project(r_u)

        gam = p.Gamma(theta)
        adv_q = np.einsum("k...,ijk...->ij...", u, grad_q)
        r_q = -adv_q + s + gam * h

        q_src = theta * ph.ddot(sing.df, s + gam * h)
        sym = grad_u + ph.transpose(grad_u)
        flux = p.kappa(theta) * grad_t - p.internal_thermal(theta) * u
        r_e = (g.div(flux) + q_src + 0.5 * p.mu(theta) * ph.ddot(sym, sym)
               + gam * ph.ddot(h, h))
        return Rates(grad_u, q, grad_q, grad_t, sing, h, s, sig, r_u, r_q, r_e, q_src)

    def cfl(self, state: FieldState, rates: Rates) -> float:
        """min(0.5 h / |u|_inf, 0.2 / (Gamma(theta_max) * Hessian scale))."""
        umax = float(np.max(np.linalg.norm(state.u, axis=0)))
        adv = 0.5 * self.grid.spacing / umax if umax > 0 else np.inf
        stiff = 0.2 / (float(self.params.Gamma(state.theta.max())) * rates.sing.hess_scale)
        return min(adv, stiff)

    # ------------------------------------------------------------ update
    def _theta_from_energy(self, e, theta0):
        p = self.params
        if np.any(e <= 0):
            raise PositivityLoss("thermal energy became non-positive")
        th = theta0.copy()
        for _ in range(60):
            # convex increasing residual: Newton iterates stay positive
            res = p.internal_thermal(th) - e
            dth = res / p.c_eff(th)
            th = np.maximum(th - dth, 0.5 * th)
            if np.max(np.abs(dth) / th) < 4e-16:
                break
        return th

    def advance(self, state: FieldState, dt: float, rates: Rates | None = None) -> FieldState:
        """One IMEX step of size dt; raises PhysicalityLoss if Q leaves the
        safety region and PositivityLoss if theta does not stay positive."""
        g, p = self.grid, self.params
        rates = rates or self.evaluate(state)
        theta = state.theta

        beta_u = float(np.max(p.mu(theta)))
        beta_q = float(np.max(p.Gamma(theta)))
        beta_e = float(np.max(p.kappa(theta) / p.c_eff(theta)))

        du = g.dealias(dt * rates.r_u) / (1.0 + dt * beta_u * g.k2)
        u_new = state.u + g.ifft(du)

        dq5 = g.fft(ph.full_to_sym5(rates.r_q))
        dq5 = g.dealias(dt * dq5) / (1.0 + dt * beta_q * g.k2)
        q_new = state.q + g.ifft(dq5)

        de = g.fft(dt * rates.r_e) / (1.0 + dt * beta_e * g.k2)
        e_new = p.internal_thermal(theta) + g.ifft(de)
        theta_new = self._theta_from_energy(e_new, theta)

        new = FieldState(u_new, q_new, theta_new, state.time + dt)
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(q_new))
                and np.all(np.isfinite(theta_new))):
            raise StepFailure(f"non-finite values at t = {new.time}")
        self._check_physical(new)
        return new

    def _check_physical(self, state):
        lam = np.linalg.eigvalsh(np.moveaxis(state.Q.reshape(3, 3, -1), -1, 0))
        lo, hi = lam[:, 0].min(), lam[:, 2].max()
        if lo <= -THIRD + self.safety or hi >= 2 * THIRD - self.safety:
            raise PhysicalityLoss(f"eigenvalues [{lo:.6f}, {hi:.6f}] left the safety region")

    def step(self, state: FieldState, dt: float, rates: Rates | None = None):
        """Advance by dt, halving on physicality loss; returns (state, dt_used)."""
        for attempt in range(self.max_halvings + 1):
            try:
                return self.advance(state, dt, rates), dt
            except PhysicalityLoss as exc:
                last = exc
                dt *= 0.5
        raise StepFailure(f"Q physicality lost after {self.max_halvings} halvings: {last}")


def step(state: FieldState, dt: float, params: ModelParams, sim: Simulator | None = None):
    sim = sim or Simulator(params, state.n)
    return sim.step(state, dt)[0]
