"""Energy and entropy bookkeeping, and the distributional entropy audit."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import physics as ph
from .params import ModelParams
from .spectral import Grid
from .state import FieldState


class ModeError(RuntimeError):
    """Operation requires the singular heat-flux law."""


@dataclass
class DiagnosticsRecord:
    time: float
    E_total: float
    E_kin: float
    S_total: float
    D_visc: float
    D_H: float
    D_heat: float
    theta_min: float
    theta_max: float
    q_eig_min: float
    q_eig_max: float
    energy_residual: float = 0.0
    entropy_balance_lhs: float = 0.0
    div_u: float = 0.0
    mat_residual: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @property
    def D_total(self):
        return self.D_visc + self.D_H + self.D_heat


def entropy_density(theta, f, params: ModelParams):
    """s = 1 + log theta - f(Q) + m a theta^(m-1)."""
    return 1.0 + np.log(theta) - f + params.m * params.a * theta ** (params.m - 1.0)


def dissipation_densities(theta, grad_u, h, grad_theta, params: ModelParams):
    """Pointwise (mu/2|G+G^t|^2, Gamma|H|^2, kappa/theta |grad theta|^2), each over theta."""
    sym = grad_u + ph.transpose(grad_u)
    visc = 0.5 * params.mu(theta) * ph.ddot(sym, sym) / theta
    rot = params.Gamma(theta) * ph.ddot(h, h) / theta
    heat = params.kappa(theta) * np.sum(grad_theta**2, axis=0) / theta**2
    return visc, rot, heat


def energy_density(state: FieldState, rates, params: ModelParams):
    kin = 0.5 * np.sum(state.u**2, axis=0)
    q = rates.Q
    elastic = 0.5 * np.sum(rates.grad_q**2, axis=(0, 1, 2)) - 0.5 * params.lambda_bulk * ph.ddot(q, q)
    return kin, elastic + params.internal_thermal(state.theta)


def diagnostics(state: FieldState, params: ModelParams, grid: Grid, rates) -> DiagnosticsRecord:
    """Instantaneous record; the balance fields are filled by :class:`BalanceTracker`."""
    kin, rest = energy_density(state, rates, params)
    s = entropy_density(state.theta, rates.sing.f, params)
    visc, rot, heat = dissipation_densities(state.theta, rates.grad_u, rates.H,
                                            rates.grad_theta, params)
    mat = ph.mat_residual(rates.H, rates.Q, rates.grad_u, params.xi)
    return DiagnosticsRecord(
        time=float(state.time),
        E_total=float(grid.integrate(kin + rest)),
        E_kin=float(grid.integrate(kin)),
        S_total=float(grid.integrate(s)),
        D_visc=float(grid.integrate(visc)),
        D_H=float(grid.integrate(rot)),
        D_heat=float(grid.integrate(heat)),
        theta_min=float(state.theta.min()),
        theta_max=float(state.theta.max()),
        q_eig_min=rates.sing.lam_min,
        q_eig_max=rates.sing.lam_max,
        div_u=float(np.max(np.abs(np.trace(rates.grad_u)))),
        mat_residual=float(np.max(np.abs(mat))),
    )


class BalanceTracker:
    """Fills energy_residual and the accumulated entropy balance

        int_0^t D dt - (S(t) - S(0))

    using the trapezoid rule over the recorded samples."""

    def __init__(self):
        self.first = None
        self.prev = None
        self.dissipated = 0.0

    def update(self, rec: DiagnosticsRecord) -> DiagnosticsRecord:
        if self.first is None:
            self.first = rec
        else:
            dt = rec.time - self.prev.time
            self.dissipated += 0.5 * dt * (rec.D_total + self.prev.D_total)
        e0 = self.first.E_total
        rec.energy_residual = abs(rec.E_total - e0) / abs(e0) if e0 != 0 else abs(rec.E_total)
        rec.entropy_balance_lhs = self.dissipated - (rec.S_total - self.first.S_total)
        self.prev = rec
        return rec


# ------------------------------------------------------------ local audit

@dataclass
class HistorySample:
    """What the local entropy audit needs from one instant."""

    time: float
    s: np.ndarray
    u: np.ndarray
    H_theta: np.ndarray
    D: np.ndarray      # total dissipation density (already divided by theta)


def history_sample(state: FieldState, rates, params: ModelParams) -> HistorySample:
    s = entropy_density(state.theta, rates.sing.f, params)
    visc, rot, heat = dissipation_densities(state.theta, rates.grad_u, rates.H,
                                            rates.grad_theta, params)
    return HistorySample(float(state.time), s, state.u.copy(), params.H_theta(state.theta),
                         visc + rot + heat)


@dataclass(frozen=True)
class BumpTest:
    """phi(t, x) = g(t) P(x)^2 with g a Gaussian in time and P a real
    trigonometric polynomial; ``constant`` replaces phi by that constant."""

    t0: float = 0.0
    width: float = 1.0
    modes: tuple = ()            # integer wave vectors
    cos_coef: tuple = ()
    sin_coef: tuple = ()
    offset: float = 1.0
    constant: float | None = None

    def _poly(self, x):
        """P, grad P, Delta P at grid points x (shape (3, *space))."""
        p = np.full(x.shape[1:], self.offset)
        gp = np.zeros_like(x)
        lp = np.zeros(x.shape[1:])
        for k, a, b in zip(self.modes, self.cos_coef, self.sin_coef):
            k = np.asarray(k, dtype=float)
            ph_ = np.tensordot(k, x, axes=1)
            c, s = np.cos(ph_), np.sin(ph_)
            p += a * c + b * s
            gp += k[:, None, None, None] * (-a * s + b * c)
            lp += -(k @ k) * (a * c + b * s)
        return p, gp, lp

    def fields(self, t, x):
        """(phi, phi_t, grad phi, Delta phi) at time t."""
        if self.constant is not None:
            z = np.zeros(x.shape[1:])
            return z + self.constant, z, np.zeros_like(x), z
        g = np.exp(-0.5 * ((t - self.t0) / self.width) ** 2)
        gt = -g * (t - self.t0) / self.width**2
        p, gp, lp = self._poly(x)
        p2 = p * p
        return (g * p2, gt * p2, 2.0 * g * p * gp,
                2.0 * g * (np.sum(gp * gp, axis=0) + p * lp))


def random_bumps(rng, n, t_end, kmax=2, nmodes=3):
    out = []
    for _ in range(n):
        modes = tuple(tuple(int(v) for v in rng.integers(-kmax, kmax + 1, 3)) for _ in range(nmodes))
        out.append(BumpTest(t0=float(rng.uniform(0.3, 0.7) * t_end),
                            width=float(rng.uniform(0.1, 0.25) * t_end),
                            modes=modes,
                            cos_coef=tuple(float(v) for v in rng.normal(0, 0.3, nmodes)),
                            sin_coef=tuple(float(v) for v in rng.normal(0, 0.3, nmodes)),
                            offset=float(rng.uniform(0.5, 1.0))))
    return out


def entropy_local_audit(history, params: ModelParams, test: BumpTest, grid: Grid) -> float:
    """lhs - rhs of the tested entropy inequality on a stored history.

    lhs = int int [s phi_t + s u.grad phi + H(theta) Delta phi]
          + int s(0) phi(0) - int s(T) phi(T),
    rhs = -int int phi D.
    The time-boundary terms come from integrating s phi_t by parts on
    [0, T]; for constant phi the value is phi times the integrated
    entropy balance.  Space integrals are grid sums, time integrals the
    trapezoid rule over the samples.
    """
    if not params.singular_flux:
        raise ModeError("the local entropy audit needs the singular heat-flux law (A_minus2 > 0)")
    if len(history) < 2:
        raise ValueError("history needs at least two samples")
    x = grid.x
    vals = []
    for hs in history:
        phi, phi_t, gphi, lphi = test.fields(hs.time, x)
        dens = (hs.s * phi_t + hs.s * np.sum(hs.u * gphi, axis=0) + hs.H_theta * lphi
                + phi * hs.D)
        vals.append(grid.integrate(dens))
    times = np.array([hs.time for hs in history])
    vals = np.array(vals)
    bulk = float(np.sum(0.5 * np.diff(times) * (vals[1:] + vals[:-1])))
    first, last = history[0], history[-1]
    b0 = grid.integrate(first.s * test.fields(first.time, x)[0])
    b1 = grid.integrate(last.s * test.fields(last.time, x)[0])
    return bulk + float(b0 - b1)
