"""Field state on the periodic grid and seeded initial data."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .physics import full_to_sym5, sym5_to_full
from .spectral import Grid


@dataclass
class FieldState:
    """Collocation values of u (3 comps), Q (Q11, Q12, Q13, Q22, Q23) and theta.

    theta is the canonical thermal variable: checkpoints store it, and the
    stepper inverts the thermal energy back to it after every update.
    """

    u: np.ndarray
    q: np.ndarray
    theta: np.ndarray
    time: float = 0.0
    p: np.ndarray | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def Q(self):
        return sym5_to_full(self.q)

    def spectral(self, grid: Grid):
        """Spectral mirrors (u_hat, q_hat, theta_hat)."""
        return grid.fft(self.u), grid.fft(self.q), grid.fft(self.theta)

    def copy(self):
        return FieldState(self.u.copy(), self.q.copy(), self.theta.copy(), self.time,
                          None if self.p is None else self.p.copy())


@dataclass(frozen=True)
class InitialData:
    """Recipe for seeded band-limited initial fields.

    kind "random": divergence-free u with max |u| = u_amp; Q with largest
    nodal |eigenvalue| = q_amp; theta = theta0 + theta_amp * (normalized field).
    kind "equilibrium": u = 0, Q = 0, theta = theta0.
    kind "uniform_q": u = 0, Q = q_diag (constant diagonal), theta = theta0.
    """

    kind: str = "random"
    u_amp: float = 0.1
    q_amp: float = 0.03
    theta0: float = 1.0
    theta_amp: float = 0.1
    kmax: int = 2
    q_diag: tuple = (0.2, -0.1, -0.1)

    def __post_init__(self):
        if self.kind not in ("random", "equilibrium", "uniform_q"):
            raise ValueError(f"unknown initial-data kind {self.kind!r}")
        if self.theta0 - self.theta_amp <= 0:
            raise ValueError("initial temperature must stay positive (theta0 > theta_amp)")
        if not 0 <= self.q_amp < 1.0 / 3.0 - 1e-3:
            raise ValueError("q_amp must leave the eigenvalues inside the safety region")


def band_limited(grid: Grid, rng, ncomp, kmax):
    """Real random fields with modes |k_i| <= kmax and a k^-2 amplitude decay."""
    if kmax > (grid.n - 1) // 3:
        raise ValueError(f"kmax={kmax} exceeds the dealiased band of an N={grid.n} grid")
    shape = (ncomp,) + grid.k2.shape
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    band = grid.band(kmax) & (grid.k2 > 0)
    coef = coef * band / (1.0 + grid.k2)
    return grid.ifft(coef)


def initial_state(grid: Grid, init: InitialData, seed: int) -> FieldState:
    shape = grid.shape
    if init.kind == "equilibrium":
        return FieldState(np.zeros((3,) + shape), np.zeros((5,) + shape),
                          np.full(shape, init.theta0))
    if init.kind == "uniform_q":
        d = np.asarray(init.q_diag, dtype=float)
        if abs(d.sum()) > 1e-12:
            raise ValueError("q_diag must be trace-free")
        q = np.zeros((5,) + shape)
        q[0], q[3] = d[0], d[1]
        return FieldState(np.zeros((3,) + shape), q, np.full(shape, init.theta0))

    rng = np.random.default_rng(seed)
    u = grid.ifft(grid.leray_project(grid.fft(band_limited(grid, rng, 3, init.kmax))))
    umax = np.max(np.linalg.norm(u, axis=0))
    u = u * (init.u_amp / umax) if umax > 0 else u

    q = sym5_to_full(band_limited(grid, rng, 5, init.kmax))
    lam = np.linalg.eigvalsh(np.moveaxis(q.reshape(3, 3, -1), -1, 0))
    qmax = np.max(np.abs(lam))
    q5 = full_to_sym5(q) * (init.q_amp / qmax) if qmax > 0 else full_to_sym5(q)

    g = band_limited(grid, rng, 1, init.kmax)[0]
    g = g / np.max(np.abs(g))
    theta = init.theta0 + init.theta_amp * g
    return FieldState(u, q5, theta)
