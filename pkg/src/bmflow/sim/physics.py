"""Pointwise algebra and spectral right-hand sides of the flow model.

Tensor fields carry their component axes first: a vector field has shape
(3, *space), a matrix field (3, 3, *space).  The velocity gradient is
G[i, j] = d_j u_i, and the divergence of a matrix field is d_j T_ij.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import bm_potential as bm
from ..partition import build_quadrature, log_partition
from .params import ModelParams
from .spectral import Grid

THIRD = 1.0 / 3.0
EYE = np.eye(3)
# (i, j) index of each stored component: Q11, Q12, Q13, Q22, Q23
SYM5 = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2))


class PhysicalityLoss(ArithmeticError):
    """Q left the physical eigenvalue range (or its safety margin)."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class PositivityLoss(ArithmeticError):
    """Temperature became non-positive somewhere."""


def sym5_to_full(q5):
    q5 = np.asarray(q5)
    q = np.empty((3, 3) + q5.shape[1:], dtype=q5.dtype)
    q[0, 0], q[0, 1], q[0, 2], q[1, 1], q[1, 2] = q5
    q[1, 0], q[2, 0], q[2, 1] = q5[1], q5[2], q5[4]
    q[2, 2] = -q5[0] - q5[3]
    return q


def full_to_sym5(q):
    return np.stack([q[i, j] for i, j in SYM5])


def _eye_like(a):
    return EYE.reshape((3, 3) + (1,) * (a.ndim - 2))


def mm(a, b):
    return np.einsum("ik...,kj...->ij...", a, b)


def ddot(a, b):
    return np.einsum("ij...,ij...->...", a, b)


def transpose(a):
    return np.swapaxes(a, 0, 1)


def strain_and_vorticity(grad_u):
    """Symmetric and antisymmetric parts of the velocity gradient."""
    gt = transpose(grad_u)
    return 0.5 * (grad_u + gt), 0.5 * (grad_u - gt)


def compute_S(grad_u, q, xi):
    """Co-rotational stretching term of the order-parameter equation."""
    eps, om = strain_and_vorticity(grad_u)
    a = q + THIRD * _eye_like(q)
    return (mm(xi * eps + om, a) + mm(a, xi * eps - om)
            - 2.0 * xi * a * ddot(q, grad_u))


def elastic_stress(h, q, grad_q, xi):
    """Non-viscous, non-pressure part of the stress.

    ``grad_q`` has shape (3, 3, 3, *space) with grad_q[i, j, k] = d_k Q_ij.
    """
    a = q + THIRD * _eye_like(q)
    ericksen = np.einsum("abi...,abj...->ij...", grad_q, grad_q)
    return (2.0 * xi * ddot(h, q) * a - xi * (mm(h, a) + mm(a, h))
            + mm(q, h) - mm(h, q) - ericksen)


def compute_stress(grad_u, q, grad_q, theta, params: ModelParams, h, p=None):
    """Full stress mu(theta)(G + G^t) - p I + elastic part."""
    sigma = params.mu(theta) * (grad_u + transpose(grad_u)) + elastic_stress(h, q, grad_q, params.xi)
    if p is not None:
        sigma = sigma - p * _eye_like(sigma)
    return sigma


def mat_residual(h, q, grad_u, xi):
    """Pointwise -H:S - [(QH - HQ):G + 2 xi (H:Q)(Q:G) - xi (HA + AH):G],
    A = Q + I/3; identically zero for symmetric H and trace-free G."""
    a = q + THIRD * _eye_like(q)
    lhs = -ddot(h, compute_S(grad_u, q, xi))
    rhs = (ddot(mm(q, h) - mm(h, q), grad_u) + 2.0 * xi * ddot(h, q) * ddot(q, grad_u)
           - xi * ddot(mm(h, a) + mm(a, h), grad_u))
    return lhs - rhs


# ----------------------------------------------------------- singular term

@dataclass
class SingularEval:
    f: np.ndarray          # f(Q) per node
    df: np.ndarray         # L[df/dQ], shape (3, 3, *space)
    lam_min: float
    lam_max: float
    hess_scale: float      # largest eigenvalue of the spectral Hessian over nodes


class NodewiseSingular:
    """f(Q) and its gradient at every grid node, warm-starting the multiplier
    solve from the previous call so consecutive steps need few Newton steps."""

    def __init__(self, quad_orders=(16, 32), tol=1e-11):
        self.quad = build_quadrature(*quad_orders)
        self.tol = tol
        self._mu = None

    def __call__(self, q) -> SingularEval:
        space = q.shape[2:]
        flat = np.moveaxis(q.reshape(3, 3, -1), -1, 0)
        w, v = np.linalg.eigh(flat)
        lam, vec = w[:, ::-1], v[:, :, ::-1]
        bad = (lam[:, 0] >= 2.0 * THIRD) | (lam[:, 2] <= -THIRD)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            node = np.unravel_index(i, space)
            raise PhysicalityLoss(f"non-physical Q at node {node}: eigenvalues {lam[i]}", node)
        lam = lam - lam.mean(axis=1, keepdims=True)
        mu0 = self._mu if self._mu is not None and self._mu.shape == lam.shape else None
        mu, info = bm.solve_mu(lam, self.tol, self.quad, mu0, return_info=True)
        self._mu = mu
        f = np.sum(mu * (lam + THIRD), axis=1) - log_partition(mu, self.quad)
        df = np.einsum("nik,nk,njk->ijn", vec, mu, vec).reshape((3, 3) + space)
        red = bm.BASIS.T @ info["hess"] @ bm.BASIS
        scale = 1.0 / float(np.min(np.linalg.eigvalsh(red)[:, 0]))
        return SingularEval(f.reshape(space), df, float(lam[:, 2].min()),
                            float(lam[:, 0].max()), scale)


def compute_H_field(q, theta, params: ModelParams, grid: Grid, df=None, singular=None):
    """Molecular field Delta Q - theta L[df/dQ] + lambda Q."""
    if df is None:
        singular = singular or NodewiseSingular()
        df = singular(q).df
    lap = grid.laplacian(q)
    return lap - theta * df + params.lambda_bulk * q


def recover_pressure(u, sigma_tilde, grid: Grid):
    """Mean-zero p solving -Delta p = div div(u (x) u - sigma_tilde)."""
    t = np.einsum("i...,j...->ij...", u, u) - sigma_tilde
    th = grid.fft(t)
    kd = grid.kd
    dd = sum(kd[i] * kd[j] * th[i, j] for i in range(3) for j in range(3))
    kk = sum(k * k for k in kd)
    ph = np.where(kk == 0, 0.0, -dd / np.where(kk == 0, 1.0, kk))
    return grid.ifft(ph)


def heat_energy_rhs(theta, u, q_src, grad_u, h, params: ModelParams, grid: Grid):
    """Right side of the thermal energy equation in conservative form,

    d_t e_th = div(kappa grad theta) - div(e_th u) + q_src
               + mu/2 |G + G^t|^2 + Gamma |H|^2,

    with e_th = theta + a(m-1) theta^m and q_src = theta L[df/dQ] : (S + Gamma H)
    (the material derivative of f(Q) along the order-parameter equation).
    """
    grad_t = grid.grad(theta)
    flux = params.kappa(theta) * grad_t - params.internal_thermal(theta) * u
    sym = grad_u + transpose(grad_u)
    return (grid.div(flux) + q_src + 0.5 * params.mu(theta) * ddot(sym, sym)
            + params.Gamma(theta) * ddot(h, h))


def heat_rhs(theta, u, q, grad_u, h, df, params: ModelParams, grid: Grid):
    """d theta/dt from the heat equation, c_eff(theta) theta_t = (energy form)."""
    if np.any(theta <= 0):
        raise PositivityLoss(f"theta <= 0 at {int(np.sum(theta <= 0))} nodes")
    s = compute_S(grad_u, q, params.xi)
    q_src = theta * ddot(df, s + params.Gamma(theta) * h)
    return heat_energy_rhs(theta, u, q_src, grad_u, h, params, grid) / params.c_eff(theta)
