"""Ball-Majumdar potential through its maximum-entropy dual.

For a Q-tensor with eigenvalues lambda the multipliers mu solve
grad ln Z(mu) = lambda + 1/3 on the zero-sum plane X, and

    F(lambda) = sum_i mu_i (lambda_i + 1/3) - ln Z(mu),
    dF/dlambda = mu,   d2F/dlambda2 = N^{-1} on X,

with N the log-Hessian of Z.  Everything below is batched over leading
axes: spectra have shape (..., 3), tensors (..., 3, 3).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partition import (SphereQuadrature, default_quadrature, moments,
                        project_zero_sum)

THIRD = 1.0 / 3.0
# orthonormal basis of X = {y : y.(1,1,1) = 0}; columns f1, f2
BASIS = np.column_stack([
    np.array([-1.0, 1.0, 0.0]) / np.sqrt(2.0),
    np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0),
])
DEGENERATE_GAP = 1e-7
MAX_ITERS = 200
CONTINUATION = (0.125, 0.25, 0.5, 1.0)


class DomainError(ValueError):
    """Spectrum outside the physical interval (-1/3, 2/3)."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ConstraintViolation(RuntimeError):
    """Primal density misses the moment constraints: quadrature too coarse."""


@dataclass(frozen=True)
class Spectrum:
    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.shape[-1] != 3:
            raise ValueError("a spectrum has three eigenvalues")
        if np.any(np.abs(lam.sum(axis=-1)) > 1e-12):
            raise ValueError("eigenvalues must sum to zero")
        object.__setattr__(self, "lam", lam)

    def physical(self):
        return np.all((self.lam > -THIRD) & (self.lam < 2.0 * THIRD), axis=-1)


@dataclass(frozen=True)
class EigenFrame:
    spectrum: Spectrum
    axes: np.ndarray  # columns are eigenvectors

    def reconstruct(self):
        lam = self.spectrum.lam
        return np.einsum("...ik,...k,...jk->...ij", self.axes, lam, self.axes)


@dataclass(frozen=True)
class PotentialEval:
    value: np.ndarray
    mu: np.ndarray
    hess: np.ndarray
    newton_iters: int
    residual: float


def check_physical(lam, where=""):
    lam = np.asarray(lam)
    ok = np.all((lam > -THIRD) & (lam < 2.0 * THIRD), axis=-1)
    if not np.all(ok):
        bad = np.argwhere(~np.atleast_1d(ok))[0]
        sample = np.atleast_2d(lam.reshape(-1, 3))[
            int(np.ravel_multi_index(tuple(bad), np.atleast_1d(ok).shape))]
        raise DomainError(f"non-physical spectrum {sample}{where}")


def eigendecomp_sym3(q) -> EigenFrame:
    """Eigenvalues in descending order and a deterministic orthonormal frame.

    Diagonal input is handled exactly (no rounding from the solver), and each
    eigenvector is signed so that its first non-negligible entry is positive.
    """
    q = np.asarray(q, dtype=float)
    q = 0.5 * (q + np.swapaxes(q, -1, -2))
    lam, vec = np.linalg.eigh(q)
    lam = lam[..., ::-1]
    vec = vec[..., ::-1]

    off = np.abs(q[..., 0, 1]) + np.abs(q[..., 0, 2]) + np.abs(q[..., 1, 2])
    diag = off == 0.0
    if np.any(diag):
        d = np.diagonal(q, axis1=-2, axis2=-1)[diag]
        order = np.argsort(-d, axis=-1, kind="stable")
        lam[diag] = np.take_along_axis(d, order, axis=-1)
        eye = np.eye(3)
        vec[diag] = np.swapaxes(eye[order], -1, -2)

    lead = np.argmax(np.abs(vec) > 1e-12, axis=-2)
    sign = np.sign(np.take_along_axis(vec, lead[..., None, :], axis=-2))
    sign[sign == 0] = 1.0
    vec = vec * sign
    # rounding in eigh can leave a tiny trace; diagonal input stays exact
    lam = np.where(diag[..., None], lam, lam - lam.mean(axis=-1, keepdims=True))
    return EigenFrame(Spectrum(lam), vec)


def _solve_batch(target, quad, tol, mu0, max_iters):
    """Damped Newton in the (f1, f2) coordinates for a flat batch.

    Returns mu, grad, hess, iteration count and a boolean ``ok`` mask; a
    member whose halving line search cannot reduce the residual is dropped
    and reported as not converged.
    """
    y = mu0 @ BASIS
    _, grad, hess = moments(y @ BASIS.T, quad)
    rnorm = np.linalg.norm((grad - target) @ BASIS, axis=-1)
    dead = np.zeros(target.shape[0], dtype=bool)
    iters = 0
    while iters < max_iters:
        active = ~dead & (np.max(np.abs(grad - target), axis=-1) > tol)
        if not np.any(active):
            break
        iters += 1
        idx = np.flatnonzero(active)
        jac = BASIS.T @ hess[idx] @ BASIS
        step = -np.linalg.solve(jac, ((grad[idx] - target[idx]) @ BASIS)[..., None])[..., 0]
        t = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(40):
            sub = np.flatnonzero(pending)
            trial = y[idx[sub]] + t[sub, None] * step[sub]
            _, g, h = moments(trial @ BASIS.T, quad)
            r = np.linalg.norm((g - target[idx[sub]]) @ BASIS, axis=-1)
            good = r < rnorm[idx[sub]]
            tgt = idx[sub[good]]
            y[tgt], grad[tgt], hess[tgt], rnorm[tgt] = trial[good], g[good], h[good], r[good]
            pending[sub[good]] = False
            if not np.any(pending):
                break
            t[pending] *= 0.5
        dead[idx[pending]] = True
    ok = ~dead & (np.max(np.abs(grad - target), axis=-1) <= tol)
    return y @ BASIS.T, grad, hess, iters, ok


def solve_mu(lam, tol: float = 1e-12, quad: SphereQuadrature | None = None,
             mu0=None, *, return_info: bool = False):
    """Multipliers mu (zero sum) with grad ln Z(mu) = lam + 1/3 within ``tol``.

    Plain damped Newton from ``mu0`` (default 0) first; members that fail are
    re-solved by continuation, scaling lam through 1/8, 1/4, 1/2, 1.
    """
    quad = quad or default_quadrature()
    lam = np.asarray(lam, dtype=float)
    if tol <= 0:
        raise ValueError("tol must be positive")
    check_physical(lam)
    lam = project_zero_sum(lam)
    batch = lam.shape[:-1]
    flat = lam.reshape(-1, 3)
    start = np.zeros_like(flat) if mu0 is None else project_zero_sum(
        np.broadcast_to(np.asarray(mu0, dtype=float), lam.shape).reshape(-1, 3))

    target = flat + THIRD
    mu, grad, hess, iters, ok = _solve_batch(target, quad, tol, start, MAX_ITERS)
    failed = np.flatnonzero(~ok)
    if failed.size:
        m = np.zeros((failed.size, 3))
        total = 0
        for frac in CONTINUATION:
            m, g, h, it, ok_f = _solve_batch(frac * flat[failed] + THIRD, quad, tol, m,
                                             MAX_ITERS - total)
            total += it
        mu[failed], grad[failed], hess[failed] = m, g, h
        iters = max(iters, total)
        if not np.all(ok_f):
            err = np.max(np.abs(grad - target), axis=-1)
            raise ConvergenceError("multiplier solve did not converge",
                                   float(np.max(err[failed])))
    err = np.max(np.abs(grad - target), axis=-1)
    mu = project_zero_sum(mu)
    out = mu.reshape(batch + (3,))
    if return_info:
        return out, dict(grad=grad.reshape(batch + (3,)), hess=hess.reshape(batch + (3, 3)),
                         iters=iters, residual=float(np.max(err, initial=0.0)))
    return out


def inverse_on_X(n_mat):
    """B (B^T N B)^{-1} B^T: the inverse of N restricted to X, as a 3x3 map."""
    red = BASIS.T @ n_mat @ BASIS
    return BASIS @ np.linalg.inv(red) @ BASIS.T


def fbm_eval(lam, tol: float = 1e-12, quad: SphereQuadrature | None = None,
             mu0=None) -> PotentialEval:
    quad = quad or default_quadrature()
    mu, info = solve_mu(lam, tol, quad, mu0, return_info=True)
    lam = project_zero_sum(np.asarray(lam, dtype=float))
    logz, _, n_mat = moments(mu, quad)
    value = np.sum(mu * (lam + THIRD), axis=-1) - logz
    return PotentialEval(value, mu, inverse_on_X(n_mat), info["iters"], info["residual"])


def _spectral(q, tol, quad, mu0=None):
    frame = eigendecomp_sym3(q)
    check_physical(frame.spectrum.lam)
    ev = fbm_eval(frame.spectrum.lam, tol, quad, mu0)
    return frame, ev


def f_of_Q(q, tol: float = 1e-12, quad: SphereQuadrature | None = None):
    return _spectral(q, tol, quad)[1].value


def df_dQ(q, tol: float = 1e-12, quad: SphereQuadrature | None = None):
    """L[df/dQ] = sum_i mu_i n_i (x) n_i (traceless because sum mu = 0)."""
    frame, ev = _spectral(q, tol, quad)
    return np.einsum("...ik,...k,...jk->...ij", frame.axes, ev.mu, frame.axes)


def divided_differences(lam, mu, hess):
    """Matrix of (mu_i - mu_j)/(lam_i - lam_j), with the coincident limit
    H_ii - H_ij substituted when the gap is below ``DEGENERATE_GAP``."""
    dl = lam[..., :, None] - lam[..., None, :]
    dm = mu[..., :, None] - mu[..., None, :]
    diag = np.diagonal(hess, axis1=-2, axis2=-1)
    limit = diag[..., :, None] - hess
    close = np.abs(dl) < DEGENERATE_GAP
    safe = np.where(close, 1.0, dl)
    return np.where(close, limit, dm / safe)


def hess_contract(q, v, tol: float = 1e-12, quad: SphereQuadrature | None = None):
    """Second derivative D^2 f(q)[v, v] of the isotropic spectral function."""
    frame, ev = _spectral(q, tol, quad)
    vt = np.swapaxes(frame.axes, -1, -2) @ np.asarray(v, dtype=float) @ frame.axes
    d = np.diagonal(vt, axis1=-2, axis2=-1)
    diag_part = np.einsum("...i,...ij,...j->...", d, ev.hess, d)
    dd = divided_differences(frame.spectrum.lam, ev.mu, ev.hess)
    off = vt**2
    off = off - np.einsum("...ii->...i", off)[..., None] * np.eye(3)
    return diag_part + np.sum(dd * off, axis=(-2, -1))


def hess_bilinear(q, v, w, tol=1e-12, quad=None):
    """D^2 f(q)[v, w] by polarization."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return 0.25 * (hess_contract(q, v + w, tol, quad) - hess_contract(q, v - w, tol, quad))


def primal_entropy_oracle(q, quad: SphereQuadrature | None = None, tol: float = 1e-12, *,
                          n_perturb: int = 20, eps: float = 1e-3, seed: int = 0,
                          return_info: bool = False):
    """Entropy of the exponential-family density, checked against the primal
    problem: feasibility of the moment constraints at the quadrature nodes and a
    numerical first-order optimality certificate.  Scalar input only."""
    quad = quad or default_quadrature()
    q = np.asarray(q, dtype=float)
    frame = eigendecomp_sym3(q)
    check_physical(frame.spectrum.lam)
    mu = solve_mu(frame.spectrum.lam, tol, quad)
    lam = frame.spectrum.lam
    # ln Z in the eigenframe; the density itself is built in the lab frame
    logz = moments(mu, quad)[0]
    mmat = frame.axes @ np.diag(mu) @ frame.axes.T
    p = quad.nodes
    w = quad.weights
    logrho = np.einsum("ai,ij,aj->a", p, mmat, p) - logz
    rho = np.exp(logrho)

    outer = p[:, :, None] * p[:, None, :] - THIRD * np.eye(3)
    mass = w @ rho
    second = np.einsum("a,aij->ij", w * rho, outer)
    feas = max(abs(mass - 1.0), np.max(np.abs(second - q)))
    if feas > 1e-6:
        raise ConstraintViolation(f"feasibility residual {feas:.2e}; refine the quadrature")
    entropy = float(w @ (rho * logrho))

    rng = np.random.default_rng(seed)
    iu = np.triu_indices(3)
    cons = np.vstack([w, (w[:, None] * (p[:, iu[0]] * p[:, iu[1]])).T])
    # orthonormal basis of the constraint span (the rows are dependent since
    # sum_i p_i^2 = 1, so normal equations would be singular)
    u_svd, sv, _ = np.linalg.svd(cons.T, full_matrices=False)
    basis = u_svd[:, sv > sv[0] * 1e-12]
    for _ in range(n_perturb):
        r = rho * rng.standard_normal(rho.size)
        for _ in range(2):
            r -= basis @ (basis.T @ r)
        r /= np.max(np.abs(r) / rho)
        for e in (eps, -eps):
            # entropy change split into its first-order part (zero on the
            # null space) and the nonnegative remainder rho*phi(e r / rho)
            x = e * r / rho
            first = e * (w @ (r * (logrho + 1.0)))
            second = w @ (rho * ((1.0 + x) * np.log1p(x) - x))
            if not first + second > 0.0:
                raise ConstraintViolation("density is not a constrained minimiser")
    if return_info:
        return entropy, dict(feasibility=feas, mu=mu, spectrum=lam)
    return entropy
