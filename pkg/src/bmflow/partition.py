"""Sphere quadrature and the single-particle partition function.

Z(mu) = int_{S^2} exp(sum_j mu_j p_j^2) dp, with its log-gradient (second
moments) and log-Hessian (covariance of p_j^2).  Every routine accepts a
batch of multiplier triples with shape ``(..., 3)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * np.pi
RELIABLE_MU = 200.0


class InsufficientResolution(ValueError):
    """Quadrature orders below the supported minimum."""


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule on the unit sphere.

    ``nodes`` has shape (n, 3), ``weights`` shape (n,).  The rule is
    immutable; ``sq`` caches p_j^2 at the nodes since every integrand used
    here depends on p only through those squares.
    """

    nodes: np.ndarray
    weights: np.ndarray
    polar_order: int
    azimuthal_order: int
    half_mask: np.ndarray | None = field(default=None, repr=False, compare=False)
    sq: np.ndarray = field(init=False, repr=False, compare=False)
    work_sq: np.ndarray = field(init=False, repr=False, compare=False)
    work_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        sq = np.ascontiguousarray(nodes**2)
        sq.setflags(write=False)
        object.__setattr__(self, "sq", sq)
        # integrands here are even in p, so an antipodally symmetric rule can
        # be folded onto one hemisphere with doubled weights
        if self.half_mask is not None:
            wsq = np.ascontiguousarray(sq[self.half_mask])
            ww = np.ascontiguousarray(2.0 * weights[self.half_mask])
        else:
            wsq, ww = sq, weights
        object.__setattr__(self, "work_sq", wsq)
        object.__setattr__(self, "work_weights", ww)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values) -> np.ndarray:
        """Sum ``values`` (shape (..., n)) against the weights."""
        return np.asarray(values) @ self.weights


def _gauss_legendre_panels(order, breakpoints):
    x0, w0 = np.polynomial.legendre.leggauss(order)
    xs, ws = [], []
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        half = 0.5 * (b - a)
        xs.append(0.5 * (a + b) + half * x0)
        ws.append(half * w0)
    return np.concatenate(xs), np.concatenate(ws)


def build_quadrature(polar_order: int, azimuthal_order: int, *, axis: int = 2,
                     breakpoints=None) -> SphereQuadrature:
    """Gauss-Legendre in cos(theta) times the trapezoid rule in phi.

    ``axis`` selects which Cartesian coordinate plays the role of
    cos(theta).  ``breakpoints`` (ascending, from -1 to 1) turns the polar
    factor into a composite rule with ``polar_order`` nodes per panel, which
    is how sharply concentrated integrands are resolved.
    """
    if polar_order < 8 or azimuthal_order < 16:
        raise InsufficientResolution(
            f"need polar_order >= 8 and azimuthal_order >= 16, "
            f"got ({polar_order}, {azimuthal_order})")
    if breakpoints is None:
        breakpoints = (-1.0, 1.0)
    bp = np.asarray(breakpoints, dtype=float)
    if bp[0] != -1.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
        raise ValueError("breakpoints must increase from -1 to 1")
    x, wx = _gauss_legendre_panels(polar_order, bp)
    phi = 2.0 * np.pi * np.arange(azimuthal_order) / azimuthal_order
    wphi = 2.0 * np.pi / azimuthal_order

    s = np.sqrt(np.clip(1.0 - x**2, 0.0, None))
    c = x[:, None] * np.ones_like(phi)[None, :]
    a = s[:, None] * np.cos(phi)[None, :]
    b = s[:, None] * np.sin(phi)[None, :]
    # (a, b, c) is right-handed about the chosen axis
    others = [(axis + 1) % 3, (axis + 2) % 3]
    nodes = np.empty((x.size * azimuthal_order, 3))
    nodes[:, axis] = c.ravel()
    nodes[:, others[0]] = a.ravel()
    nodes[:, others[1]] = b.ravel()
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    weights = np.repeat(wx * wphi, azimuthal_order)
    half = None
    if azimuthal_order % 2 == 0 and np.allclose(bp, -bp[::-1], rtol=0, atol=1e-15) \
            and not np.any(np.abs(x) < 1e-300):
        half = np.repeat(x > 0, azimuthal_order)
    return SphereQuadrature(nodes, weights, polar_order, azimuthal_order, half)


def graded_breakpoints(centres, levels: int = 20, ratio: float = 0.5):
    """Breakpoints on [-1, 1] refined geometrically toward ``centres``.

    Around each centre c the panels have widths ratio**j for j up to
    ``levels``; the result is suitable for ``build_quadrature``.
    """
    pts = {-1.0, 1.0}
    for c in centres:
        for j in range(levels + 1):
            d = ratio**j
            for q in (c - d, c + d):
                if -1.0 < q < 1.0:
                    pts.add(q)
        if -1.0 < c < 1.0:
            pts.add(float(c))
    return np.array(sorted(pts))


def _as_mu(mu):
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] != 3:
        raise ValueError(f"multipliers must have trailing dimension 3, got {mu.shape}")
    if not np.all(np.isfinite(mu)):
        raise ValueError("multipliers must be finite")
    return mu


def project_zero_sum(mu) -> np.ndarray:
    """Project onto {sum = 0} (the traceless plane X)."""
    mu = np.asarray(mu, dtype=float)
    return mu - mu.mean(axis=-1, keepdims=True)


def _warn_range(mu):
    if np.max(np.abs(mu), initial=0.0) > RELIABLE_MU:
        warnings.warn(
            f"|mu| exceeds {RELIABLE_MU:g}; the default quadrature may be "
            "under-resolved, raise the orders", RuntimeWarning, stacklevel=3)


def shifted_density(mu, quad: SphereQuadrature):
    """Return (w_a exp(mu.p_a^2 - mu_max), mu_max) on the working nodes."""
    mu = _as_mu(mu)
    shift = mu.max(axis=-1)
    expo = mu @ quad.work_sq.T - shift[..., None]
    return np.exp(expo) * quad.work_weights, shift


def partition_Z(mu, quad: SphereQuadrature):
    mu = _as_mu(mu)
    _warn_range(mu)
    dens, shift = shifted_density(mu, quad)
    return np.exp(shift) * dens.sum(axis=-1)


def log_partition(mu, quad: SphereQuadrature):
    """ln Z(mu) without overflow."""
    mu = _as_mu(mu)
    dens, shift = shifted_density(mu, quad)
    return shift + np.log(dens.sum(axis=-1))


CHUNK = 2048


# orthonormal basis of the zero-sum plane; p^2 - 1/3 always lies in it
_PLANE = np.array([[-1.0, 1.0, 0.0], [1.0, 1.0, -2.0]]).T / np.sqrt([2.0, 6.0])


def _moments_flat(mu, quad):
    dens, shift = shifted_density(mu, quad)
    z = dens.sum(axis=-1)
    prob = dens / z[:, None]
    grad = prob @ quad.work_sq
    # sum_j p_j^2 = 1, so the covariance is supported on the plane: form it
    # from two centred coordinates and lift back
    xy = quad.work_sq @ _PLANE
    mean = grad @ _PLANE
    cx = xy[None, :, 0] - mean[:, 0:1]
    cy = xy[None, :, 1] - mean[:, 1:2]
    pcx = prob * cx
    sxx = np.einsum("bn,bn->b", pcx, cx)
    sxy = np.einsum("bn,bn->b", pcx, cy)
    syy = np.einsum("bn,bn->b", prob * cy, cy)
    red = np.stack([np.stack([sxx, sxy], -1), np.stack([sxy, syy], -1)], -2)
    hess = _PLANE @ red @ _PLANE.T
    return shift + np.log(z), grad, hess


def moments(mu, quad: SphereQuadrature):
    """ln Z, its gradient and Hessian in one pass over the nodes.

    The Hessian is the covariance of (p_1^2, p_2^2, p_3^2), formed from
    centred second moments so it stays accurate for sharply peaked
    densities.  Large batches are processed in chunks to bound memory.
    """
    mu = _as_mu(mu)
    batch = mu.shape[:-1]
    flat = mu.reshape(-1, 3)
    n = flat.shape[0]
    logz = np.empty(n)
    grad = np.empty((n, 3))
    hess = np.empty((n, 3, 3))
    for lo in range(0, n, CHUNK):
        sl = slice(lo, min(lo + CHUNK, n))
        logz[sl], grad[sl], hess[sl] = _moments_flat(flat[sl], quad)
    return logz.reshape(batch), grad.reshape(batch + (3,)), hess.reshape(batch + (3, 3))


def logZ_grad(mu, quad: SphereQuadrature):
    mu = _as_mu(mu)
    dens, _ = shifted_density(mu, quad)
    return (dens @ quad.work_sq) / dens.sum(axis=-1)[..., None]


def logZ_hess(mu, quad: SphereQuadrature):
    return moments(mu, quad)[2]


_DEFAULT = {}


def default_quadrature(polar_order: int = 32, azimuthal_order: int = 64) -> SphereQuadrature:
    key = (polar_order, azimuthal_order)
    if key not in _DEFAULT:
        _DEFAULT[key] = build_quadrature(*key)
    return _DEFAULT[key]
