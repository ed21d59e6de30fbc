"""Numerical certificates for the analytic estimates on the potential.

Each ``check_*`` returns a :class:`VerificationReport`; the remaining
functions tabulate the asymptotic quantities the certificates rest on.
"""
from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from . import bm_potential as bm
from .partition import (SphereQuadrature, build_quadrature, default_quadrature,
                        graded_breakpoints, logZ_hess)

THIRD = 1.0 / 3.0


class DegenerateDirection(ValueError):
    """Direction with coincident components; use :func:`case2_f_alpha`."""


@dataclass
class VerificationReport:
    check_name: str
    samples: int
    worst_value: float
    witness: dict
    passed: bool
    tolerance: float
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        rec = {k: v for k, v in asdict(self).items() if k != "extra"}
        rec.update(self.extra)
        return json.dumps(rec, sort_keys=True, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj))


def worker_count() -> int:
    return max(1, int(os.environ.get("BMFLOW_WORKERS", "1")))


def _chunked(fn, n, chunk=2500):
    """Apply ``fn(slice)`` over [0, n) in fixed chunks; results keep chunk order
    so reductions do not depend on the worker count."""
    slices = [slice(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    workers = worker_count()
    if workers == 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, slices))


# ---------------------------------------------------------------- sampling

def sample_spectra(rng, n, margin):
    """Eigenvalue triples uniform on the physical simplex shrunk by ``margin``.

    lambda + 1/3 lies in the probability simplex; each barycentric
    coordinate is kept at least ``margin`` away from 0.
    """
    if not 0.0 <= margin < THIRD:
        raise ValueError("margin must lie in [0, 1/3)")
    b = margin + (1.0 - 3.0 * margin) * rng.dirichlet(np.ones(3), size=n)
    lam = b - THIRD
    return lam - lam.mean(axis=1, keepdims=True)


def random_rotations(rng, n):
    a = rng.standard_normal((n, 3, 3))
    qm, r = np.linalg.qr(a)
    qm = qm * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]
    det = np.linalg.det(qm)
    qm[:, :, 0] *= det[:, None]
    return qm


def random_traceless(rng, n):
    """Unit-Frobenius symmetric traceless matrices (isotropic law)."""
    a = rng.standard_normal((n, 3, 3))
    v = 0.5 * (a + np.swapaxes(a, 1, 2))
    v -= np.trace(v, axis1=1, axis2=2)[:, None, None] * np.eye(3) / 3.0
    return v / np.linalg.norm(v, axis=(1, 2))[:, None, None]


def sample_tensors(rng, n, margin):
    lam = sample_spectra(rng, n, margin)
    rot = random_rotations(rng, n)
    q = np.einsum("nik,nk,njk->nij", rot, lam, rot)
    return lam, q


# ------------------------------------------------------- Hessian lower bound

def check_ftest1(n_samples: int = 10_000, margin: float = 0.02, seed: int = 42,
                 quad: SphereQuadrature | None = None, tol: float = 1e-12,
                 floor: float = 1e-12) -> VerificationReport:
    """Empirical constant in D^2 f(Q)[V,V] >= eps (L[df/dQ] : V)^2.

    The infimum over samples of the ratio is reported as eps-hat; samples
    whose denominator is below ``floor`` are skipped and counted.
    """
    if not 0.0 < margin < 0.1:
        raise ValueError("margin must lie in (0, 0.1)")
    quad = quad or default_quadrature()
    rng = np.random.default_rng(seed)
    _, q = sample_tensors(rng, n_samples, margin)
    v = random_traceless(rng, n_samples)

    def work(sl):
        grad = bm.df_dQ(q[sl], tol, quad)
        num = bm.hess_contract(q[sl], v[sl], tol, quad)
        den = np.sum(grad * v[sl], axis=(-2, -1)) ** 2
        return num, den

    parts = _chunked(work, n_samples)
    num = np.concatenate([p[0] for p in parts])
    den = np.concatenate([p[1] for p in parts])
    keep = den > floor
    ratio = np.full(n_samples, np.inf)
    ratio[keep] = num[keep] / den[keep]
    i = int(np.argmin(ratio))
    worst = float(ratio[i])
    witness = dict(index=i, Q=q[i], V=v[i],
                   spectrum=bm.eigendecomp_sym3(q[i]).spectrum.lam,
                   numerator=float(num[i]), denominator=float(den[i]))
    return VerificationReport(
        "ftest1", n_samples, worst, witness,
        passed=bool(np.isfinite(worst) and worst > 0.0), tolerance=0.0,
        extra=dict(margin=margin, seed=seed, skipped=int(np.sum(~keep)),
                   min_numerator=float(num.min())))


def ftest1_sweep(margins=(0.05, 0.02, 0.01, 0.005), n_samples: int = 10_000,
                 seed: int = 42, quad: SphereQuadrature | None = None, tol: float = 1e-12):
    """check_ftest1 at each margin, plus the infimum over nested domains.

    A sample drawn with a wider margin also lies in every narrower-margin
    domain, so ``extra["nested_infimum"]`` (the minimum over all margins
    >= m) is an estimate of the infimum over that domain and is
    non-increasing as the margin shrinks.
    """
    reports = {m: check_ftest1(n_samples, m, seed, quad, tol) for m in margins}
    running = np.inf
    for m in sorted(margins, reverse=True):
        running = min(running, reports[m].worst_value)
        reports[m].extra["nested_infimum"] = running
    return [reports[m] for m in margins]


def concavity_matrix(lam, epsilon, tol=1e-12, quad=None):
    """N^{-1} - eps mu (x) mu in the (f1, f2) coordinates of X."""
    ev = bm.fbm_eval(lam, tol, quad)
    mat = ev.hess - epsilon * ev.mu[..., :, None] * ev.mu[..., None, :]
    return bm.BASIS.T @ mat @ bm.BASIS, ev


def check_h_concavity(epsilon: float, n_samples: int = 10_000, margin: float = 0.02,
                      seed: int = 42, quad: SphereQuadrature | None = None,
                      tol: float = 1e-12) -> VerificationReport:
    """Minimum eigenvalue of N^{-1} - eps mu (x) mu on X over sampled spectra.

    Spectra are drawn exactly as in :func:`check_ftest1` for the same seed.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    quad = quad or default_quadrature()
    rng = np.random.default_rng(seed)
    lam = sample_spectra(rng, n_samples, margin)

    def work(sl):
        red, _ = concavity_matrix(lam[sl], epsilon, tol, quad)
        return np.linalg.eigvalsh(red)[:, 0]

    mins = np.concatenate(_chunked(work, n_samples))
    i = int(np.argmin(mins))
    return VerificationReport(
        "h_concavity", n_samples, float(mins[i]), dict(index=i, spectrum=lam[i]),
        passed=bool(mins[i] > 0.0), tolerance=0.0,
        extra=dict(epsilon=epsilon, margin=margin, seed=seed))


# ---------------------------------------------- Laplace asymptotics, case I

def _unit_direction(gamma):
    g = np.asarray(gamma, dtype=float)
    if g.shape != (3,):
        raise ValueError("gamma must be a 3-vector")
    if abs(g.sum()) > 1e-8 or abs(np.linalg.norm(g) - 1.0) > 1e-8:
        raise ValueError("gamma must be a unit vector with zero sum")
    g = g - g.mean()
    return g / np.linalg.norm(g)


def peak_quadrature(gamma, polar_order=16, azimuthal_order=128, levels=30):
    """Sphere rule with its polar axis on the largest component of ``gamma``
    and panels graded toward both poles, where exp(rho gamma.p^2) peaks."""
    axis = int(np.argmax(gamma))
    bp = graded_breakpoints([-1.0, 1.0], levels=levels)
    return build_quadrature(polar_order, azimuthal_order, axis=axis, breakpoints=bp)


def _pair_terms(mu, gamma, rho, quad):
    """Weighted node densities and the X, Y_ij factors of the pair integrand."""
    sq = quad.work_sq
    dens = np.exp(rho * (sq @ gamma - gamma.max())) * quad.work_weights
    x = sq @ mu
    y = mu[None, :, None] * sq[:, None, :] + mu[None, None, :] * sq[:, :, None]
    return dens, x, y


def pair_integrals(gamma, rho, quad, method="factorized"):
    """Numerator matrix and denominator of I_ij(rho gamma) over S^2 x S^2.

    numerator_ij = sum_{a,b} E_a E_b (X_a - X_b)(Y_ij,a - Y_ij,b) with the
    multipliers replaced by gamma (so it carries no rho^2 prefactor) and
    denominator = 2 sum_{a,b} E_a E_b, where E_a = w_a exp(rho(gamma.p_a^2 -
    max gamma)).  ``method="pairs"`` evaluates the tensor-product rule
    literally in O(n^2); "factorized" uses the identity
    sum_ab E_a E_b (X_a - X_b)(Y_a - Y_b) = 2 (S_E S_EXY - S_EX S_EY), in
    centred form.
    """
    gamma = np.asarray(gamma, dtype=float)
    dens, x, y = _pair_terms(gamma, gamma, rho, quad)
    if method == "pairs":
        dx = x[:, None] - x[None, :]
        dy = y[:, None] - y[None, :]
        ee = dens[:, None] * dens[None, :]
        num = np.einsum("ab,ab,abij->ij", ee, dx, dy)
        den = 2.0 * ee.sum()
    elif method == "factorized":
        z = dens.sum()
        prob = dens / z
        xc = x - prob @ x
        yc = y - np.einsum("a,aij->ij", prob, y)
        num = 2.0 * z * z * np.einsum("a,a,aij->ij", prob, xc, yc)
        den = 2.0 * z * z
    else:
        raise ValueError(f"unknown method {method!r}")
    return num, den


def asymptotic_Iij(gamma, rho_values, quad: SphereQuadrature | None = None,
                   method: str = "factorized") -> np.ndarray:
    """Table of I_ij(rho gamma) for each rho (shape (len(rho_values), 3, 3))."""
    gamma = _unit_direction(gamma)
    top = np.sort(gamma)
    if top[2] - top[1] < 1e-6:
        # the peak set is then a great circle, not two antipodal points
        raise DegenerateDirection(
            f"gamma {gamma} has coincident largest components; use case2_f_alpha")
    quad = quad or peak_quadrature(gamma)
    out = []
    for rho in rho_values:
        if rho < 0:
            raise ValueError("rho must be non-negative")
        num, den = pair_integrals(gamma, rho, quad, method)
        out.append(rho * rho * num / den)
    return np.array(out)


def plateau(values, rel=0.05, run=3):
    """Index of the largest position where ``run`` consecutive entries agree
    within ``rel`` (relative to the last of them), or None."""
    v = np.asarray(values, dtype=float)
    scale = np.linalg.norm(v.reshape(v.shape[0], -1), axis=1)
    for end in range(len(v) - 1, run - 2, -1):
        window = v[end - run + 1:end + 1].reshape(run, -1)
        ref = scale[end]
        if ref == 0.0:
            continue
        if np.max(np.linalg.norm(window - window[-1], axis=1)) <= rel * ref:
            return end
    return None


def bounded_by_plateau(values, rel=0.05, run=3):
    """Boundedness certificate: a plateau exists at the tail and no value
    exceeds twice the plateau magnitude."""
    v = np.asarray(values, dtype=float)
    scale = np.linalg.norm(v.reshape(v.shape[0], -1), axis=1)
    end = plateau(v, rel, run)
    if end is None or end != len(v) - 1:
        return False, end
    return bool(np.max(scale) <= 2.0 * scale[end]), end


def random_directions(rng, n, min_gap=0.1):
    """Unit directions in X whose components are pairwise separated."""
    out = []
    while len(out) < n:
        a = rng.standard_normal(2)
        g = bm.BASIS @ (a / np.linalg.norm(a))
        gaps = np.abs(g[:, None] - g[None, :])[np.triu_indices(3, 1)]
        if gaps.min() >= min_gap:
            out.append(g)
    return np.array(out)


def _loglog_fit(rho, values):
    x = np.log(rho)
    y = np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - resid @ resid / np.sum((y - y.mean()) ** 2)
    return float(slope), float(r2)


def check_laplace_coefficients(gamma, rho_values=None, quad: SphereQuadrature | None = None):
    """Decay exponents of the pair-integral numerator and denominator.

    With d = 4 the denominator decays like rho^-2; the numerator's
    leading and second even coefficients vanish, so it decays like rho^-4
    and I_ij (which carries rho^2) stays bounded.
    """
    g = _unit_direction(gamma)
    top = np.sort(g)
    if top[2] - top[1] < 1e-6:
        raise DegenerateDirection("gamma needs a strict maximum component")
    if rho_values is None:
        rho_values = np.geomspace(100.0, 1000.0, 11)
    rho_values = np.asarray(rho_values, dtype=float)
    quad = quad or peak_quadrature(g)
    nums, dens = [], []
    for rho in rho_values:
        num, den = pair_integrals(g, rho, quad)
        nums.append(np.linalg.norm(num))
        dens.append(den)
    s_den, r2_den = _loglog_fit(rho_values, np.array(dens))
    s_num, r2_num = _loglog_fit(rho_values, np.array(nums))
    s_ratio = s_num + 2.0 - s_den
    passed = abs(s_den + 2.0) <= 0.1 and abs(s_num + 4.0) <= 0.15 and abs(s_ratio) <= 0.2
    return dict(check_name="laplace", gamma=g.tolist(), rho=rho_values.tolist(),
                denominator_slope=s_den, numerator_slope=s_num, ratio_slope=s_ratio,
                r2_denominator=r2_den, r2_numerator=r2_num, passed=bool(passed))


# ------------------------------------------------------ boundary blow-up

def boundary_ray(deltas, axis: int = 0, split: float = 0.5):
    """Spectra approaching the face lambda_axis = -1/3 at distance delta.

    The remaining mass 1 - delta is shared between the other two
    eigenvalues in proportion ``split`` : 1 - split (barycentric form).
    """
    d = np.asarray(deltas, dtype=float)
    if not 0.0 < split < 1.0:
        raise ValueError("split must lie in (0, 1)")
    b = np.empty(d.shape + (3,))
    o1, o2 = (axis + 1) % 3, (axis + 2) % 3
    b[..., axis] = d
    b[..., o1] = split * (1.0 - d)
    b[..., o2] = (1.0 - split) * (1.0 - d)
    return b - THIRD


def boundary_quadrature(axis: int = 0, polar_order: int = 16, azimuthal_order: int = 32,
                        levels: int = 30):
    """Polar axis on e_axis, panels graded toward the great circle p_axis = 0."""
    bp = graded_breakpoints([0.0], levels=levels)
    return build_quadrature(polar_order, azimuthal_order, axis=axis, breakpoints=bp)


def boundary_blowup_fit(deltas=(1e-2, 1e-3, 1e-4, 1e-5), axis: int = 0, split: float = 0.5,
                        quad: SphereQuadrature | None = None, tol: float = 1e-12):
    """Least-squares fit f = c log(delta) + b along :func:`boundary_ray`.

    Logarithmic blow-up shows up as R^2 near one with c < 0.
    """
    deltas = np.asarray(deltas, dtype=float)
    quad = quad or boundary_quadrature(axis)
    with warnings.catch_warnings():
        # large |mu| is expected here and the graded rule resolves it
        warnings.simplefilter("ignore", RuntimeWarning)
        ev = bm.fbm_eval(boundary_ray(deltas, axis, split), tol, quad)
    x = np.log(deltas)
    y = np.asarray(ev.value, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - resid @ resid / np.sum((y - y.mean()) ** 2)
    return dict(check_name="boundary_blowup", delta=deltas.tolist(), f=y.tolist(),
                slope=float(slope), intercept=float(intercept), r2=float(r2),
                passed=bool(r2 > 0.999 and slope < 0.0))


# -------------------------------------------------------------- case II

def _case2_rule(alpha, order):
    """Nodes/weights on s in [0, 1] for integrands exp(-3 alpha^2 s) g(s) (1-s)^-1/2.

    [1/2, 1] uses Gauss-Jacobi with the (1-s)^-1/2 weight built in; [0, 1/2]
    uses Gauss-Legendre panels graded toward s = 0 on the exponential's own
    scale, multiplied by the (smooth there) weight explicitly.
    """
    xj, wj = special.roots_jacobi(order, -0.5, 0.0)
    # s = (3 + x)/4 maps [-1, 1] -> [1/2, 1]; (1 - s)^-1/2 = 2 (1 - x)^-1/2
    s_hi = 0.75 + 0.25 * xj
    w_hi = wj * 0.25 * 2.0
    scale = 1.0 / max(3.0 * alpha * alpha, 1.0)
    cuts = [0.0]
    c = scale / 8.0
    while c < 0.5:
        cuts.append(c)
        c *= 2.0
    cuts.append(0.5)
    xg, wg = np.polynomial.legendre.leggauss(order)
    s_lo, w_lo = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        s = 0.5 * (a + b) + 0.5 * (b - a) * xg
        s_lo.append(s)
        w_lo.append(0.5 * (b - a) * wg / np.sqrt(1.0 - s))
    return np.concatenate(s_lo + [s_hi]), np.concatenate(w_lo + [w_hi])


def case2_f_alpha(alpha_values, k: int = 1, quad_1d_order: int = 32):
    """f(alpha) = int_0^a e^{-3y^2} y^{2k+1} (1-y^2/a^2)^{-1/2} dy /
                  int_0^a e^{-3y^2} y (1-y^2/a^2)^{-1/2} dy.

    With y = alpha sqrt(s) both integrals become integrals over s in [0, 1]
    against (1 - s)^{-1/2}; their ratio is
    alpha^{2k} <s^k> under the weight exp(-3 alpha^2 s) (1-s)^{-1/2}.
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    out = []
    for alpha in alpha_values:
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        s, w = _case2_rule(alpha, quad_1d_order)
        e = np.exp(-3.0 * alpha * alpha * s) * w
        out.append(float((e @ (alpha * alpha * s) ** k) / e.sum()))
    return out


def case2_majorant(alpha, k: int = 1) -> float:
    """Explicit alpha-uniform bound on f(alpha) for alpha > 1:

    [int_0^inf e^{-3y^2} y^{2k+1} dy / sqrt(3/4) + e^{-3a^2/4} a^{2k+2} 2/sqrt(3)]
    / int_0^{1/2} e^{-y^2} y dy.
    """
    tail_moment = math.factorial(k) / (2.0 * 3.0 ** (k + 1))
    num = tail_moment / math.sqrt(0.75) + math.exp(-0.75 * alpha * alpha) \
        * alpha ** (2 * k + 2) * 2.0 / math.sqrt(3.0)
    den = 0.5 * (1.0 - math.exp(-0.25))
    return num / den


# -------------------------------------------------- potential oracle suite

def barycentric_grid(points: int = 50, margin: float = 0.02):
    """Spectra on a triangular grid of the simplex shrunk by ``margin``:
    b = margin + (1 - 3 margin)(i, j, n-1-i-j)/(n-1), lambda = b - 1/3."""
    n = points - 1
    rows = [(i, j, n - i - j) for i in range(n + 1) for j in range(n + 1 - i)]
    b = margin + (1.0 - 3.0 * margin) * np.array(rows, dtype=float) / n
    return b, b - THIRD


def potential_table(points=50, margin=0.02, quad=None, tol=1e-12):
    """Rows (b1, b2, b3, lambda1..3, f, mu1..3, h11, h12, h22, newton_iters).

    h is the Hessian of F on X in the (f1, f2) coordinates."""
    quad = quad or default_quadrature()
    b, lam = barycentric_grid(points, margin)
    lam = lam - lam.mean(axis=1, keepdims=True)
    ev = bm.fbm_eval(lam, tol, quad)
    red = bm.BASIS.T @ ev.hess @ bm.BASIS
    header = ["b1", "b2", "b3", "lambda1", "lambda2", "lambda3", "f", "mu1", "mu2", "mu3",
              "h11", "h12", "h22"]
    cols = np.column_stack([b, lam, ev.value, ev.mu, red[:, 0, 0], red[:, 0, 1], red[:, 1, 1]])
    return header, cols


def potential_oracle_suite(n_samples=200, seed=0, margin=0.02, quad=None, tol=1e-12):
    """Duality, gradient and Hessian identities on random physical tensors."""
    quad = quad or default_quadrature()
    rng = np.random.default_rng(seed)
    lam, q = sample_tensors(rng, n_samples, margin)
    v = random_traceless(rng, n_samples)
    reports = []

    fq = bm.f_of_Q(q, tol, quad)
    primal = np.array([bm.primal_entropy_oracle(x, quad, tol) for x in q])
    err = np.abs(fq - primal)
    i = int(np.argmax(err))
    reports.append(VerificationReport("duality", n_samples, float(err[i]), dict(Q=q[i]),
                                      bool(err[i] <= 1e-8), 1e-8))

    h = 1e-5
    fd = (bm.f_of_Q(q + h * v, tol, quad) - bm.f_of_Q(q - h * v, tol, quad)) / (2 * h)
    an = np.sum(bm.df_dQ(q, tol, quad) * v, axis=(1, 2))
    rel = np.abs(fd - an) / np.abs(an)
    i = int(np.argmax(rel))
    reports.append(VerificationReport("gradient", n_samples, float(rel[i]), dict(Q=q[i], V=v[i]),
                                      bool(rel[i] < 1e-4), 1e-4))

    ev = bm.fbm_eval(lam, tol, quad)
    n_mat = logZ_hess(ev.mu, quad)
    proj = np.eye(3) - 1.0 / 3.0
    ident = np.max(np.abs(ev.hess @ n_mat - proj), axis=(1, 2))
    i = int(np.argmax(ident))
    reports.append(VerificationReport("hessian_identity", n_samples, float(ident[i]),
                                      dict(spectrum=lam[i]), bool(ident[i] <= 1e-8), 1e-8))

    h = 1e-4
    f0 = fq
    fd2 = (bm.f_of_Q(q + h * v, tol, quad) - 2 * f0 + bm.f_of_Q(q - h * v, tol, quad)) / h**2
    hc = bm.hess_contract(q, v, tol, quad)
    rel = np.abs(fd2 - hc) / np.abs(hc)
    i = int(np.argmax(rel))
    reports.append(VerificationReport("hessian_fd", n_samples, float(rel[i]), dict(Q=q[i], V=v[i]),
                                      bool(rel[i] <= 1e-3), 1e-3))
    return reports
