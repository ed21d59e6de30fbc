"""Material parameters and constitutive laws for the flow model."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator


class ParameterError(ValueError):
    """A constitutive hypothesis is violated; the message names the inequality."""


@dataclass(frozen=True)
class Viscosity:
    """mu(theta), bounded above and below.

    kind "rational": mu0 + mu1 theta^2/(1 + theta^2)
    kind "constant": mu0
    kind "table":    monotone-preserving cubic through (theta_points, values),
                     held constant outside the table
    """

    kind: str = "rational"
    mu0: float = 1.0
    mu1: float = 0.5
    theta_points: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("rational", "constant", "table"):
            raise ParameterError(f"unknown viscosity kind {self.kind!r}")
        if self.kind == "table":
            t = np.asarray(self.theta_points, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2 or np.any(np.diff(t) <= 0):
                raise ParameterError("viscosity table needs >= 2 increasing theta points "
                                     "with matching values")

    @property
    def bounds(self):
        if self.kind == "constant":
            return self.mu0, self.mu0
        if self.kind == "rational":
            return min(self.mu0, self.mu0 + self.mu1), max(self.mu0, self.mu0 + self.mu1)
        v = np.asarray(self.values, dtype=float)
        # the shape-preserving interpolant never leaves the data range
        return float(v.min()), float(v.max())

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "constant":
            return np.full_like(theta, self.mu0)
        if self.kind == "rational":
            t2 = theta * theta
            return self.mu0 + self.mu1 * t2 / (1.0 + t2)
        t = np.asarray(self.theta_points, dtype=float)
        interp = PchipInterpolator(t, np.asarray(self.values, dtype=float), extrapolate=False)
        return interp(np.clip(theta, t[0], t[-1]))


@dataclass(frozen=True)
class ModelParams:
    xi: float = 0.5
    lambda_bulk: float = 1.0
    a: float = 1.0
    m: float = 2.0
    A0: float = 1.0
    Ak: float = 1.0
    k: float = 8.0
    A_minus2: float = 0.0
    Gamma0: float = 1.0
    Gamma1: float = 1.0
    viscosity: Viscosity = field(default_factory=Viscosity)

    def __post_init__(self):
        validate(self)

    @property
    def singular_flux(self) -> bool:
        return self.A_minus2 > 0.0

    # constitutive laws ------------------------------------------------
    def mu(self, theta):
        return self.viscosity(theta)

    def kappa(self, theta):
        out = self.A0 + self.Ak * theta**self.k
        if self.A_minus2 > 0.0:
            out = out + self.A_minus2 * theta**-2.0
        return out

    def Gamma(self, theta):
        return self.Gamma0 + self.Gamma1 * theta

    def internal_thermal(self, theta):
        """theta + a(m-1) theta^m, the thermal part of the internal energy."""
        return theta + self.a * (self.m - 1.0) * theta**self.m

    def c_eff(self, theta):
        return 1.0 + self.a * self.m * (self.m - 1.0) * theta ** (self.m - 1.0)

    def H_theta(self, theta):
        """A0 log theta + (Ak/k) theta^k - (A_-2/2) theta^-2; its gradient is kappa/theta grad theta."""
        return (self.A0 * np.log(theta) + self.Ak / self.k * theta**self.k
                - 0.5 * self.A_minus2 * theta**-2.0)

    def digest(self) -> bytes:
        """SHA-256 of the canonical JSON form, stored in checkpoints."""
        text = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).digest()


def validate(p: ModelParams) -> None:
    problems = []
    big_a = (3.0 * p.k + 2.0 * p.m) / 3.0
    if not big_a > 9.0:
        problems.append(f"exponent condition violated: A = (3k+2m)/3 = {big_a:.4g} ≤ 9")
    if not p.m > 1.5:
        problems.append(f"exponent condition violated: m = {p.m:g} ≤ 3/2")
    if not p.m <= 1.2 * p.k:
        problems.append(f"exponent condition violated: m = {p.m:g} > 6k/5 = {1.2 * p.k:.4g}")
    if not p.a > 0:
        problems.append(f"heat capacity coefficient a = {p.a:g} must be > 0")
    if not (p.A0 > 0 and p.Ak > 0):
        problems.append(f"conductivity coefficients need A0 > 0 and Ak > 0, got {p.A0:g}, {p.Ak:g}")
    if not p.A_minus2 >= 0:
        problems.append(f"singular conductivity coefficient A_-2 = {p.A_minus2:g} must be ≥ 0")
    if not (p.Gamma0 > 0 and p.Gamma1 > 0):
        problems.append(f"Gamma(theta) = Gamma0 + Gamma1 theta needs Gamma0 > 0 and Gamma1 > 0, "
                        f"got {p.Gamma0:g}, {p.Gamma1:g}")
    if not p.lambda_bulk >= 0:
        problems.append(f"lambda = {p.lambda_bulk:g} must be ≥ 0")
    lo, hi = p.viscosity.bounds
    if not 0 < lo <= hi:
        problems.append(f"viscosity bounds violated: need 0 < mu_lower ≤ mu_upper, got {lo:g}, {hi:g}")
    else:
        sample = p.viscosity(np.geomspace(1e-3, 1e3, 61))
        if np.any(sample < lo - 1e-12) or np.any(sample > hi + 1e-12):
            problems.append("viscosity leaves its declared bounds on sampled temperatures")
    if problems:
        raise ParameterError("; ".join(problems))
