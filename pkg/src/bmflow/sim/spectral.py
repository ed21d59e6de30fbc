"""Fourier tools on the 2 pi periodic box [-pi, pi)^3."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft


def _workers():
    return max(1, int(os.environ.get("BMFLOW_WORKERS", "1")))


@dataclass(frozen=True)
class Grid:
    """N^3 collocation grid with real-FFT wavenumbers.

    ``kd`` are derivative wavenumbers (Nyquist entries zeroed so that the
    spectral gradient is exactly skew-adjoint under grid sums); ``keep``
    marks modes with every |k_i| <= (N-1)//3, so a product of three kept
    fields is summed exactly by the grid.
    """

    n: int
    x: np.ndarray = field(init=False, repr=False, compare=False)
    kd: tuple = field(init=False, repr=False, compare=False)
    kw: tuple = field(init=False, repr=False, compare=False)
    k2: np.ndarray = field(init=False, repr=False, compare=False)
    keep: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n
        if n < 4 or n % 2:
            raise ValueError("grid size must be even and >= 4")
        x1 = -np.pi + 2.0 * np.pi * np.arange(n) / n
        object.__setattr__(self, "x", np.stack(np.meshgrid(x1, x1, x1, indexing="ij")))
        kf = np.fft.fftfreq(n, 1.0 / n)
        kr = np.fft.rfftfreq(n, 1.0 / n)
        kx, ky, kz = np.meshgrid(kf, kf, kr, indexing="ij")
        nyq = n // 2
        kd = tuple(np.where(np.abs(k) == nyq, 0.0, k) for k in (kx, ky, kz))
        object.__setattr__(self, "kd", kd)
        object.__setattr__(self, "kw", (kx, ky, kz))
        object.__setattr__(self, "k2", kx**2 + ky**2 + kz**2)
        object.__setattr__(self, "keep", self.band((n - 1) // 3))

    def band(self, kmax):
        """Mask of modes with every |k_i| <= kmax."""
        kx, ky, kz = self.kw
        return (np.abs(kx) <= kmax) & (np.abs(ky) <= kmax) & (np.abs(kz) <= kmax)

    @property
    def shape(self):
        return (self.n,) * 3

    @property
    def cell_volume(self):
        return (2.0 * np.pi / self.n) ** 3

    @property
    def spacing(self):
        return 2.0 * np.pi / self.n

    def integrate(self, f):
        """Grid sum times cell volume over the last three axes (pairwise summation)."""
        return np.sum(f, axis=(-3, -2, -1)) * self.cell_volume

    # transforms --------------------------------------------------------
    def fft(self, f):
        return sfft.rfftn(f, axes=(-3, -2, -1), workers=_workers())

    def ifft(self, fh):
        return sfft.irfftn(fh, s=self.shape, axes=(-3, -2, -1), workers=_workers())

    def grad_hat(self, fh):
        """Spectral gradient; a new axis of size 3 just before the spatial
        axes indexes d/dx_j, so grad(u)[i, j] = d_j u_i."""
        return np.stack([1j * k * fh for k in self.kd], axis=-4)

    def grad(self, f):
        return self.ifft(self.grad_hat(self.fft(f)))

    def div(self, v):
        """Contract d_j against axis -4: div of a vector (3, N, N, N), or the
        row divergence d_j T_ij of a tensor (3, 3, N, N, N)."""
        vh = self.fft(v)
        out = sum(1j * self.kd[j] * vh[..., j, :, :, :] for j in range(3))
        return self.ifft(out)

    def laplacian(self, f):
        return self.ifft(-self.k2 * self.fft(f))

    def dealias(self, fh):
        return fh * self.keep

    def leray_project(self, uh):
        """Remove the gradient part of a spectral vector field (axis 0 = component)."""
        kk = sum(k * k for k in self.kd)
        safe = np.where(kk == 0, 1.0, kk)
        kdotu = sum(self.kd[j] * uh[j] for j in range(3))
        coef = np.where(kk == 0, 0.0, kdotu / safe)
        return np.stack([uh[j] - self.kd[j] * coef for j in range(3)])

    def divergence_norm(self, u):
        """max |div u| evaluated spectrally."""
        return float(np.max(np.abs(self.div(u))))


def leray_project(uh, grid: Grid):
    return grid.leray_project(uh)
