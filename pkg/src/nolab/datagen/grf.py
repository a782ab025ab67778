"""Gaussian random fields with shifted-Laplacian covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import Field2D, grid_coords


@dataclass(frozen=True)
class GRFSpec:
    """Measure N(0, sigma^2 (-Laplacian + tau^2 I)^(-exponent)).

    ``exponent`` is the covariance exponent, so each eigenmode's
    coefficient has standard deviation ``sigma * (lambda + tau^2)^(-exponent/2)``.
    The constant mode is dropped when ``zero_mean`` is set (periodic and
    Neumann bases only).
    """

    exponent: float
    tau: float
    sigma: float = 1.0
    boundary: str = "periodic"
    zero_mean: bool = True

    def __post_init__(self):
        if self.exponent <= 0 or self.tau <= 0 or self.sigma < 0:
            raise ValueError(f"invalid GRF spec: exponent={self.exponent}, tau={self.tau}, sigma={self.sigma}")


NS_GRF = GRFSpec(exponent=2.5, tau=7.0, sigma=7.0**1.5, boundary="periodic")
DARCY_GRF = GRFSpec(exponent=2.0, tau=3.0, sigma=1.0, boundary="neumann")


def mode_std(spec: GRFSpec, eigenvalue: np.ndarray) -> np.ndarray:
    return spec.sigma * (eigenvalue + spec.tau**2) ** (-spec.exponent / 2)


def periodic_eigenvalues(n: int) -> np.ndarray:
    k = np.fft.fftfreq(n, 1.0 / n)
    return 4 * np.pi**2 * (k[:, None] ** 2 + k[None, :] ** 2)


def sample_grf(spec: GRFSpec, seed, n: int) -> Field2D:
    """Draw one field on an ``n x n`` grid.

    Periodic fields use the Fourier basis ``exp(2 pi i k.x)``; the FFT
    coefficient of mode ``k`` divided by ``n^2`` then has variance
    ``sigma^2 (4 pi^2 |k|^2 + tau^2)^(-exponent)``. Dirichlet fields use
    ``sin(pi i x) sin(pi j y)`` and Neumann fields ``cos(pi i x) cos(pi j y)``
    with eigenvalues ``pi^2 (i^2 + j^2)``, each coefficient standard normal
    times the mode's standard deviation.
    """
    rng = np.random.default_rng(seed)
    if spec.sigma == 0:
        return Field2D(np.zeros((n, n)), spec.boundary)
    if spec.boundary == "periodic":
        noise = rng.standard_normal((n, n))
        amp = mode_std(spec, periodic_eigenvalues(n))
        if spec.zero_mean:
            amp[0, 0] = 0.0
        # fft2(noise) / n has unit variance per mode and Hermitian symmetry
        values = np.fft.ifft2(np.fft.fft2(noise) * amp * n).real
        return Field2D(values, "periodic")

    x = grid_coords(n, spec.boundary)
    if spec.boundary == "dirichlet-zero":
        idx = np.arange(1, n)
        basis = np.sin(np.pi * np.outer(x, idx))
    else:
        idx = np.arange(0, n)
        basis = np.cos(np.pi * np.outer(x, idx))
    lam = np.pi**2 * (idx[:, None] ** 2 + idx[None, :] ** 2)
    coeff = rng.standard_normal(lam.shape) * mode_std(spec, lam)
    if spec.boundary == "neumann" and spec.zero_mean:
        coeff[0, 0] = 0.0
    return Field2D(basis @ coeff @ basis.T, spec.boundary)
