"""Closed-form multiscale standing waves on the unit square."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import Field2D, grid_coords

WAVE_K = 24
WAVE_SPEED = 0.1


@dataclass(frozen=True)
class SineCoeffs:
    a: np.ndarray  # (K, K), a[i-1, j-1] multiplies sin(pi i x) sin(pi j y)
    c: float = WAVE_SPEED

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"coefficients must be a non-empty K x K array, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "a", a)

    @property
    def K(self) -> int:
        return self.a.shape[0]


def _amplitudes(coeffs: SineCoeffs, t: float) -> np.ndarray:
    K = coeffs.K
    i = np.arange(1, K + 1)
    r2 = i[:, None] ** 2 + i[None, :] ** 2
    return (np.pi / K**2) * coeffs.a / r2 * np.cos(coeffs.c * np.pi * t * np.sqrt(r2))


def wave_at(coeffs: SineCoeffs, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solution values on the tensor grid ``x`` by ``y``."""
    i = np.arange(1, coeffs.K + 1)
    sx = np.sin(np.pi * np.outer(x, i))
    sy = np.sin(np.pi * np.outer(y, i))
    return sx @ _amplitudes(coeffs, t) @ sy.T


def wave_exact_solution(coeffs: SineCoeffs, t: float, n: int) -> Field2D:
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    x = grid_coords(n, "dirichlet-zero")
    return Field2D(wave_at(coeffs, t, x, x), "dirichlet-zero")


def sample_wave_initial(seed, K: int = WAVE_K, n: int = 64, c: float = WAVE_SPEED) -> tuple[SineCoeffs, Field2D]:
    """Draw ``a_ij ~ U[-1, 1]`` and sample the initial displacement."""
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    rng = np.random.default_rng(seed)
    coeffs = SineCoeffs(rng.uniform(-1.0, 1.0, size=(K, K)), c)
    return coeffs, wave_exact_solution(coeffs, 0.0, n)


def project_sine(values: np.ndarray, K: int) -> np.ndarray:
    """Sine coefficients ``4 * int f sin(pi i x) sin(pi j y)`` by vertex quadrature.

    Returned in the same convention as :class:`SineCoeffs` amplitudes,
    i.e. ``f ~ sum b_ij sin sin`` with ``b = project_sine(f)``.
    """
    n = values.shape[0]
    x = grid_coords(n, "dirichlet-zero")
    h = 1.0 / (n - 1)
    i = np.arange(1, K + 1)
    s = np.sin(np.pi * np.outer(x, i))
    # boundary samples vanish for sine data, so trapezoid == plain sum on the interior
    return 4 * h * h * (s.T @ values @ s)


def coeffs_from_amplitudes(b: np.ndarray, c: float = WAVE_SPEED) -> SineCoeffs:
    """Invert the ``(pi / K^2) (i^2 + j^2)^-1`` scaling applied to ``a_ij``."""
    K = b.shape[0]
    i = np.arange(1, K + 1)
    r2 = i[:, None] ** 2 + i[None, :] ** 2
    return SineCoeffs(b * r2 * K**2 / np.pi, c)
