"""Allen-Cahn u_t = Lap u - eps^2 u (u^2 - 1) by explicit Euler."""

from __future__ import annotations

import math

import numpy as np

from .field import Field2D, grid_spacing

AC_EPS = 220.0
AC_T = 2e-4
AC_GRID = 64


def stable_dt(n: int, eps: float, boundary: str = "periodic") -> float:
    h = grid_spacing(n, boundary)
    return min(h * h / 8, 0.5 / eps**2)


def _laplacian(u: np.ndarray, h: float, boundary: str) -> np.ndarray:
    if boundary == "periodic":
        return (np.roll(u, 1, 0) + np.roll(u, -1, 0) + np.roll(u, 1, 1) + np.roll(u, -1, 1) - 4 * u) / (h * h)
    lap = np.zeros_like(u)
    lap[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4 * u[1:-1, 1:-1]) / (h * h)
    return lap


def allen_cahn_solve(
    u0: Field2D, eps: float = AC_EPS, T: float = AC_T, dt: float | None = None, boundary: str | None = None
) -> Field2D:
    """Integrate to ``T`` with a uniform step no larger than ``dt``.

    ``boundary`` defaults to the field's own kind; for Dirichlet the boundary
    samples are held at their initial values.
    """
    boundary = boundary or u0.boundary
    n = u0.n
    bound = stable_dt(n, eps, boundary)
    if dt is None:
        dt = bound / 4
    if dt > bound:
        raise ValueError(f"dt={dt} exceeds stability bound {bound}")
    steps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / steps
    h = grid_spacing(n, boundary)
    u = np.array(u0.values, dtype=np.float64)
    e2 = eps * eps
    for _ in range(steps):
        du = _laplacian(u, h, boundary) - e2 * u * (u * u - 1)
        if boundary != "periodic":
            du[0, :] = du[-1, :] = du[:, 0] = du[:, -1] = 0
        u = u + dt * du
    return Field2D(u, u0.boundary if boundary == u0.boundary else boundary)
