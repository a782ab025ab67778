"""Steady Darcy flow -div(a grad u) = f with zero Dirichlet boundary."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .field import Field2D, grid_coords
from .grf import DARCY_GRF, GRFSpec, sample_grf

DARCY_HIGH, DARCY_LOW = 12.0, 3.0


class ConvergenceError(RuntimeError):
    pass


def darcy_sample_coefficient(seed, n: int, spec: GRFSpec = DARCY_GRF) -> Field2D:
    """Threshold a GRF draw: 12 where it is non-negative, 3 elsewhere."""
    g = sample_grf(spec, seed, n)
    return Field2D(np.where(g.values >= 0, DARCY_HIGH, DARCY_LOW), "dirichlet-zero")


def darcy_matrix(a: np.ndarray) -> sp.csr_matrix:
    """Five-point flux-form operator on interior vertices, harmonic-mean faces."""
    n = a.shape[0]
    h = 1.0 / (n - 1)
    m = n - 2

    def face(p, q):
        return 2 * p * q / (p + q)

    ac = a[1:-1, 1:-1]
    east = face(ac, a[2:, 1:-1])
    west = face(ac, a[:-2, 1:-1])
    north = face(ac, a[1:-1, 2:])
    south = face(ac, a[1:-1, :-2])
    diag = (east + west + north + south).ravel()
    idx = np.arange(m * m).reshape(m, m)
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [diag]
    # off-diagonals: neighbour along axis 0 (i +/- 1) and axis 1 (j +/- 1)
    rows += [idx[:-1, :].ravel(), idx[1:, :].ravel(), idx[:, :-1].ravel(), idx[:, 1:].ravel()]
    cols += [idx[1:, :].ravel(), idx[:-1, :].ravel(), idx[:, 1:].ravel(), idx[:, :-1].ravel()]
    vals += [-east[:-1, :].ravel(), -west[1:, :].ravel(), -north[:, :-1].ravel(), -south[:, 1:].ravel()]
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m * m, m * m)
    )
    return A / (h * h)


def pcg(A, b: np.ndarray, rtol: float = 1e-10, max_iter: int = 20000) -> tuple[np.ndarray, int]:
    """Jacobi-preconditioned conjugate gradients; stops on ``||b - Ax|| <= rtol ||b||``."""
    inv_diag = 1.0 / A.diagonal()
    x = np.zeros_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b)
    for it in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, it
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not reach relative residual {rtol} in {max_iter} iterations")


def darcy_solve(a: Field2D, source: np.ndarray | None = None, rtol: float = 1e-10) -> Field2D:
    """Solve on the vertex grid of ``a``; ``source`` overrides ``f = 1`` (full-grid array)."""
    av = a.values
    if np.any(av <= 0):
        raise ValueError("diffusion coefficient must be positive everywhere")
    n = a.n
    f = np.ones((n - 2, n - 2)) if source is None else np.asarray(source)[1:-1, 1:-1]
    A = darcy_matrix(av)
    b = f.ravel().astype(np.float64)
    u_int, _ = pcg(A, b, rtol=rtol)
    u = np.zeros((n, n))
    u[1:-1, 1:-1] = u_int.reshape(n - 2, n - 2)
    return Field2D(u, "dirichlet-zero")


def darcy_residual(a: Field2D, u: Field2D, source: np.ndarray | None = None) -> float:
    """``||A u - f|| / ||f||`` on the interior."""
    n = a.n
    f = np.ones((n - 2, n - 2)) if source is None else np.asarray(source)[1:-1, 1:-1]
    r = darcy_matrix(a.values) @ u.values[1:-1, 1:-1].ravel() - f.ravel()
    return float(np.linalg.norm(r) / np.linalg.norm(f))


def manufactured_source(n: int) -> np.ndarray:
    """Source for which ``sin(pi x) sin(pi y)`` solves the a = 1 problem."""
    x = grid_coords(n, "dirichlet-zero")
    return 2 * np.pi**2 * np.outer(np.sin(np.pi * x), np.sin(np.pi * x))
