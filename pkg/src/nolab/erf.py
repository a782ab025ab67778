"""Effective receptive fields: reverse-mode, finite-difference and the analytical wave kernel."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from . import autodiff as ad
from . import storage
from .autodiff import Tensor
from .datagen.field import Field2D, grid_coords
from .datagen.wave import WAVE_K, WAVE_SPEED, coeffs_from_amplitudes, project_sine, wave_at
from .models import ModelState, forward

METHODS = ("autodiff", "finite-difference", "analytical")

Model = Union[ModelState, Callable[[Tensor], Tensor]]


@dataclass(frozen=True)
class ERFMap:
    field: Field2D
    x0: tuple[int, int]
    probe: str = ""
    method: str = "autodiff"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown ERF method {self.method!r}")
        i, j = self.x0
        if not (0 <= i < self.field.n and 0 <= j < self.field.n):
            raise IndexError(f"output location {self.x0} outside the {self.field.n}-point grid")

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def n(self) -> int:
        return self.field.n


def center_index(n: int) -> tuple[int, int]:
    """Grid point nearest the domain center."""
    return n // 2, n // 2


def _apply(model: Model, x: Tensor) -> Tensor:
    if isinstance(model, ModelState):
        return forward(model, x)
    return model(x)


def _model_dtype(model: Model, a: np.ndarray) -> np.dtype:
    return model.config.np_dtype if isinstance(model, ModelState) else a.dtype


def _probe(a) -> tuple[np.ndarray, str]:
    if isinstance(a, Field2D):
        return np.asarray(a.values), a.boundary
    values = np.asarray(a, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"probe input must be a square grid, got {values.shape}")
    return values, "periodic"


def _check_x0(x0, n: int) -> tuple[int, int]:
    i, j = (int(v) for v in x0)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"output location {(i, j)} outside the {n}-point grid")
    return i, j


def erf_autodiff(model: Model, a, x0, probe: str = "") -> ERFMap:
    """du(x0)/da(x) for every grid point x from one reverse sweep."""
    values, boundary = _probe(a)
    n = values.shape[0]
    i, j = _check_x0(x0, n)
    x = Tensor(values.astype(_model_dtype(model, values))[None, None], requires_grad=True)
    out = _apply(model, x)
    grads = ad.backward(out[0, 0, i, j])
    g = grads.get(x)
    sens = np.zeros((n, n)) if g is None else np.asarray(g.data[0, 0], dtype=np.float64)
    return ERFMap(Field2D(sens, boundary), (i, j), probe, "autodiff")


def default_step(values: np.ndarray) -> float:
    std = float(np.std(values))
    return 1e-4 * (std if std > 0 else 1.0)


def erf_finite_difference(model: Model, a, x0, h: float | None = None, probe: str = "", batch: int = 64) -> ERFMap:
    """Central differences (u(a + h e_x) - u(a - h e_x)) / 2h at x0, evaluated in batches."""
    values, boundary = _probe(a)
    n = values.shape[0]
    i, j = _check_x0(x0, n)
    h = default_step(values) if h is None else float(h)
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    dtype = _model_dtype(model, values)
    base = values.astype(dtype)
    flat = np.zeros(n * n)
    half = max(1, batch // 2)
    with ad.no_grad():
        for start in range(0, n * n, half):
            idx = np.arange(start, min(start + half, n * n))
            stack = np.repeat(base[None], 2 * len(idx), axis=0)
            rows, cols = np.divmod(idx, n)
            k = np.arange(len(idx))
            stack[2 * k, rows, cols] += h
            stack[2 * k + 1, rows, cols] -= h
            u = _apply(model, Tensor(stack[:, None])).data[:, 0, i, j].astype(np.float64)
            flat[idx] = (u[0::2] - u[1::2]) / (2 * h)
    return ERFMap(Field2D(flat.reshape(n, n), boundary), (i, j), probe, "finite-difference")


def _sine_basis(n: int, K: int) -> np.ndarray:
    x = grid_coords(n, "dirichlet-zero")
    return np.sin(np.pi * np.outer(x, np.arange(1, K + 1)))


def erf_analytical_wave(
    x0,
    t: float = 5.0,
    c: float = WAVE_SPEED,
    K: int = WAVE_K,
    n: int = 64,
    omit_norm_factor: bool = False,
) -> ERFMap:
    """Functional derivative of the truncated standing-wave solution at x0 w.r.t. the initial field.

    ``4 sum_{i,j<=K} sin(pi i x0) sin(pi j y0) sin(pi i x) sin(pi j y) cos(c pi t sqrt(i^2 + j^2))``.
    ``omit_norm_factor=True`` drops the factor 4 from the orthogonality constant.
    """
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    i, j = _check_x0(x0, n)
    s = _sine_basis(n, K)
    k = np.arange(1, K + 1)
    damp = np.cos(c * np.pi * t * np.sqrt(k[:, None] ** 2 + k[None, :] ** 2))
    # elementwise form keeps the x0 <-> x swap bit-exact (a matmul would reorder the sums)
    u = s * s[i]
    v = s * s[j]
    terms = (u[:, None, :, None] * damp) * v[None, :, None, :]
    values = terms.reshape(n, n, -1).sum(axis=-1)
    if not omit_norm_factor:
        values = 4.0 * values
    return ERFMap(Field2D(values, "dirichlet-zero"), (i, j), f"K={K},t={t},c={c}", "analytical")


def erf_wave_oracle(x0, t: float = 5.0, c: float = WAVE_SPEED, K: int = WAVE_K, n: int = 64,
                    eps: float = 1e-3, seed: int = 0) -> np.ndarray:
    """Sensitivity density of the exact solution operator, by perturbing initial grid values.

    Each grid value of a random initial field is nudged by +-eps, re-projected onto the
    K x K sine basis by quadrature and propagated in closed form; the central difference
    at x0 is divided by the cell area so it is comparable to the analytical density.
    """
    i, j = _check_x0(x0, n)
    rng = np.random.default_rng(seed)
    base = rng.uniform(-1, 1, (n, n))
    base[0, :] = base[-1, :] = base[:, 0] = base[:, -1] = 0.0
    x = grid_coords(n, "dirichlet-zero")
    area = (1.0 / (n - 1)) ** 2
    out = np.zeros((n, n))

    def u_at_x0(field):
        coeffs = coeffs_from_amplitudes(project_sine(field, K), c)
        return float(wave_at(coeffs, t, x[i:i + 1], x[j:j + 1])[0, 0])

    for p in range(1, n - 1):
        for q in range(1, n - 1):
            plus, minus = base.copy(), base.copy()
            plus[p, q] += eps
            minus[p, q] -= eps
            out[p, q] = (u_at_x0(plus) - u_at_x0(minus)) / (2 * eps * area)
    return out


def _check_same_grid(a: ERFMap, b: ERFMap) -> None:
    if a.values.shape != b.values.shape:
        raise ValueError(f"ERF grids differ: {a.values.shape} vs {b.values.shape}")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.ravel(a).astype(np.float64), np.ravel(b).astype(np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def distance_map(n: int, x0, boundary: str) -> np.ndarray:
    """Distance from x0 to every grid point; wrapped for periodic grids, plain otherwise."""
    x = grid_coords(n, boundary)
    dx = x - x[x0[0]]
    dy = x - x[x0[1]]
    if boundary == "periodic":
        dx = np.minimum(np.abs(dx), 1 - np.abs(dx))
        dy = np.minimum(np.abs(dy), 1 - np.abs(dy))
    return np.hypot(dx[:, None], dy[None, :])


def mass_in_disc(erf: ERFMap, r: float) -> float:
    w = np.abs(erf.values)
    total = w.sum()
    if total == 0:
        return 0.0
    return float(w[distance_map(erf.n, erf.x0, erf.field.boundary) <= r].sum() / total)


DEFAULT_RADII = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8)


def erf_compare(a: ERFMap, b: ERFMap, radii=DEFAULT_RADII) -> dict:
    _check_same_grid(a, b)
    return {
        "cosine": cosine_similarity(a.values, b.values),
        "max_relative_error": ad.max_relative_error(a.values, b.values),
        "mass_a": {f"{r:g}": mass_in_disc(a, r) for r in radii},
        "mass_b": {f"{r:g}": mass_in_disc(b, r) for r in radii},
    }


def write_report(report: dict, path: str | os.PathLike) -> Path:
    return storage.atomic_write(path, json.dumps(report, indent=2, sort_keys=True) + "\n")


def erf_export(erf: ERFMap, path: str | os.PathLike, fmt: str | None = None) -> Path:
    """CSV of (ix, iy, value), or 8-bit PGM with min/max written to ``<path>.bounds.txt``."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    if fmt == "csv":
        n = erf.n
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        rows = zip(ii.ravel().tolist(), jj.ravel().tolist(), erf.values.ravel().tolist())
        return storage.write_csv(path, ["ix", "iy", "value"], rows)
    if fmt == "pgm":
        data, lo, hi = storage.pgm_bytes(erf.values)
        storage.atomic_write(path.with_name(path.name + ".bounds.txt"),
                             f"min {lo!r}\nmax {hi!r}\nx0 {erf.x0[0]} {erf.x0[1]}\nmethod {erf.method}\n")
        return storage.atomic_write(path, data)
    raise ValueError(f"unknown export format {fmt!r}; use csv or pgm")


def read_erf_csv(path: str | os.PathLike) -> np.ndarray:
    header, rows = storage.read_csv(path)
    if header != ["ix", "iy", "value"]:
        raise storage.FormatError(f"unexpected ERF CSV header {header}")
    n = int(round(len(rows) ** 0.5))
    out = np.zeros((n, n))
    for ix, iy, v in rows:
        out[int(ix), int(iy)] = float(v)
    return out
