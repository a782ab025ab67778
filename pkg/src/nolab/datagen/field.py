from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDARY_KINDS = ("periodic", "dirichlet-zero", "neumann")


@dataclass(frozen=True)
class Field2D:
    """Scalar function sampled on an N x N grid over [0, 1]^2.

    Dirichlet and Neumann fields sit on cell vertices ``x_m = m / (N - 1)``;
    periodic fields on ``x_m = m / N``. ``values[i, j]`` is the sample at
    ``(x_i, y_j)``.
    """

    values: np.ndarray
    boundary: str = "periodic"

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"Field2D needs a square 2-D array, got shape {v.shape}")
        if v.shape[0] < 8:
            raise ValueError(f"grid extent must be at least 8, got {v.shape[0]}")
        if self.boundary not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.boundary!r}")
        if not np.all(np.isfinite(v)):
            raise ValueError("Field2D values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def coords(self) -> np.ndarray:
        return grid_coords(self.n, self.boundary)


def grid_coords(n: int, boundary: str) -> np.ndarray:
    """1-D sample locations for one axis."""
    if boundary == "periodic":
        return np.arange(n) / n
    return np.arange(n) / (n - 1)


def grid_spacing(n: int, boundary: str) -> float:
    return 1.0 / n if boundary == "periodic" else 1.0 / (n - 1)
