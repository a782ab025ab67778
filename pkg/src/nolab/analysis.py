"""Radially binned spectral error and the C4 rotation-equivariance audit."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import storage
from .training import relative_l2

LOW_BAND = 6


@dataclass(frozen=True)
class SpectrumBins:
    """Squared error energy per integer radius |k| (bin b holds round(|k|) == b)."""

    edges: np.ndarray
    energy: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> float:
        return float(self.energy.sum())

    def band(self, kmax: int = LOW_BAND) -> float:
        return float(self.energy[: kmax + 1].sum())

    def rows(self):
        return [[int(b), int(c), float(e)] for b, c, e in zip(self.edges[:-1], self.counts, self.energy)]


def _radius_bins(h: int, w: int) -> np.ndarray:
    k1 = np.fft.fftfreq(h, 1.0 / h)
    k2 = np.fft.fftfreq(w, 1.0 / w)
    return np.rint(np.hypot(k1[:, None], k2[None, :])).astype(int)


def radial_error_spectrum(pred: np.ndarray, target: np.ndarray) -> SpectrumBins:
    """Bin |FFT(pred - target)|^2 / (H W) by rounded radius; batches are summed.

    With this normalization the bins partition ||pred - target||^2 exactly.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"grid mismatch: {pred.shape} vs {target.shape}")
    h, w = pred.shape[-2:]
    err = pred - target
    power = np.abs(np.fft.fft2(err)) ** 2 / (h * w)
    power = power.reshape(-1, h, w).sum(axis=0)
    radius = _radius_bins(h, w)
    nbins = int(radius.max()) + 1
    energy = np.bincount(radius.ravel(), weights=power.ravel(), minlength=nbins)
    counts = np.bincount(radius.ravel(), minlength=nbins)
    return SpectrumBins(np.arange(nbins + 1), energy, counts)


def write_spectrum(bins: SpectrumBins, path: str | os.PathLike):
    return storage.write_csv(path, ["bin", "count", "error_energy"], bins.rows())


def c4_rotate(field: np.ndarray, turns: int) -> np.ndarray:
    """Rotate the last two (square) axes by ``turns`` quarter turns counter-clockwise."""
    field = np.asarray(field)
    if field.ndim < 2 or field.shape[-1] != field.shape[-2]:
        raise ValueError(f"C4 rotation needs a square grid, got {field.shape}")
    return np.rot90(field, k=turns % 4, axes=(-2, -1)).copy()


def c4_equivariance_error(model, samples, turns=(1, 2, 3)) -> float:
    """Mean relative L2 between G(rot a) and rot G(a) over samples and the three nontrivial turns.

    ``model`` maps a (B, N, N) array to (B, N, N); see :func:`state_predictor` for trained models.
    """
    a = np.asarray(samples, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"C4 audit needs square grids, got {a.shape}")
    base = np.asarray(model(a))
    errors = []
    if sorted(t % 4 for t in turns) != [1, 2, 3]:
        raise ValueError(f"turns must enumerate the three nontrivial rotations, got {turns}")
    for k in turns:
        rotated = np.asarray(model(c4_rotate(a, k)))
        errors.append(relative_l2(rotated, c4_rotate(base, k)))
    return float(np.mean(sorted(errors)))


def state_predictor(state, stats: dict | None = None):
    """Wrap a model state as an array-to-array map, optionally in raw (decoded) units."""
    from .models import predict
    from .training import predict_dataset

    if state.config.coords:
        raise ValueError("coordinate features break rotation symmetry; audit a coords=False model")
    if stats is not None:
        return lambda a: predict_dataset(state, a, stats)
    return lambda a: predict(state, np.asarray(a)[:, None])[:, 0]
