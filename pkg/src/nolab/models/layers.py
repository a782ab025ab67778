"""Building blocks shared by the operator models."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor


def as_batch(a) -> Tensor:
    """Coerce input to (B, 1, H, W)."""
    a = ad.as_tensor(a)
    if a.ndim == 2:
        a = ad.reshape(a, (1, 1, *a.shape))
    elif a.ndim == 3:
        a = ad.reshape(a, (a.shape[0], 1, *a.shape[1:]))
    if a.ndim != 4 or a.shape[1] != 1:
        raise ad.ShapeError(f"expected a batch of single-channel fields, got shape {a.shape}")
    return a


def coordinate_channels(batch: int, h: int, w: int, dtype) -> Tensor:
    x = np.linspace(0.0, 1.0, h, dtype=dtype)
    y = np.linspace(0.0, 1.0, w, dtype=dtype)
    grid = np.stack(np.meshgrid(x, y, indexing="ij"))
    return Tensor(np.broadcast_to(grid, (batch, 2, h, w)).copy())


def with_coords(a: Tensor, enabled: bool) -> Tensor:
    if not enabled:
        return a
    b, _, h, w = a.shape
    return ad.concat([a, coordinate_channels(b, h, w, a.dtype)], axis=1)


def conv(x: Tensor, params: dict, name: str, padding: str = "zero") -> Tensor:
    y = ad.conv2d(x, params[f"{name}.w"], padding)
    bias = params.get(f"{name}.b")
    if bias is not None:
        y = ad.add(y, ad.reshape(bias, (1, -1, 1, 1)))
    return y


def dense(x: Tensor, params: dict, name: str) -> Tensor:
    y = ad.matmul(x, params[f"{name}.w"])
    bias = params.get(f"{name}.b")
    if bias is not None:
        y = ad.add(y, bias)
    return y


def spectral_conv(x: Tensor, wr: Tensor, wi: Tensor, modes: int) -> Tensor:
    """Truncate to retained modes, mix channels per mode, transform back."""
    h, w = x.shape[-2:]
    spec = ad.mode_select(ad.rfft2(x), modes, ad.retained_cols(w, modes))
    mixed = ad.channel_mix(spec, ad.complex_(wr, wi))
    full = ad.mode_embed(mixed, modes, (h, w // 2 + 1))
    return ad.irfft2(full, (h, w))


def spectral_weight_shape(grid: int, modes: int) -> tuple[int, int]:
    return len(ad.retained_rows(grid, modes)), ad.retained_cols(grid, modes)


def antialiased(x: Tensor, act) -> Tensor:
    """Apply ``act`` at twice the resolution, then project back to the band limit."""
    h, w = x.shape[-2:]
    up = ad.spectral_resample(x, (2 * h, 2 * w))
    return ad.spectral_resample(act(up), (h, w))
