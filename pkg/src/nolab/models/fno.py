"""Fourier neural operator with an optional local convolution in the residual path."""

from __future__ import annotations

from .. import autodiff as ad
from .base import ModelConfig, ModelState, ParamFactory
from .layers import as_batch, conv, spectral_conv, spectral_weight_shape, with_coords


def init_fno(config: ModelConfig, seed: int) -> ModelState:
    f = ParamFactory(seed, config.np_dtype)
    w = config.width
    rows, cols = spectral_weight_shape(config.grid, config.modes)
    f.conv("lift", w, config.in_channels)
    for layer in range(config.depth):
        f.spectral(f"spec{layer}", w, w, rows, cols)
        f.conv(f"res{layer}", w, w)
        if config.local_kernel:
            f.conv(f"local{layer}", w, w, config.local_kernel)
    proj = config.proj_width or 2 * w
    f.conv("proj1", proj, w)
    f.conv("proj2", 1, proj)
    return ModelState(config, f.params)


def fno_layer(state: ModelState, x, layer: int, last: bool):
    cfg, p = state.config, state.params
    y = spectral_conv(x, p[f"spec{layer}.wr"], p[f"spec{layer}.wi"], cfg.modes)
    y = ad.add(y, conv(x, p, f"res{layer}"))
    if cfg.local_kernel:
        y = ad.add(y, conv(x, p, f"local{layer}", cfg.padding))
    return y if last else ad.activation(cfg.activation)(y)


def fno_forward(state: ModelState, a):
    """(B, 1, H, W) -> (B, 1, H, W)."""
    cfg, p = state.config, state.params
    a = as_batch(a)
    if max(cfg.modes, 1) > min(a.shape[-2:]) // 2:
        raise ValueError(f"{cfg.modes} modes exceed the Nyquist limit of a {a.shape[-2:]} grid")
    act = ad.activation(cfg.activation)
    x = conv(with_coords(a, cfg.coords), p, "lift")
    for layer in range(cfg.depth):
        x = fno_layer(state, x, layer, last=layer == cfg.depth - 1)
    x = act(conv(x, p, "proj1"))
    return conv(x, p, "proj2")
