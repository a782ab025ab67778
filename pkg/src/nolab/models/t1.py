"""T1-lite: one forward transform, learning on retained coefficients, one inverse."""

from __future__ import annotations

from .. import autodiff as ad
from .base import ModelConfig, ModelState, ParamFactory
from .layers import as_batch, dense, spectral_weight_shape


def t1_shape(config: ModelConfig) -> tuple[int, int]:
    return spectral_weight_shape(config.grid, config.modes)


def init_t1(config: ModelConfig, seed: int) -> ModelState:
    f = ParamFactory(seed, config.np_dtype)
    rows, cols = t1_shape(config)
    m = rows * cols
    for layer in range(config.depth):
        f.add(f"t1_{layer}.cr", [1.0] * m)
        f.uniform(f"t1_{layer}.ci", (m,), 0.1)
        f.dense(f"t1_{layer}.mix", 2 * m, 2 * m)
    return ModelState(config, f.params)


def t1_forward(state: ModelState, a):
    cfg, p = state.config, state.params
    a = as_batch(a)
    bsz, _, h, w = a.shape
    rows, cols = t1_shape(cfg)
    m = rows * cols
    scale = 1.0 / h  # keeps coefficients O(1) for O(1) samples
    spec = ad.mode_select(ad.rfft2(ad.reshape(a, (bsz, h, w))), cfg.modes, cols)
    spec = ad.reshape(ad.scalar_mul(spec, scale), (bsz, m))
    re, im = ad.real(spec), ad.imag(spec)
    act = ad.activation(cfg.activation)
    for layer in range(cfg.depth):
        cr, ci = p[f"t1_{layer}.cr"], p[f"t1_{layer}.ci"]
        point_re = ad.sub(ad.mul(re, cr), ad.mul(im, ci))
        point_im = ad.add(ad.mul(im, cr), ad.mul(re, ci))
        mixed = dense(ad.concat([re, im], axis=1), p, f"t1_{layer}.mix")
        re = ad.add(point_re, mixed[:, :m])
        im = ad.add(point_im, mixed[:, m:])
        if layer < cfg.depth - 1:
            re, im = act(re), act(im)
    spec = ad.reshape(ad.complex_(re, im), (bsz, rows, cols))
    full = ad.mode_embed(ad.scalar_mul(spec, 1.0 / scale), cfg.modes, (h, w // 2 + 1))
    return ad.reshape(ad.irfft2(full, (h, w)), (bsz, 1, h, w))
