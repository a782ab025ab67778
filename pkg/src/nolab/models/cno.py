"""CNO-lite: U-shaped 3x3 convolution network with anti-aliased activations."""

from __future__ import annotations

from .. import autodiff as ad
from .base import ModelConfig, ModelState, ParamFactory
from .layers import antialiased, as_batch, conv, with_coords


def _channels(config: ModelConfig) -> list[int]:
    return [config.width * 2**level for level in range(config.depth + 1)]


def init_cno(config: ModelConfig, seed: int) -> ModelState:
    if config.grid % 2 ** (config.depth + 1):
        raise ValueError(f"grid {config.grid} not divisible by 2^{config.depth + 1}")
    f = ParamFactory(seed, config.np_dtype)
    ch = _channels(config)
    f.conv("lift", ch[0], config.in_channels, 3)
    for level in range(config.depth):
        f.conv(f"enc{level}", ch[level], ch[level], 3)
        f.conv(f"down{level}", ch[level + 1], ch[level], 3)
    f.conv("mid", ch[-1], ch[-1], 3)
    for level in reversed(range(config.depth)):
        f.conv(f"up{level}", ch[level], ch[level + 1], 3)
        f.conv(f"dec{level}", ch[level], 2 * ch[level], 3)
    f.conv("proj", 1, ch[0])
    return ModelState(config, f.params)


def cno_forward(state: ModelState, a):
    cfg, p = state.config, state.params
    a = as_batch(a)
    h, w = a.shape[-2:]
    if h % 2 ** (cfg.depth + 1) or w % 2 ** (cfg.depth + 1):
        raise ValueError(f"grid {h}x{w} not divisible by 2^{cfg.depth + 1}")
    act = ad.activation(cfg.activation)

    def block(x, name):
        return antialiased(conv(x, p, name, cfg.padding), act)

    x = block(with_coords(a, cfg.coords), "lift")
    skips = []
    for level in range(cfg.depth):
        x = block(x, f"enc{level}")
        skips.append(x)
        x = ad.spectral_resample(x, (x.shape[-2] // 2, x.shape[-1] // 2))
        x = block(x, f"down{level}")
    x = block(x, "mid")
    for level in reversed(range(cfg.depth)):
        x = ad.spectral_resample(x, (x.shape[-2] * 2, x.shape[-1] * 2))
        x = block(x, f"up{level}")
        x = block(ad.concat([x, skips[level]], axis=1), f"dec{level}")
    return conv(x, p, "proj")
