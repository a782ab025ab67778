"""Galerkin-type linear attention and the GT-lite encoder built on it."""

from __future__ import annotations

from .. import autodiff as ad
from ..autodiff import Tensor
from .base import ModelConfig, ModelState, ParamFactory
from .layers import as_batch, dense, with_coords

NORM_EPS = 1e-5


def standardize_columns(x: Tensor, eps: float = NORM_EPS) -> Tensor:
    """Zero mean, unit variance along the point axis (-2), per feature column."""
    centered = ad.sub(x, ad.mean(x, axis=-2, keepdims=True))
    var = ad.mean(ad.mul(centered, centered), axis=-2, keepdims=True)
    return ad.div(centered, ad.sqrt(ad.add(var, eps)))


def _swap(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return ad.permute(x, axes)


def _check(q, k, v):
    if not (q.shape == k.shape == v.shape):
        raise ad.ShapeError(f"q, k, v must share a shape, got {q.shape}, {k.shape}, {v.shape}")


def galerkin_attention(q: Tensor, k: Tensor, v: Tensor, normalize: bool = True) -> Tensor:
    """``q (norm(k)^T norm(v)) / N`` at O(N d^2) cost; no softmax."""
    _check(q, k, v)
    if normalize:
        k, v = standardize_columns(k), standardize_columns(v)
    n = q.shape[-2]
    return ad.scalar_mul(ad.matmul(q, ad.matmul(_swap(k), v)), 1.0 / n)


def galerkin_attention_quadratic(q: Tensor, k: Tensor, v: Tensor, normalize: bool = True) -> Tensor:
    """The same contraction grouped as ``(q norm(k)^T) norm(v) / N`` (O(N^2 d))."""
    _check(q, k, v)
    if normalize:
        k, v = standardize_columns(k), standardize_columns(v)
    n = q.shape[-2]
    return ad.scalar_mul(ad.matmul(ad.matmul(q, _swap(k)), v), 1.0 / n)


def init_gt(config: ModelConfig, seed: int) -> ModelState:
    if config.width % config.heads:
        raise ValueError(f"width {config.width} not divisible by {config.heads} heads")
    f = ParamFactory(seed, config.np_dtype)
    d = config.width
    f.dense("lift", config.in_channels, d)
    for layer in range(config.depth):
        for name in ("q", "k", "v"):
            f.dense(f"att{layer}.{name}", d, d, bias=False)
        f.dense(f"att{layer}.o", d, d)
        f.dense(f"ffn{layer}.1", d, 2 * d)
        f.dense(f"ffn{layer}.2", 2 * d, d)
    f.dense("proj1", d, 2 * d)
    f.dense("proj2", 2 * d, 1)
    return ModelState(config, f.params)


def _heads(x: Tensor, heads: int) -> Tensor:
    b, n, d = x.shape
    return ad.permute(ad.reshape(x, (b, n, heads, d // heads)), (0, 2, 1, 3))


def _merge(x: Tensor) -> Tensor:
    b, heads, n, dh = x.shape
    return ad.reshape(ad.permute(x, (0, 2, 1, 3)), (b, n, heads * dh))


def gt_forward(state: ModelState, a):
    cfg, p = state.config, state.params
    a = as_batch(a)
    bsz, _, h, w = a.shape
    act = ad.activation(cfg.activation)
    x = with_coords(a, cfg.coords)
    tokens = ad.reshape(ad.permute(x, (0, 2, 3, 1)), (bsz, h * w, x.shape[1]))
    z = dense(tokens, p, "lift")
    for layer in range(cfg.depth):
        q, k, v = (_heads(dense(z, p, f"att{layer}.{n}"), cfg.heads) for n in ("q", "k", "v"))
        att = _merge(galerkin_attention(q, k, v))
        z = ad.add(z, dense(att, p, f"att{layer}.o"))
        z = ad.add(z, dense(act(dense(z, p, f"ffn{layer}.1")), p, f"ffn{layer}.2"))
    out = dense(act(dense(z, p, "proj1")), p, "proj2")
    return ad.reshape(ad.permute(ad.reshape(out, (bsz, h, w, 1)), (0, 3, 1, 2)), (bsz, 1, h, w))
