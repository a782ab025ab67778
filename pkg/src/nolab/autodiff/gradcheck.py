"""Central finite-difference oracles for reverse-mode gradients."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad


def max_relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """``max|a - b| / max|b|``, the scale-aware error used by every gradient check."""
    denom = float(np.max(np.abs(b)))
    if denom == 0.0:
        return float(np.max(np.abs(a)))
    return float(np.max(np.abs(a - b)) / denom)


def numerical_grad(f: Callable[[], Tensor], x: Tensor, h: float = 1e-6) -> np.ndarray:
    """Elementwise central differences of scalar ``f()`` w.r.t. the values of ``x``."""
    grad = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    gflat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f().item()
            flat[i] = orig - h
            fm = f().item()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2 * h)
    return grad


def directional_derivative(
    f: Callable[[], Tensor], params: Sequence[Tensor], directions: Sequence[np.ndarray], h: float = 1e-6
) -> float:
    """Central difference of ``f`` along ``directions`` applied to ``params`` jointly."""
    originals = [p.data.copy() for p in params]
    try:
        with no_grad():
            for p, o, d in zip(params, originals, directions):
                p.data = o + h * d
            fp = f().item()
            for p, o, d in zip(params, originals, directions):
                p.data = o - h * d
            fm = f().item()
    finally:
        for p, o in zip(params, originals):
            p.data = o
    return (fp - fm) / (2 * h)


def check_gradients(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-6,
    elementwise_limit: int = 400,
    n_directions: int = 3,
    seed: int = 0,
) -> float:
    """Worst relative error between reverse-mode and finite-difference gradients.

    Inputs up to ``elementwise_limit`` values are compared entry by entry;
    larger ones through ``n_directions`` random directional derivatives.
    """
    out = f()
    grads = backward(out)
    rng = np.random.default_rng(seed)
    worst = 0.0
    large: list[Tensor] = []
    for x in inputs:
        g = grads.get(x)
        g = np.zeros_like(x.data) if g is None else g.data
        if x.size <= elementwise_limit:
            worst = max(worst, max_relative_error(g, numerical_grad(f, x, h)))
        else:
            large.append(x)
    if large:
        for _ in range(n_directions):
            dirs = [rng.standard_normal(x.shape) for x in large]
            ad = sum(float(np.sum(grads.get(x).data * d)) if grads.get(x) is not None else 0.0
                     for x, d in zip(large, dirs))
            fd = directional_derivative(f, large, dirs, h)
            worst = max(worst, abs(ad - fd) / max(abs(fd), 1e-300))
    return worst
