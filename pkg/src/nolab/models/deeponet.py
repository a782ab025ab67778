"""DeepONet-lite: MLP branch on the sampled input, MLP trunk on coordinates."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .base import ModelConfig, ModelState, ParamFactory
from .layers import as_batch, dense


def init_deeponet(config: ModelConfig, seed: int) -> ModelState:
    f = ParamFactory(seed, config.np_dtype)
    sizes = [config.grid * config.grid, *config.branch_layers, config.basis]
    for i, (fi, fo) in enumerate(zip(sizes[:-1], sizes[1:])):
        f.dense(f"branch{i}", fi, fo)
    sizes = [2, *config.trunk_layers, config.basis]
    for i, (fi, fo) in enumerate(zip(sizes[:-1], sizes[1:])):
        f.dense(f"trunk{i}", fi, fo)
    return ModelState(config, f.params)


def _mlp(x, params, prefix: str, n_layers: int, act, final_act: bool):
    for i in range(n_layers):
        x = dense(x, params, f"{prefix}{i}")
        if i < n_layers - 1 or final_act:
            x = act(x)
    return x


def branch_coefficients(state: ModelState, a_values) -> Tensor:
    cfg = state.config
    return _mlp(ad.as_tensor(a_values), state.params, "branch", len(cfg.branch_layers) + 1,
                ad.activation(cfg.activation), final_act=False)


def trunk_basis(state: ModelState, coords: np.ndarray) -> Tensor:
    cfg = state.config
    coords = np.asarray(coords)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ad.ShapeError(f"coordinates must be (P, 2), got {coords.shape}")
    if np.any(coords < 0) or np.any(coords > 1):
        raise ValueError("coordinates must lie in [0, 1]^2")
    x = Tensor(coords.astype(cfg.np_dtype))
    return _mlp(x, state.params, "trunk", len(cfg.trunk_layers) + 1, ad.activation(cfg.activation), final_act=True)


def deeponet_forward(state: ModelState, a_values, coords: np.ndarray) -> Tensor:
    """(B, N*N) input samples, (P, 2) query points -> (B, P); output = sum_i b_i t_i(x)."""
    b = branch_coefficients(state, a_values)
    t = trunk_basis(state, coords)
    return ad.matmul(b, ad.permute(t, (1, 0)))


def grid_points(n: int) -> np.ndarray:
    x = np.linspace(0.0, 1.0, n)
    return np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)


def deeponet_grid_forward(state: ModelState, a) -> Tensor:
    a = as_batch(a)
    bsz, _, h, w = a.shape
    out = deeponet_forward(state, ad.reshape(a, (bsz, h * w)), grid_points(h))
    return ad.reshape(out, (bsz, 1, h, w))
