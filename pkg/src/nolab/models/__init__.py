"""Neural operator architectures over a shared parameter-state representation."""

from __future__ import annotations

import os

import numpy as np

from .. import storage
from ..autodiff import Tensor
from .base import ARCHITECTURES, ModelConfig, ModelState, ParamFactory, make_config, param_count
from .cno import cno_forward, init_cno
from .deeponet import deeponet_forward, deeponet_grid_forward, grid_points, init_deeponet, trunk_basis
from .fno import fno_forward, fno_layer, init_fno
from .galerkin import galerkin_attention, galerkin_attention_quadratic, gt_forward, init_gt, standardize_columns
from .layers import antialiased, spectral_conv
from .t1 import init_t1, t1_forward

_INIT = {
    "fno": init_fno,
    "fno3x3": init_fno,
    "fno-full": init_fno,
    "deeponet": init_deeponet,
    "t1": init_t1,
    "cno": init_cno,
    "gt": init_gt,
}
_FORWARD = {
    "fno": fno_forward,
    "fno3x3": fno_forward,
    "fno-full": fno_forward,
    "deeponet": deeponet_grid_forward,
    "t1": t1_forward,
    "cno": cno_forward,
    "gt": gt_forward,
}


def init_model(config: ModelConfig, seed: int = 0) -> ModelState:
    return _INIT[config.arch](config, seed)


def forward(state: ModelState, a) -> Tensor:
    """Map a batch of input fields (B, 1, N, N) to predicted outputs of the same shape."""
    return _FORWARD[state.config.arch](state, a)


def predict(state: ModelState, a: np.ndarray) -> np.ndarray:
    """Forward pass on plain arrays without recording a graph."""
    from ..autodiff import no_grad

    with no_grad():
        return forward(state, Tensor(np.asarray(a, dtype=state.config.np_dtype))).data


def save_model(state: ModelState, path: str | os.PathLike, meta: dict | None = None):
    full = dict(meta or {})
    full["config"] = state.config.to_dict()
    return storage.write_checkpoint(state.arrays(), full, path)


def load_model(path: str | os.PathLike, expected: ModelConfig | None = None) -> tuple[ModelState, dict]:
    """Read a checkpoint; reject config mismatches and parameters of the wrong shape."""
    arrays, meta = storage.read_checkpoint(path)
    if "config" not in meta:
        raise storage.FormatError("checkpoint metadata lacks a model config")
    config = ModelConfig.from_dict(meta["config"])
    if expected is not None and expected != config:
        diff = [k for k, v in expected.to_dict().items() if config.to_dict()[k] != v]
        raise storage.FormatError(f"checkpoint config differs from expected in: {', '.join(diff)}")
    state = init_model(config)
    missing = set(state.params) - set(arrays)
    extra = set(arrays) - set(state.params)
    if missing or extra:
        raise storage.FormatError(f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(extra)}")
    for name, p in state.params.items():
        if arrays[name].shape != p.shape:
            raise storage.FormatError(f"parameter {name!r} has shape {arrays[name].shape}, expected {p.shape}")
        p.data = arrays[name].astype(config.np_dtype)
    return state, meta


__all__ = [
    "ARCHITECTURES",
    "ModelConfig",
    "ModelState",
    "ParamFactory",
    "antialiased",
    "cno_forward",
    "deeponet_forward",
    "deeponet_grid_forward",
    "trunk_basis",
    "fno_forward",
    "fno_layer",
    "forward",
    "galerkin_attention",
    "galerkin_attention_quadratic",
    "grid_points",
    "gt_forward",
    "init_model",
    "load_model",
    "make_config",
    "param_count",
    "predict",
    "save_model",
    "spectral_conv",
    "standardize_columns",
    "t1_forward",
]
