"""Relative-L2 training loop with Adam, cosine decay and global-norm clipping."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import storage
from .autodiff import Tensor
from .datagen.dataset import normalization_stats
from .models import ModelState, forward

log = logging.getLogger(__name__)

NORM_FLOOR = 1e-12


class TrainingError(RuntimeError):
    pass


class DivergenceError(TrainingError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0
    schedule: str = "cosine"
    clip_norm: float = 10.0
    divergence: float = 1e3
    max_steps: int | None = None  # stop early after this many optimizer steps

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch size >= 1")
        if self.schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def relative_l2(pred, target):
    """Per-sample ||pred - target|| / ||target|| averaged over the batch.

    Returns a Tensor when ``pred`` is a Tensor (differentiable), else a float.
    """
    t = target.data if isinstance(target, Tensor) else np.asarray(target)
    if tuple(pred.shape) != t.shape:
        raise ad.ShapeError(f"prediction {tuple(pred.shape)} and target {t.shape} differ")
    axes = tuple(range(1, t.ndim))
    denom = np.maximum(np.sqrt(np.sum(np.square(t, dtype=np.float64), axis=axes)), NORM_FLOOR)
    if not isinstance(pred, Tensor):
        diff = np.asarray(pred, dtype=np.float64) - t
        return float(np.mean(np.sqrt(np.sum(diff * diff, axis=axes)) / denom))
    diff = ad.sub(pred, Tensor(t.astype(pred.dtype)))
    sq = ad.sum_(ad.mul(diff, diff), axis=axes)
    # tiny offset keeps the sqrt derivative finite at an exact fit
    norms = ad.sqrt(ad.add(sq, 1e-30))
    return ad.mean(ad.div(norms, Tensor(denom.astype(pred.dtype))))


def learning_rate(config: TrainConfig, step: int, total: int) -> float:
    if config.schedule == "constant" or total <= 0:
        return config.lr
    return config.lr * 0.5 * (1.0 + math.cos(math.pi * min(step, total) / total))


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / norm
        for k in grads:
            grads[k] = grads[k] * scale
    return norm


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    opt: OptimizerState,
    config: TrainConfig,
    lr: float | None = None,
) -> tuple[dict[str, Tensor], OptimizerState]:
    """Bias-corrected Adam (decoupled weight decay); updates tensors in place."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r} at step {opt.step}")
    lr = config.lr if lr is None else lr
    opt.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**opt.step
    c2 = 1.0 - b2**opt.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = opt.m.get(name, np.zeros_like(p.data))
        v = opt.v.get(name, np.zeros_like(p.data))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        opt.m[name], opt.v[name] = m, v
        update = lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
        if config.weight_decay:
            update = update + lr * config.weight_decay * p.data
        p.data = (p.data - update).astype(p.data.dtype)
    return params, opt


@dataclass
class TrainResult:
    state: ModelState
    best_state: ModelState
    best_epoch: int
    history: list[dict] = field(default_factory=list)
    steps: int = 0
    stats: dict = field(default_factory=dict)


def _stats(train) -> dict:
    stats = train.meta.get("normalization")
    return dict(stats) if stats else normalization_stats(train.inputs, train.targets)


def _encode(inputs: np.ndarray, stats: dict, dtype) -> Tensor:
    x = (np.asarray(inputs, dtype=np.float64) - stats["input_mean"]) / stats["input_std"]
    return Tensor(x[:, None].astype(dtype))


def _decode(pred: Tensor, stats: dict) -> Tensor:
    return ad.add(ad.scalar_mul(pred, stats["target_std"]), stats["target_mean"])


def predict_dataset(state: ModelState, inputs: np.ndarray, stats: dict, batch_size: int = 16) -> np.ndarray:
    """Decoded predictions (n, N, N) for raw inputs."""
    out = []
    with ad.no_grad():
        for i in range(0, len(inputs), batch_size):
            pred = _decode(forward(state, _encode(inputs[i:i + batch_size], stats, state.config.np_dtype)), stats)
            out.append(pred.data[:, 0])
    return np.concatenate(out) if out else np.zeros((0, *inputs.shape[1:]))


def evaluate(state: ModelState, data, stats: dict, batch_size: int = 16) -> float:
    pred = predict_dataset(state, data.inputs, stats, batch_size)
    return relative_l2(pred, data.targets)


def train(
    state: ModelState,
    train_data,
    test_data,
    config: TrainConfig,
    progress: Callable[[int, dict], None] | None = None,
) -> TrainResult:
    """Minimize the relative L2 loss of decoded predictions; evaluate each epoch on the test split."""
    if len(train_data) == 0:
        raise TrainingError("empty training set")
    stats = _stats(train_data)
    state = state.copy()
    best = state.copy()
    result = TrainResult(state, best, best_epoch=0, stats=stats)
    n = len(train_data)
    per_epoch = math.ceil(n / config.batch_size)
    total = per_epoch * config.epochs
    if config.max_steps is not None:
        total = min(total, config.max_steps)
    opt = OptimizerState()
    best_loss = math.inf
    dtype = state.config.np_dtype
    for epoch in range(config.epochs):
        if opt.step >= total:
            break
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        loss_sum, seen = 0.0, 0
        for start in range(0, n, config.batch_size):
            if opt.step >= total:
                break
            idx = order[start:start + config.batch_size]
            x = _encode(train_data.inputs[idx], stats, dtype)
            loss = relative_l2(_decode(forward(state, x), stats), train_data.targets[idx][:, None])
            value = float(loss.data)
            if not math.isfinite(value) or value > config.divergence:
                raise DivergenceError(f"loss {value:.4g} at step {opt.step} exceeds {config.divergence:g}")
            grads = ad.backward(loss)
            arrays = {k: grads[p].data for k, p in state.params.items() if p in grads}
            clip_global_norm(arrays, config.clip_norm)
            adam_step(state.params, arrays, opt, config, learning_rate(config, opt.step, total))
            loss_sum += value * len(idx)
            seen += len(idx)
        train_loss = loss_sum / seen
        test_loss = evaluate(state, test_data, stats, config.batch_size) if len(test_data) else float("nan")
        row = {"epoch": epoch + 1, "train_rel_l2": train_loss, "test_rel_l2": test_loss,
               "lr": learning_rate(config, opt.step, total), "steps": opt.step}
        result.history.append(row)
        log.info("epoch %d train %.4f test %.4f", epoch + 1, train_loss, test_loss)
        if progress:
            progress(epoch + 1, row)
        if not (test_loss >= best_loss):
            best_loss = test_loss
            result.best_state = state.copy()
            result.best_epoch = epoch + 1
    result.state = state
    result.steps = opt.step
    return result


HISTORY_COLUMNS = ["epoch", "train_rel_l2", "test_rel_l2", "lr", "steps"]


def write_history(history: list[dict], path: str | os.PathLike):
    return storage.write_csv(path, HISTORY_COLUMNS, [[row[c] for c in HISTORY_COLUMNS] for row in history])


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
