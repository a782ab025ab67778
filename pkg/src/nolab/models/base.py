from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..autodiff import Tensor

ARCHITECTURES = ("fno", "fno3x3", "fno-full", "deeponet", "t1", "cno", "gt")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; unused fields are ignored per architecture."""

    arch: str
    grid: int
    width: int = 16
    depth: int = 4
    modes: int = 12
    local_kernel: int = 0
    activation: str = "gelu"
    coords: bool = True
    padding: str = "zero"
    proj_width: int = 0  # 0 -> 2 * width
    branch_layers: tuple[int, ...] = (128, 128)
    trunk_layers: tuple[int, ...] = (128, 128)
    basis: int = 64
    heads: int = 1
    dtype: str = "float32"

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}; choose from {', '.join(ARCHITECTURES)}")
        if self.grid < 4:
            raise ValueError(f"grid must be at least 4, got {self.grid}")
        if self.modes < 1 or self.modes > self.grid // 2:
            raise ValueError(f"modes per axis must be in [1, {self.grid // 2}], got {self.modes}")
        if self.local_kernel < 0 or (self.local_kernel and self.local_kernel % 2 == 0):
            raise ValueError(f"local kernel extent must be odd or 0, got {self.local_kernel}")
        if self.basis < 1:
            raise ValueError("DeepONet basis count must be at least 1")
        if self.width < 1 or self.depth < 1:
            raise ValueError("width and depth must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")
        object.__setattr__(self, "branch_layers", tuple(self.branch_layers))
        object.__setattr__(self, "trunk_layers", tuple(self.trunk_layers))

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    @property
    def in_channels(self) -> int:
        return 3 if self.coords else 1

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["branch_layers"] = list(self.branch_layers)
        d["trunk_layers"] = list(self.trunk_layers)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ModelConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> ModelConfig:
        return dataclasses.replace(self, **changes)


def make_config(arch: str, grid: int, **overrides) -> ModelConfig:
    """Preset for an architecture tag; FNO variants differ only in modes/local kernel."""
    preset: dict[str, Any] = {"modes": min(12, grid // 2)}
    if arch == "fno3x3":
        preset["local_kernel"] = 3
    elif arch == "fno-full":
        preset["modes"] = grid // 2
    elif arch == "cno":
        preset["depth"] = 2
    elif arch == "gt":
        preset["depth"] = 2
    elif arch == "t1":
        preset["depth"] = 3
    preset.update({k: v for k, v in overrides.items() if v is not None})
    return ModelConfig(arch=arch, grid=grid, **preset)


@dataclass
class ModelState:
    """Named parameter tensors of one model instance."""

    config: ModelConfig
    params: dict[str, Tensor] = field(default_factory=dict)

    @property
    def param_count(self) -> int:
        return param_count(self)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.params.items()}

    def copy(self) -> ModelState:
        return ModelState(
            self.config, {k: Tensor(v.data.copy(), requires_grad=v.requires_grad) for k, v in self.params.items()}
        )

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]


def param_count(state: ModelState) -> int:
    return int(sum(p.size for p in state.params.values()))


class ParamFactory:
    """Deterministic per-name initialization: each tensor gets its own stream."""

    def __init__(self, seed: int, dtype: np.dtype):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Tensor] = {}

    def _rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(name.encode())])

    def add(self, name: str, value: np.ndarray) -> None:
        self.params[name] = Tensor(np.asarray(value, dtype=self.dtype), requires_grad=True, name=name)

    def uniform(self, name: str, shape: tuple[int, ...], bound: float) -> None:
        self.add(name, self._rng(name).uniform(-bound, bound, size=shape))

    def conv(self, name: str, cout: int, cin: int, k: int = 1, bias: bool = True) -> None:
        bound = 1.0 / np.sqrt(cin * k * k)
        self.uniform(f"{name}.w", (cout, cin, k, k), bound)
        if bias:
            self.uniform(f"{name}.b", (cout,), bound)

    def dense(self, name: str, fan_in: int, fan_out: int, bias: bool = True) -> None:
        bound = 1.0 / np.sqrt(fan_in)
        self.uniform(f"{name}.w", (fan_in, fan_out), bound)
        if bias:
            self.uniform(f"{name}.b", (fan_out,), bound)

    def spectral(self, name: str, cin: int, cout: int, rows: int, cols: int) -> None:
        scale = 1.0 / (cin * cout)
        shape = (cin, cout, rows, cols)
        self.add(f"{name}.wr", scale * self._rng(f"{name}.wr").random(shape))
        self.add(f"{name}.wi", scale * self._rng(f"{name}.wi").random(shape))
