"""Reproducible input/target datasets for each PDE family."""

from __future__ import annotations

from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from typing import Any

import numpy as np

from ..autodiff.spectral import resample_array
from ..storage import DatasetContainer, array_digest
from .allen_cahn import AC_EPS, AC_T, allen_cahn_solve
from .darcy import darcy_residual, darcy_sample_coefficient, darcy_solve
from .field import Field2D, grid_coords
from .grf import NS_GRF, sample_grf
from .navier_stokes import NS_VISCOSITY, ns_solve
from .wave import WAVE_K, WAVE_SPEED, SineCoeffs, sample_wave_initial, wave_at, wave_exact_solution

FAMILIES = ("wave", "navier-stokes", "darcy", "allen-cahn")
ALIASES = {"ns": "navier-stokes"}
OUT_OF_SCOPE = {"helmholtz": "Helmholtz data is not generated by this tool (external FEM dataset)"}
SPLITS = {"train": 0, "test": 1}

DEFAULTS: dict[str, dict[str, Any]] = {
    "wave": {"t": 5.0, "c": WAVE_SPEED, "K": WAVE_K},
    "navier-stokes": {"t": 5.0, "nu": NS_VISCOSITY, "dt": 2e-3, "gen_factor": 2},
    "darcy": {"rtol": 1e-10},
    # dt here is an accuracy choice well below the explicit stability bound
    "allen-cahn": {"eps": AC_EPS, "T": AC_T, "dt": 5e-8, "K": WAVE_K, "boundary": "periodic"},
}
BOUNDARY = {"wave": "dirichlet-zero", "navier-stokes": "periodic", "darcy": "dirichlet-zero"}


def canonical_family(name: str) -> str:
    name = ALIASES.get(name, name)
    if name in OUT_OF_SCOPE:
        raise ValueError(f"{name}: out of scope ({OUT_OF_SCOPE[name]})")
    if name not in FAMILIES:
        raise ValueError(f"unknown PDE family {name!r}; choose from {', '.join(FAMILIES)}")
    return name


def resolve_params(family: str, params: dict | None) -> dict[str, Any]:
    family = canonical_family(family)
    resolved = dict(DEFAULTS[family])
    for key, value in (params or {}).items():
        if value is None:
            continue
        if key not in resolved:
            raise ValueError(f"parameter {key!r} does not apply to {family}")
        resolved[key] = value
    return resolved


def sample_seed(seed: int, split: str, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), SPLITS[split], int(index)])


def wave_coeffs(seed: int, split: str, index: int, params: dict) -> SineCoeffs:
    coeffs, _ = sample_wave_initial(sample_seed(seed, split, index), params["K"], 8, params["c"])
    return coeffs


def _wave(ss, n, p):
    coeffs, f = sample_wave_initial(ss, p["K"], n, p["c"])
    return f.values, wave_exact_solution(coeffs, p["t"], n).values, {}


def _navier_stokes(ss, n, p):
    m = n * p["gen_factor"]
    w0 = sample_grf(NS_GRF, ss, m)
    traj = ns_solve(w0, nu=p["nu"], T=p["t"], dt=p["dt"])
    wt = traj[max(traj)]
    return resample_array(w0.values, (n, n)), resample_array(wt.values, (n, n)), {}


def _darcy(ss, n, p):
    a = darcy_sample_coefficient(ss, n)
    u = darcy_solve(a, rtol=p["rtol"])
    return a.values, u.values, {"residual": darcy_residual(a, u)}


def _allen_cahn(ss, n, p):
    rng_seed = ss
    coeffs, _ = sample_wave_initial(rng_seed, p["K"], 8)
    x = grid_coords(n, p["boundary"])
    f = Field2D(wave_at(coeffs, 0.0, x, x), p["boundary"])
    u = allen_cahn_solve(f, eps=p["eps"], T=p["T"], dt=p["dt"])
    return f.values, u.values, {}


GENERATORS: dict[str, Callable] = {
    "wave": _wave,
    "navier-stokes": _navier_stokes,
    "darcy": _darcy,
    "allen-cahn": _allen_cahn,
}


def _generate_one(args):
    family, seed, split, index, n, params = args
    return GENERATORS[family](sample_seed(seed, split, index), n, params)


def generate_split(family: str, split: str, count: int, n: int, seed: int, params: dict, jobs: int = 1):
    tasks = [(family, seed, split, i, n, params) for i in range(count)]
    if jobs > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_generate_one, tasks))
    else:
        results = [_generate_one(t) for t in tasks]
    if not results:
        shape = (0, n, n)
        return np.zeros(shape), np.zeros(shape), []
    inputs = np.stack([r[0] for r in results])
    targets = np.stack([r[1] for r in results])
    return inputs, targets, [r[2] for r in results]


def normalization_stats(inputs: np.ndarray, targets: np.ndarray) -> dict[str, float]:
    """Per-channel mean/std over the training split (single channel)."""
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    return {
        "input_mean": float(x.mean()),
        "input_std": float(x.std()) or 1.0,
        "target_mean": float(y.mean()),
        "target_std": float(y.std()) or 1.0,
    }


def build_dataset(
    family: str,
    n_train: int,
    n_test: int,
    n: int,
    seed: int,
    params: dict | None = None,
    jobs: int = 1,
) -> tuple[DatasetContainer, DatasetContainer]:
    """Generate train and test containers; statistics come from train only."""
    family = canonical_family(family)
    params = resolve_params(family, params)
    if n < 8:
        raise ValueError(f"grid must be at least 8, got {n}")
    splits = {}
    for split, count in (("train", n_train), ("test", n_test)):
        splits[split] = generate_split(family, split, count, n, seed, params, jobs)
    if n_train < 1:
        raise ValueError("need at least one training sample")
    stats = normalization_stats(*(a.astype(np.float32) for a in splits["train"][:2]))
    out = []
    for split in ("train", "test"):
        x, y, extras = splits[split]
        meta = {
            "family": family,
            "grid": n,
            "boundary": params.get("boundary", BOUNDARY.get(family, "periodic")),
            "seed": int(seed),
            "split": split,
            "params": params,
            "normalization": stats,
            "float64_digest": {"inputs": array_digest(x), "targets": array_digest(y)},
        }
        if family == "darcy":
            meta["max_residual"] = max((e["residual"] for e in extras), default=0.0)
        out.append(DatasetContainer(x, y, meta))
    return out[0], out[1]


def normalize(values: np.ndarray, mean: float, std: float) -> np.ndarray:
    return (values - mean) / std


def denormalize(values: np.ndarray, mean: float, std: float) -> np.ndarray:
    return values * std + mean


def data_card(train: DatasetContainer, test: DatasetContainer) -> str:
    meta = train.meta
    lines = [
        f"family: {meta['family']}",
        f"grid: {meta['grid']} x {meta['grid']} ({meta['boundary']})",
        f"seed: {meta['seed']}",
        f"train samples: {len(train)}",
        f"test samples: {len(test)}",
    ]
    lines += [f"param {k}: {v}" for k, v in sorted(meta["params"].items())]
    lines += [f"normalization {k}: {v!r}" for k, v in sorted(meta["normalization"].items())]
    lines.append(f"train sha256: {train.digest()}")
    lines.append(f"test sha256: {test.digest()}")
    return "\n".join(lines) + "\n"
