"""Desk-scale experiment recipes behind ``nolab report``."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import analysis, erf, storage
from . import models as M
from . import training as T
from .datagen import build_dataset

log = logging.getLogger(__name__)

Progress = Callable[[str], None]

TABLE1: dict[str, Any] = {
    "pde": "darcy",
    "grid": 64,
    "n_train": 200,
    "n_test": 50,
    "data_seed": 0,
    "seeds": [0, 1, 2, 3, 4],
    "models": ["fno", "fno3x3", "fno-full"],
    "width": 12,
    "depth": 4,
    "modes": 12,
    "epochs": 10,
    "lr": 3e-3,
    "batch_size": 16,
    "low_band": analysis.LOW_BAND,
}

WAVE_ERF: dict[str, Any] = {
    "grid": 32,
    "n_train": 96,
    "n_test": 8,
    "t": 5.0,
    "data_seed": 0,
    "seed": 0,
    "models": ["fno", "fno3x3", "cno", "t1", "deeponet", "gt"],
    "width": 16,
    "depth": 4,
    "modes": 12,
    "epochs": 15,
    "lr": 3e-3,
    "batch_size": 8,
    "probe_index": 0,
}

NS_ERF: dict[str, Any] = {
    "grid": 32,
    "n_train": 64,
    "n_test": 8,
    "settings": [{"t": 0.5, "nu": 1e-3}, {"t": 2.0, "nu": 1e-3}, {"t": 2.0, "nu": 1e-4}],
    "data_seed": 0,
    "seed": 0,
    "models": ["fno", "cno"],
    "width": 12,
    "depth": 4,
    "modes": 12,
    "epochs": 10,
    "lr": 3e-3,
    "batch_size": 8,
    "probe_index": 0,
}

EQUIVARIANCE: dict[str, Any] = {
    "grid": 32,
    "n_train": 64,
    "n_test": 8,
    "t": 1.0,
    "data_seed": 0,
    "seed": 0,
    "models": ["fno", "cno", "gt"],
    "width": 12,
    "depth": 4,
    "modes": 12,
    "epochs": 5,
    "lr": 3e-3,
    "batch_size": 8,
}

RECIPES = {"table1": TABLE1, "wave-erf": WAVE_ERF, "ns-erf": NS_ERF, "spectra": TABLE1, "equivariance": EQUIVARIANCE}


def resolve(name: str, overrides: dict | None) -> dict:
    if name not in RECIPES:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(RECIPES)}")
    cfg = json.loads(json.dumps(RECIPES[name]))
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in cfg:
            raise ValueError(f"option {k!r} does not apply to {name}")
        cfg[k] = v
    return cfg


class Artifacts:
    """Collects every file a recipe writes so the manifest can list it."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def add(self, p: Path) -> Path:
        rel = str(Path(p).resolve().relative_to(self.root.resolve()))
        if rel not in self.files:
            self.files.append(rel)
        return Path(p)

    def json(self, name: str, obj) -> Path:
        return self.add(storage.atomic_write(self.path(name), json.dumps(obj, indent=2, sort_keys=True) + "\n"))


def _dataset(art: Artifacts, name: str, family: str, cfg: dict, params: dict | None = None, jobs: int = 1):
    """Generate a dataset pair, reusing files from an earlier run with identical settings."""
    train_p, test_p = art.path(f"{name}.train.nodf"), art.path(f"{name}.test.nodf")
    if train_p.exists() and test_p.exists():
        train, test = storage.read_dataset(train_p), storage.read_dataset(test_p)
        m = train.meta
        if (m.get("family"), m.get("grid"), m.get("seed"), len(train), len(test)) == (
            family, cfg["grid"], cfg["data_seed"], cfg["n_train"], cfg["n_test"]
        ) and all(m["params"].get(k) == v for k, v in (params or {}).items()):
            art.add(train_p), art.add(test_p)
            return train, test
    train, test = build_dataset(family, cfg["n_train"], cfg["n_test"], cfg["grid"], cfg["data_seed"], params, jobs)
    art.add(storage.write_dataset(train, train_p))
    art.add(storage.write_dataset(test, test_p))
    return train, test


def model_config(arch: str, cfg: dict, coords: bool = True) -> M.ModelConfig:
    kw = {"width": cfg["width"], "depth": cfg["depth"], "coords": coords}
    if arch in ("fno", "fno3x3", "t1"):
        kw["modes"] = min(cfg["modes"], cfg["grid"] // 2)
    if arch in ("cno", "gt"):
        kw["depth"] = 2
    if arch == "t1":
        kw["depth"] = 3
    if arch == "deeponet":
        kw.update(branch_layers=(128,), trunk_layers=(128, 128), basis=64, depth=1)
    return M.make_config(arch, cfg["grid"], **kw)


def train_cached(art: Artifacts, name: str, mcfg: M.ModelConfig, tcfg: T.TrainConfig, train, test, seed: int):
    """Train unless a checkpoint with the same model/train config and data digest exists."""
    ckpt = art.path(f"{name}.ckpt")
    key = {"train": T.config_dict(tcfg), "data": train.digest(), "init_seed": seed}
    if ckpt.exists():
        try:
            state, meta = M.load_model(ckpt, mcfg)
            if meta.get("key") == key:
                art.add(ckpt)
                hist = art.path(f"{name}.history.csv")
                if hist.exists():
                    art.add(hist)
                return state, meta
        except (storage.FormatError, ValueError):
            pass
    result = T.train(M.init_model(mcfg, seed), train, test, tcfg)
    meta = {"key": key, "stats": result.stats, "history": result.history, "best_epoch": result.best_epoch}
    art.add(M.save_model(result.state, ckpt, meta))
    art.add(T.write_history(result.history, art.path(f"{name}.history.csv")))
    return result.state, meta


def _train_config(cfg: dict, seed: int) -> T.TrainConfig:
    return T.TrainConfig(epochs=cfg["epochs"], lr=cfg["lr"], batch_size=cfg["batch_size"], seed=seed)


def _summary(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean_percent": float(arr.mean() * 100), "std_percent": float(arr.std() * 100),
            "per_seed_percent": [float(v * 100) for v in arr]}


def run_table1(cfg: dict, art: Artifacts, progress: Progress, jobs: int = 1) -> dict:
    train, test = _dataset(art, "data/darcy", cfg["pde"], cfg, jobs=jobs)
    results: dict[str, dict] = {m: {"rel_l2": [], "low_band": [], "total_energy": [], "spectra": []} for m in cfg["models"]}
    runs = [(s, m) for s in cfg["seeds"] for m in cfg["models"]]
    for k, (seed, arch) in enumerate(runs):
        progress(f"table1: training {arch} seed {seed} ({100 * k / len(runs):.0f}%)")
        mcfg = model_config(arch, cfg)
        state, meta = train_cached(art, f"runs/{arch}-s{seed}", mcfg, _train_config(cfg, seed), train, test, seed)
        pred = T.predict_dataset(state, test.inputs, meta["stats"])
        bins = analysis.radial_error_spectrum(pred, test.targets)
        art.add(analysis.write_spectrum(bins, art.path(f"runs/{arch}-s{seed}.spectrum.csv")))
        r = results[arch]
        r["rel_l2"].append(T.relative_l2(pred, test.targets))
        r["low_band"].append(bins.band(cfg["low_band"]))
        r["total_energy"].append(bins.total)
        r["spectra"].append(bins.energy.tolist())
    progress("table1: training done (100%)")
    report: dict[str, Any] = {"config": cfg, "models": {}}
    for arch, r in results.items():
        report["models"][arch] = {
            **_summary(r["rel_l2"]),
            "rel_l2": r["rel_l2"],
            "low_band_energy": r["low_band"],
            "total_error_energy": r["total_energy"],
            "params": M.param_count(M.init_model(model_config(arch, cfg))),
        }
    if {"fno", "fno3x3"} <= set(results):
        a, b = results["fno"], results["fno3x3"]
        report["fno3x3_beats_fno_seeds"] = int(sum(y < x for x, y in zip(a["rel_l2"], b["rel_l2"])))
        report["fno3x3_lower_low_band_seeds"] = int(sum(y < x for x, y in zip(a["low_band"], b["low_band"])))
    if {"fno-full", "fno3x3"} <= set(results):
        report["fno_full_beats_fno3x3_on_mean"] = bool(
            np.mean(results["fno-full"]["rel_l2"]) < np.mean(results["fno3x3"]["rel_l2"]))
    rows = [[arch, f"{v['mean_percent']:.3f}", f"{v['std_percent']:.3f}", v["params"]]
            for arch, v in report["models"].items()]
    art.add(storage.write_csv(art.path("table1.csv"), ["model", "mean_rel_l2_percent", "std_percent", "params"], rows))
    art.json("table1.json", report)
    report["_spectra"] = {arch: r["spectra"] for arch, r in results.items()}
    return report


def run_spectra(cfg: dict, art: Artifacts, progress: Progress, jobs: int = 1) -> dict:
    table = run_table1(cfg, art, progress, jobs)
    spectra = table.pop("_spectra")
    rows = []
    nbins = len(next(iter(spectra.values()))[0])
    mean = {arch: np.mean(np.asarray(s), axis=0) for arch, s in spectra.items()}
    for b in range(nbins):
        rows.append([b] + [float(mean[arch][b]) for arch in spectra])
    art.add(storage.write_csv(art.path("spectra.csv"), ["bin"] + list(spectra), rows))
    report = {
        "config": cfg,
        "low_band": cfg["low_band"],
        "low_band_energy": {arch: table["models"][arch]["low_band_energy"] for arch in spectra},
        "fno3x3_lower_low_band_seeds": table.get("fno3x3_lower_low_band_seeds"),
    }
    art.json("spectra.json", report)
    return report


def _export_pair(art: Artifacts, name: str, m: erf.ERFMap) -> None:
    art.add(erf.erf_export(m, art.path(f"{name}.csv")))
    art.add(erf.erf_export(m, art.path(f"{name}.pgm")))
    art.add(art.path(f"{name}.pgm.bounds.txt"))


def run_wave_erf(cfg: dict, art: Artifacts, progress: Progress, jobs: int = 1) -> dict:
    train, test = _dataset(art, "data/wave", "wave", cfg, {"t": cfg["t"]}, jobs)
    n = cfg["grid"]
    x0 = erf.center_index(n)
    p = train.meta["params"]
    analytical = erf.erf_analytical_wave(x0, t=p["t"], c=p["c"], K=p["K"], n=n)
    _export_pair(art, "maps/analytical", analytical)
    probe = test.inputs[cfg["probe_index"]].astype(np.float64)
    report: dict[str, Any] = {"config": cfg, "x0": list(x0), "models": {},
                              "analytical_mass": erf.erf_compare(analytical, analytical)["mass_a"]}
    for k, arch in enumerate(cfg["models"]):
        progress(f"wave-erf: {arch} ({100 * k / len(cfg['models']):.0f}%)")
        state, meta = train_cached(art, f"runs/{arch}", model_config(arch, cfg), _train_config(cfg, cfg["seed"]),
                                   train, test, cfg["seed"])
        stats = meta["stats"]
        scaled = (probe - stats["input_mean"]) / stats["input_std"]
        m = erf.erf_autodiff(state, erf.Field2D(scaled, "dirichlet-zero"), x0, probe=f"test[{cfg['probe_index']}]")
        _export_pair(art, f"maps/{arch}", m)
        cmp = erf.erf_compare(m, analytical)
        pred = T.predict_dataset(state, test.inputs, stats)
        report["models"][arch] = {"cosine_vs_analytical": cmp["cosine"], "mass": cmp["mass_a"],
                                  "test_rel_l2_percent": 100 * T.relative_l2(pred, test.targets)}
    progress("wave-erf: done (100%)")
    rows = [[a, f"{v['cosine_vs_analytical']:.4f}", f"{v['test_rel_l2_percent']:.3f}"]
            for a, v in report["models"].items()]
    art.add(storage.write_csv(art.path("wave_erf.csv"), ["model", "cosine_vs_analytical", "test_rel_l2_percent"], rows))
    art.json("wave_erf.json", report)
    return report


def half_mass_radius(m: erf.ERFMap) -> float:
    d = erf.distance_map(m.n, m.x0, m.field.boundary).ravel()
    w = np.abs(m.values).ravel()
    order = np.argsort(d, kind="stable")
    cum = np.cumsum(w[order])
    if cum[-1] == 0:
        return 0.0
    return float(d[order][np.searchsorted(cum, 0.5 * cum[-1])])


def run_ns_erf(cfg: dict, art: Artifacts, progress: Progress, jobs: int = 1) -> dict:
    report: dict[str, Any] = {"config": cfg, "settings": []}
    n = cfg["grid"]
    x0 = erf.center_index(n)
    total = len(cfg["settings"]) * len(cfg["models"])
    k = 0
    for setting in cfg["settings"]:
        tag = f"t{setting['t']:g}-nu{setting['nu']:g}"
        train, test = _dataset(art, f"data/ns-{tag}", "navier-stokes", cfg,
                               {"t": setting["t"], "nu": setting["nu"]}, jobs)
        probe = test.inputs[cfg["probe_index"]].astype(np.float64)
        entry = {"t": setting["t"], "nu": setting["nu"], "models": {}}
        for arch in cfg["models"]:
            progress(f"ns-erf: {arch} at {tag} ({100 * k / total:.0f}%)")
            k += 1
            state, meta = train_cached(art, f"runs/{arch}-{tag}", model_config(arch, cfg),
                                       _train_config(cfg, cfg["seed"]), train, test, cfg["seed"])
            stats = meta["stats"]
            scaled = (probe - stats["input_mean"]) / stats["input_std"]
            m = erf.erf_autodiff(state, erf.Field2D(scaled, "periodic"), x0, probe=f"test[{cfg['probe_index']}]")
            _export_pair(art, f"maps/{arch}-{tag}", m)
            pred = T.predict_dataset(state, test.inputs, stats)
            entry["models"][arch] = {
                "half_mass_radius": half_mass_radius(m),
                "mass": {f"{r:g}": erf.mass_in_disc(m, r) for r in erf.DEFAULT_RADII},
                "test_rel_l2_percent": 100 * T.relative_l2(pred, test.targets),
            }
        report["settings"].append(entry)
    progress("ns-erf: done (100%)")
    art.json("ns_erf.json", report)
    return report


def run_equivariance(cfg: dict, art: Artifacts, progress: Progress, jobs: int = 1) -> dict:
    train, test = _dataset(art, "data/ns", "navier-stokes", cfg, {"t": cfg["t"]}, jobs)
    samples = test.inputs.astype(np.float64)
    report: dict[str, Any] = {
        "config": cfg,
        "reference": {
            "identity": analysis.c4_equivariance_error(lambda a: a, samples),
            "pointwise": analysis.c4_equivariance_error(lambda a: np.tanh(a) + a * a, samples),
        },
        "models": {},
    }
    for k, arch in enumerate(cfg["models"]):
        progress(f"equivariance: {arch} ({100 * k / len(cfg['models']):.0f}%)")
        mcfg = model_config(arch, cfg, coords=False)
        init = M.init_model(mcfg, cfg["seed"])
        state, meta = train_cached(art, f"runs/{arch}", mcfg, _train_config(cfg, cfg["seed"]), train, test, cfg["seed"])
        report["models"][arch] = {
            "random_init": analysis.c4_equivariance_error(analysis.state_predictor(init, meta["stats"]), samples),
            "trained": analysis.c4_equivariance_error(analysis.state_predictor(state, meta["stats"]), samples),
        }
    progress("equivariance: done (100%)")
    art.json("equivariance.json", report)
    return report


RUNNERS = {
    "table1": run_table1,
    "spectra": run_spectra,
    "wave-erf": run_wave_erf,
    "ns-erf": run_ns_erf,
    "equivariance": run_equivariance,
}
