"""Command-line interface: gen-data, train, erf, report."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, erf, recipes, storage
from . import models as M
from . import training as T
from .datagen import build_dataset, canonical_family, data_card

OUT_ENV = "NOLAB_OUT"

log = logging.getLogger("nolab")


class CLIError(Exception):
    pass


def out_root(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "runs")


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise CLIError(f"config {path} must hold a flat JSON object")
    return cfg


def merge(config: dict, flags: dict) -> dict:
    """Flags win over the config file; unset flags (None) fall through."""
    merged = dict(config)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


class Manifest:
    """Run record written before any artifact and completed at the end."""

    def __init__(self, path: Path, command: str, config: dict, inputs: list[Path] = ()):
        self.path = path
        self.data: dict[str, Any] = {
            "tool": "nolab",
            "version": __version__,
            "command": command,
            "config": config,
            "inputs": {str(p): storage.file_digest(p) for p in inputs},
            "artifacts": [],
            "status": "running",
        }
        self.write()

    def write(self):
        storage.atomic_write(self.path, json.dumps(self.data, indent=2, sort_keys=True, default=str) + "\n")

    def finish(self, artifacts: list, status: str = "complete", **extra):
        self.data["artifacts"] = [str(a) for a in artifacts]
        self.data["status"] = status
        self.data.update(extra)
        self.write()


def say(args, msg: str):
    if not args.quiet:
        print(msg, flush=True)


def dataset_paths(prefix: str | os.PathLike) -> tuple[Path, Path]:
    prefix = str(prefix)
    for suffix in (".train.nodf", ".test.nodf"):
        if prefix.endswith(suffix):
            prefix = prefix[: -len(suffix)]
    return Path(prefix + ".train.nodf"), Path(prefix + ".test.nodf")


def parse_x0(text: str | None, n: int) -> tuple[int, int]:
    if text is None:
        return erf.center_index(n)
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise CLIError(f"--x0 expects 'ix,iy', got {text!r}") from None
    if not (0 <= i < n and 0 <= j < n):
        raise CLIError(f"--x0 {i},{j} is outside the {n}x{n} grid")
    return i, j


# ----------------------------------------------------------------------


PDE_FLAGS = ("t", "c", "K", "nu", "dt", "eps", "T", "rtol", "boundary", "gen_factor")


def cmd_gen_data(args) -> int:
    cfg = merge(load_config(args.config), {
        "pde": args.pde, "n_train": args.n_train, "n_test": args.n_test, "grid": args.grid, "seed": args.seed,
        **{k: getattr(args, k) for k in PDE_FLAGS},
    })
    cfg.setdefault("n_train", 8)
    cfg.setdefault("n_test", 2)
    cfg.setdefault("grid", 64)
    cfg.setdefault("seed", 0)
    if "pde" not in cfg:
        raise CLIError("--pde is required")
    try:
        family = canonical_family(cfg["pde"])
    except ValueError as e:
        raise CLIError(str(e)) from None
    params = {k: cfg[k] for k in PDE_FLAGS if k in cfg}
    name = args.name or f"{family}-n{cfg['grid']}-s{cfg['seed']}"
    root = out_root(args)
    root.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(root / f"{name}.manifest.json", "gen-data", cfg)
    say(args, f"generating {family}: {cfg['n_train']} train + {cfg['n_test']} test at {cfg['grid']}^2")
    try:
        train, test = build_dataset(family, cfg["n_train"], cfg["n_test"], cfg["grid"], cfg["seed"], params, args.jobs)
    except ValueError as e:
        manifest.finish([], status="failed", error=str(e))
        raise CLIError(str(e)) from None
    train_p, test_p = dataset_paths(root / name)
    files = [storage.write_dataset(train, train_p), storage.write_dataset(test, test_p),
             storage.atomic_write(root / f"{name}.card.txt", data_card(train, test))]
    manifest.finish([f.name for f in files], digests={f.name: storage.file_digest(f) for f in files[:2]})
    say(args, f"wrote {train_p} and {test_p} (100%)")
    return 0


def cmd_train(args) -> int:
    cfg = merge(load_config(args.config), {
        "model": args.model, "data": args.data, "epochs": args.epochs, "lr": args.lr, "batch_size": args.batch_size,
        "width": args.width, "depth": args.depth, "modes": args.modes, "seed": args.seed,
        "max_steps": args.max_steps, "dtype": args.dtype,
    })
    if args.no_coords:
        cfg["coords"] = False
    for key in ("model", "data"):
        if key not in cfg:
            raise CLIError(f"--{key} is required")
    if cfg["model"] not in M.ARCHITECTURES:
        raise CLIError(f"unknown model {cfg['model']!r}; choose from {', '.join(M.ARCHITECTURES)}")
    train_p, test_p = dataset_paths(cfg["data"])
    for p in (train_p, test_p):
        if not p.exists():
            raise CLIError(f"dataset file {p} not found")
    train, test = storage.read_dataset(train_p), storage.read_dataset(test_p)
    grid = train.grid
    if "grid" in cfg and cfg["grid"] != grid:
        raise CLIError(f"model grid {cfg['grid']} does not match dataset grid {grid}")
    model_kw = {k: cfg[k] for k in ("width", "depth", "modes", "coords", "dtype") if k in cfg}
    try:
        mcfg = M.make_config(cfg["model"], grid, **model_kw)
        tcfg = T.TrainConfig(**{k: cfg[k] for k in ("epochs", "lr", "batch_size", "seed", "max_steps") if k in cfg})
    except (TypeError, ValueError) as e:
        raise CLIError(str(e)) from None
    name = args.name or f"{cfg['model']}-s{tcfg.seed}"
    root = out_root(args)
    root.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(root / f"{name}.manifest.json", "train",
                        {**cfg, "model_config": mcfg.to_dict(), "train_config": T.config_dict(tcfg)},
                        [train_p, test_p])

    def progress(epoch, row):
        say(args, f"epoch {epoch}/{tcfg.epochs} ({100 * epoch / max(1, tcfg.epochs):.0f}%): "
                  f"train {100 * row['train_rel_l2']:.3f}% test {100 * row['test_rel_l2']:.3f}%")

    try:
        result = T.train(M.init_model(mcfg, tcfg.seed), train, test, tcfg, progress)
    except T.TrainingError as e:
        manifest.finish([], status="failed", error=str(e))
        raise CLIError(str(e)) from None
    meta = {"stats": result.stats, "best_epoch": result.best_epoch, "train_config": T.config_dict(tcfg),
            "data": {"train": train.digest(), "test": test.digest(), "family": train.meta.get("family")}}
    files = [M.save_model(result.best_state, root / f"{name}.ckpt", meta),
             M.save_model(result.state, root / f"{name}.final.ckpt", meta),
             T.write_history(result.history, root / f"{name}.history.csv")]
    final = result.history[-1]["test_rel_l2"] if result.history else T.evaluate(result.state, test, result.stats)
    manifest.finish([f.name for f in files], final_test_rel_l2_percent=100 * final)
    say(args, f"final test relative L2: {100 * final:.3f}%")
    return 0


METHOD_TAGS = {"autodiff": "autodiff", "fd": "finite-difference", "analytical": "analytical"}


def cmd_erf(args) -> int:
    methods = args.method or ["autodiff"]
    root = out_root(args)
    root.mkdir(parents=True, exist_ok=True)
    name = args.name or "erf"
    learned = [m for m in methods if m != "analytical"]
    state = meta = test = None
    inputs = []
    if learned:
        if not args.checkpoint:
            raise CLIError("--checkpoint is required for autodiff/fd maps")
        state, meta = M.load_model(args.checkpoint)
        inputs.append(Path(args.checkpoint))
    if args.data:
        _, test_p = dataset_paths(args.data)
        test = storage.read_dataset(test_p)
        inputs.append(test_p)
    grid = state.config.grid if state else (test.grid if test else args.grid)
    x0 = parse_x0(args.x0, grid)
    wave = {"t": args.t, "c": args.c, "K": args.K}
    if "analytical" in methods and test is not None:
        if test.meta.get("family") != "wave":
            raise CLIError(f"analytical ERF needs wave data, got {test.meta.get('family')!r}")
        wave = {k: test.meta["params"][k] for k in ("t", "c", "K")}
    cfg = {"methods": methods, "x0": list(x0), "grid": grid, "probe_index": args.probe_index, "h": args.h, **wave}
    manifest = Manifest(root / f"{name}.manifest.json", "erf", cfg, inputs)
    maps: dict[str, erf.ERFMap] = {}
    if learned:
        if test is None:
            raise CLIError("--data is required to pick the probe input for learned maps")
        if not (0 <= args.probe_index < len(test)):
            raise CLIError(f"--probe-index {args.probe_index} outside the {len(test)}-sample test split")
        stats = meta["stats"]
        probe = (test.inputs[args.probe_index].astype(np.float64) - stats["input_mean"]) / stats["input_std"]
        field = erf.Field2D(probe, test.meta.get("boundary", "periodic"))
        tag = f"test[{args.probe_index}]"
        for m in learned:
            say(args, f"computing {m} ERF at {x0}")
            if m == "autodiff":
                maps[m] = erf.erf_autodiff(state, field, x0, tag)
            else:
                maps[m] = erf.erf_finite_difference(state, field, x0, args.h, tag)
    if "analytical" in methods:
        maps["analytical"] = erf.erf_analytical_wave(x0, n=grid, **wave)
    files = []
    for m, emap in maps.items():
        for fmt in ("csv", "pgm"):
            files.append(erf.erf_export(emap, root / f"{name}.{m}.{fmt}"))
        files.append(root / f"{name}.{m}.pgm.bounds.txt")
    if len(maps) >= 2:
        keys = list(maps)
        report = {f"{a}_vs_{b}": erf.erf_compare(maps[a], maps[b])
                  for i, a in enumerate(keys) for b in keys[i + 1:]}
        files.append(erf.write_report(report, root / f"{name}.compare.json"))
        for pair, r in report.items():
            say(args, f"{pair}: cosine {r['cosine']:.6f}")
    manifest.finish([f.name for f in files])
    return 0


def cmd_report(args) -> int:
    overrides = merge(load_config(args.config), {"seeds": args.seeds, "epochs": args.epochs})
    try:
        cfg = recipes.resolve(args.experiment, overrides)
    except ValueError as e:
        raise CLIError(str(e)) from None
    root = out_root(args) / args.experiment
    art = recipes.Artifacts(root)
    manifest = Manifest(root / "manifest.json", f"report {args.experiment}", cfg)
    report = recipes.RUNNERS[args.experiment](cfg, art, lambda msg: say(args, msg), args.jobs)
    manifest.finish(art.files)
    if args.experiment == "table1":
        for arch, v in report["models"].items():
            say(args, f"{arch}: {v['mean_percent']:.3f}% +- {v['std_percent']:.3f}%")
    say(args, f"report written to {root}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nolab", description="Desk-scale neural operator lab.")
    p.add_argument("--version", action="version", version=f"nolab {__version__}")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for data generation")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a train/test dataset pair")
    g.add_argument("--pde", help="wave, ns, darcy or allen-cahn")
    g.add_argument("--n-train", type=int)
    g.add_argument("--n-test", type=int)
    g.add_argument("--grid", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--t", type=float, help="target time (wave, ns)")
    g.add_argument("--c", type=float, help="wave speed")
    g.add_argument("--K", type=int, help="sine modes per axis (wave, allen-cahn)")
    g.add_argument("--nu", type=float, help="viscosity (ns)")
    g.add_argument("--dt", type=float, help="time step (ns, allen-cahn)")
    g.add_argument("--eps", type=float, help="reaction rate (allen-cahn)")
    g.add_argument("--T", type=float, help="final time (allen-cahn)")
    g.add_argument("--rtol", type=float, help="CG tolerance (darcy)")
    g.add_argument("--boundary", help="allen-cahn boundary kind")
    g.add_argument("--gen-factor", dest="gen_factor", type=int, help="ns generation grid multiplier")
    g.add_argument("--config", help="flat JSON config; flags win")
    g.add_argument("--name", help="file stem (default <pde>-n<grid>-s<seed>)")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model on a dataset pair")
    t.add_argument("--model", choices=M.ARCHITECTURES)
    t.add_argument("--data", help="dataset prefix (or path to the .train.nodf file)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--width", type=int)
    t.add_argument("--depth", type=int)
    t.add_argument("--modes", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--max-steps", type=int)
    t.add_argument("--dtype", choices=["float32", "float64"])
    t.add_argument("--no-coords", action="store_true", help="disable coordinate input channels")
    t.add_argument("--config")
    t.add_argument("--name")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("erf", help="effective receptive field maps")
    e.add_argument("--checkpoint")
    e.add_argument("--data", help="dataset prefix supplying the probe input")
    e.add_argument("--probe-index", type=int, default=0)
    e.add_argument("--x0", help="output location 'ix,iy' (default: grid center)")
    e.add_argument("--method", action="append", choices=list(METHOD_TAGS))
    e.add_argument("--h", type=float, help="finite-difference step (default 1e-4 of the probe std)")
    e.add_argument("--grid", type=int, default=64, help="grid for analytical-only maps")
    e.add_argument("--t", type=float, default=5.0)
    e.add_argument("--c", type=float, default=0.1)
    e.add_argument("--K", type=int, default=24)
    e.add_argument("--name")
    e.set_defaults(func=cmd_erf)

    r = sub.add_parser("report", help="run a desk-scale experiment recipe")
    r.add_argument("--experiment", required=True, choices=list(recipes.RECIPES))
    r.add_argument("--config")
    r.add_argument("--seeds", type=lambda s: [int(v) for v in s.split(",")], help="comma-separated seeds")
    r.add_argument("--epochs", type=int)
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (CLIError, storage.FormatError, OSError) as e:
        print(f"nolab: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
