import hashlib
import json

import pytest

from nolab import recipes, storage
from nolab.cli import main

# sha256 of the analytical map CSV for t=5, c=0.1, K=24 at the center of a 64 grid
ANALYTICAL_CSV_SHA256 = "96feaa1366d7d5964ec32692e11d43d6d0cc91ef23c7e98c53596d5c23f8d64f"


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("NOLAB_OUT", str(tmp_path / "out"))
    return tmp_path / "out"


@pytest.fixture
def toy(out):
    assert run("--quiet", "gen-data", "--pde", "wave", "--grid", 16, "--n-train", 4, "--n-test", 2,
               "--seed", 1, "--name", "toy") == 0
    return out / "toy"


def test_gen_data_wave_example(out):
    assert run("--quiet", "gen-data", "--pde", "wave", "--t", 5, "--grid", 64, "--n-train", 8, "--n-test", 2,
               "--seed", 7) == 0
    train = storage.read_dataset(out / "wave-n64-s7.train.nodf")
    test = storage.read_dataset(out / "wave-n64-s7.test.nodf")
    assert (len(train), len(test)) == (8, 2)
    assert train.meta["params"] == {"t": 5.0, "c": 0.1, "K": 24}
    manifest = json.loads((out / "wave-n64-s7.manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert set(manifest["artifacts"]) == {"wave-n64-s7.train.nodf", "wave-n64-s7.test.nodf", "wave-n64-s7.card.txt"}


def test_gen_data_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("--quiet", "--out", d, "gen-data", "--pde", "darcy", "--grid", 16, "--n-train", 3,
                   "--n-test", 1, "--seed", 3) == 0
    for f in ("darcy-n16-s3.train.nodf", "darcy-n16-s3.test.nodf", "darcy-n16-s3.manifest.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_gen_data_rejects_out_of_scope_and_bad_params(out, capsys):
    assert run("gen-data", "--pde", "helmholtz") != 0
    assert "out of scope" in capsys.readouterr().err
    assert run("gen-data", "--pde", "darcy", "--nu", 0.1, "--grid", 16) != 0
    assert run("gen-data", "--pde", "burgers") != 0


def test_gen_data_config_file_with_flag_override(out, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"pde": "wave", "grid": 16, "n_train": 2, "n_test": 1, "t": 1.0}))
    assert run("--quiet", "gen-data", "--config", cfg, "--t", 2.0, "--name", "w") == 0
    assert storage.read_dataset(out / "w.train.nodf").meta["params"]["t"] == 2.0


def test_train_toy_and_determinism(out, toy):
    args = ["--quiet", "train", "--model", "fno3x3", "--data", toy, "--epochs", 2, "--batch-size", 2,
            "--width", 4, "--modes", 4]
    assert run(*args, "--name", "a") == 0
    assert run(*args, "--name", "b") == 0
    header, rows = storage.read_csv(out / "a.history.csv")
    assert len(rows) == 2
    for suffix in (".history.csv", ".ckpt", ".final.ckpt"):
        assert (out / f"a{suffix}").read_bytes() == (out / f"b{suffix}").read_bytes()


def test_train_prints_percent(out, toy, capsys):
    assert run("train", "--model", "fno", "--data", toy, "--epochs", 1, "--width", 4, "--modes", 4) == 0
    assert "final test relative L2:" in capsys.readouterr().out


def test_train_usage_errors(out, toy):
    with pytest.raises(SystemExit) as exc:
        run("train", "--model", "unet", "--data", toy)
    assert exc.value.code != 0
    assert run("train", "--model", "fno", "--data", out / "missing") != 0
    assert run("train", "--model", "fno", "--data", toy, "--modes", 12) != 0


def test_erf_oracle_report_and_bad_x0(out, toy):
    assert run("--quiet", "train", "--model", "fno", "--data", toy, "--epochs", 1, "--width", 4, "--modes", 4,
               "--dtype", "float64", "--name", "m") == 0
    assert run("--quiet", "erf", "--checkpoint", out / "m.ckpt", "--data", toy, "--method", "autodiff",
               "--method", "fd", "--h", 1e-5, "--name", "e") == 0
    report = json.loads((out / "e.compare.json").read_text())
    assert report["autodiff_vs_fd"]["cosine"] > 0.999
    manifest = json.loads((out / "e.manifest.json").read_text())
    assert all((out / f).exists() for f in manifest["artifacts"])
    assert run("erf", "--checkpoint", out / "m.ckpt", "--data", toy, "--x0", "16,0") != 0


def test_erf_analytical_requires_wave_data(out):
    assert run("--quiet", "gen-data", "--pde", "darcy", "--grid", 16, "--n-train", 1, "--n-test", 1,
               "--name", "d") == 0
    assert run("erf", "--data", out / "d", "--method", "analytical") != 0


def test_erf_analytical_golden(out):
    assert run("--quiet", "erf", "--method", "analytical", "--grid", 64, "--t", 5, "--name", "g") == 0
    digest = hashlib.sha256((out / "g.analytical.csv").read_bytes()).hexdigest()
    assert run("--quiet", "erf", "--method", "analytical", "--grid", 64, "--t", 5, "--name", "g2") == 0
    assert hashlib.sha256((out / "g2.analytical.csv").read_bytes()).hexdigest() == digest
    assert digest == ANALYTICAL_CSV_SHA256


def test_report_rejects_unknown_experiment(out):
    with pytest.raises(SystemExit):
        run("report", "--experiment", "table9")
    with pytest.raises(ValueError):
        recipes.resolve("table1", {"colour": 1})


def test_no_partial_files_left(out, toy):
    assert not list(out.glob("*.tmp*"))


def test_tiny_table1_recipe(out, tmp_path):
    cfg = tmp_path / "t1.json"
    cfg.write_text(json.dumps({"grid": 16, "n_train": 8, "n_test": 4, "seeds": [0, 1], "epochs": 1,
                               "width": 4, "depth": 1, "modes": 4, "batch_size": 4}))
    assert run("--quiet", "report", "--experiment", "spectra", "--config", cfg) == 0
    root = out / "spectra"
    table = json.loads((root / "table1.json").read_text())
    assert set(table["models"]) == {"fno", "fno3x3", "fno-full"}
    assert 0 <= table["fno3x3_beats_fno_seeds"] <= 2
    manifest = json.loads((root / "manifest.json").read_text())
    assert "spectra.csv" in manifest["artifacts"]
    assert all((root / f).exists() for f in manifest["artifacts"])
    # a rerun reuses every cached checkpoint and reproduces the report
    before = (root / "table1.json").read_bytes()
    assert run("--quiet", "report", "--experiment", "spectra", "--config", cfg) == 0
    assert (root / "table1.json").read_bytes() == before


@pytest.mark.parametrize("experiment", ["wave-erf", "ns-erf", "equivariance"])
def test_tiny_recipes_run(out, tmp_path, experiment):
    base = {"grid": 16, "n_train": 4, "n_test": 2, "epochs": 1, "width": 4, "depth": 1, "modes": 4, "batch_size": 2}
    if experiment == "ns-erf":
        base["settings"] = [{"t": 0.1, "nu": 1e-3}]
    if experiment == "equivariance":
        base["t"] = 0.1
    if experiment == "wave-erf":
        base["models"] = ["fno", "t1"]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(base))
    assert run("--quiet", "report", "--experiment", experiment, "--config", cfg) == 0
    manifest = json.loads((out / experiment / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert all((out / experiment / f).exists() for f in manifest["artifacts"])
