import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nolab import autodiff as ad
from nolab import models as M
from nolab import training as T
from nolab.autodiff import Tensor
from nolab.datagen import NS_GRF, sample_grf
from nolab.storage import DatasetContainer, read_csv


def identity_data(n, seed, grid=32):
    x = np.stack([sample_grf(NS_GRF, seed * 1000 + i, grid).values for i in range(n)])
    return DatasetContainer(x, x.copy(), {})


def test_relative_l2_examples():
    t = np.random.default_rng(0).standard_normal((3, 1, 8, 8))
    assert T.relative_l2(t, t) == 0.0
    assert T.relative_l2(np.zeros_like(t), t) == pytest.approx(1.0)
    assert T.relative_l2(2 * t, t) == pytest.approx(1.0)


def test_relative_l2_shape_mismatch():
    with pytest.raises(ad.ShapeError):
        T.relative_l2(np.zeros((2, 4)), np.zeros((2, 5)))


def test_relative_l2_tensor_matches_array_and_differentiates():
    rng = np.random.default_rng(1)
    p, t = rng.standard_normal((2, 3, 4, 4)), rng.standard_normal((2, 3, 4, 4))
    x = Tensor(p, requires_grad=True)
    assert float(T.relative_l2(x, t).data) == pytest.approx(T.relative_l2(p, t), rel=1e-12)
    err = ad.check_gradients(lambda: T.relative_l2(x, t), [x])
    assert err < 1e-6


def test_relative_l2_zero_target_uses_floor():
    assert T.relative_l2(np.full((1, 2), 1e-13), np.zeros((1, 2))) < 1.0


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_relative_l2_is_scale_invariant(scale, seed):
    rng = np.random.default_rng(seed)
    p, t = rng.standard_normal((2, 5, 5)), rng.standard_normal((2, 5, 5))
    assert T.relative_l2(scale * p, scale * t) == pytest.approx(T.relative_l2(p, t), rel=1e-9)


def test_adam_first_step_closed_form():
    p = {"x": Tensor(np.array([1.0]), requires_grad=True)}
    cfg = T.TrainConfig(lr=0.1)
    T.adam_step(p, {"x": np.array([2.0])}, T.OptimizerState(), cfg)
    # bias-corrected moments are g and g^2, so the step is -lr * g / (|g| + eps)
    expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8)
    assert p["x"].data[0] == pytest.approx(expected, abs=1e-15)
    assert p["x"].data[0] - 1.0 == pytest.approx(-0.1, abs=1e-8)


def test_adam_zero_gradient_leaves_parameters():
    p = {"x": Tensor(np.array([1.5, -2.0]), requires_grad=True)}
    opt = T.OptimizerState()
    T.adam_step(p, {"x": np.zeros(2)}, opt, T.TrainConfig())
    np.testing.assert_array_equal(p["x"].data, [1.5, -2.0])
    assert opt.step == 1


def test_adam_rejects_non_finite_gradient():
    p = {"w": Tensor(np.ones(2), requires_grad=True)}
    with pytest.raises(T.TrainingError, match="'w'"):
        T.adam_step(p, {"w": np.array([1.0, np.nan])}, T.OptimizerState(), T.TrainConfig())


def test_clip_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert T.clip_global_norm(g, 1.0) == pytest.approx(5.0)
    assert np.hypot(g["a"][0], g["b"][0]) == pytest.approx(1.0)


def test_train_config_validation():
    with pytest.raises(ValueError):
        T.TrainConfig(beta1=1.0)
    with pytest.raises(ValueError):
        T.TrainConfig(lr=0)


def test_cosine_schedule_endpoints():
    cfg = T.TrainConfig(lr=0.5)
    assert T.learning_rate(cfg, 0, 10) == 0.5
    assert T.learning_rate(cfg, 10, 10) == pytest.approx(0.0)


def small_state(seed=0):
    return M.init_model(M.make_config("fno", 16, width=4, depth=1, modes=4), seed)


def test_zero_epochs_returns_initial_state():
    data = identity_data(4, 0, 16)
    state = small_state()
    result = T.train(state, data, data, T.TrainConfig(epochs=0))
    assert result.history == []
    for k, p in state.params.items():
        assert np.array_equal(result.state.params[k].data, p.data)


def test_history_length_and_determinism(tmp_path):
    data, test = identity_data(8, 0, 16), identity_data(4, 1, 16)
    cfg = T.TrainConfig(epochs=3, batch_size=4, lr=1e-2, seed=5)
    r1 = T.train(small_state(), data, test, cfg)
    r2 = T.train(small_state(), data, test, cfg)
    assert len(r1.history) == 3
    assert r1.history == r2.history
    for k in r1.state.params:
        assert np.array_equal(r1.state.params[k].data, r2.state.params[k].data)
    T.write_history(r1.history, tmp_path / "a.csv")
    T.write_history(r2.history, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header, rows = read_csv(tmp_path / "a.csv")
    assert header == T.HISTORY_COLUMNS and len(rows) == 3


def test_training_does_not_mutate_input_state():
    data = identity_data(4, 0, 16)
    state = small_state()
    before = {k: p.data.copy() for k, p in state.params.items()}
    T.train(state, data, data, T.TrainConfig(epochs=1, batch_size=2))
    for k, p in state.params.items():
        assert np.array_equal(p.data, before[k])


def test_normalization_ignores_test_split():
    data = identity_data(6, 0, 16)
    test_a = identity_data(2, 1, 16)
    test_b = DatasetContainer(test_a.inputs * 100, test_a.targets * 100, {})
    cfg = T.TrainConfig(epochs=1, batch_size=3)
    ra = T.train(small_state(), data, test_a, cfg)
    rb = T.train(small_state(), data, test_b, cfg)
    assert ra.stats == rb.stats
    assert ra.history[0]["train_rel_l2"] == rb.history[0]["train_rel_l2"]


def test_empty_dataset_rejected():
    empty = DatasetContainer(np.zeros((0, 16, 16)), np.zeros((0, 16, 16)), {})
    with pytest.raises(T.TrainingError):
        T.train(small_state(), empty, empty, T.TrainConfig(epochs=1))


def test_divergence_aborts():
    data = identity_data(4, 0, 16)
    # a wildly wrong target offset makes the first loss far exceed the limit
    stats = {"input_mean": 0.0, "input_std": 1.0, "target_mean": 1e6, "target_std": 1.0}
    data = DatasetContainer(data.inputs, data.targets, {"normalization": stats})
    with pytest.raises(T.DivergenceError):
        T.train(small_state(), data, data, T.TrainConfig(epochs=1))


@pytest.mark.slow
def test_identity_task_sanity():
    train_data, test_data = identity_data(32, 0), identity_data(8, 1)
    state = M.init_model(M.make_config("fno", 32, width=8, depth=1, modes=8), 0)
    cfg = T.TrainConfig(epochs=100, batch_size=16, lr=2e-2, max_steps=200)
    result = T.train(state, train_data, test_data, cfg)
    assert result.steps == 200
    assert result.history[-1]["test_rel_l2"] < 0.02
