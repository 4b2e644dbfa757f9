"""Model runtime: preprocessing, inference, online updates, anomaly
scoring, persistence."""

import numpy as np
import pytest

from edgecep.errors import (
    DimensionMismatchError, FrozenOnlyModelError, InvariantViolationError,
    ModelFormatError, NotAutoencoderError,
)
from edgecep.nn import (
    Layer, Metrics, Model, ModelPool, Trainer, anomaly_score, infer,
    init_layer, load_model, preprocess, save_model, train_step, _forward,
    _loss_and_delta,
)


def _identity_model(dim=3, mean=None, std=None):
    layer = Layer(dim, dim, np.eye(dim), np.zeros(dim), "linear")
    return Model("ident", [layer], loss="mse", mean=mean, std=std)


def _random_model(rng, loss="mse", frozen=1):
    dims = [4, 5, 3]
    dims.append(3 if loss == "cross_entropy" else 4)
    acts = ["relu", "sigmoid",
            "softmax" if loss == "cross_entropy" else "linear"]
    layers = [init_layer(dims[i], dims[i + 1], acts[i], rng)
              for i in range(3)]
    return Model("m", layers, frozen_count=frozen, loss=loss,
                 mean=rng.normal(size=4), std=rng.uniform(0.5, 2.0, 4))


# -- preprocess --

def test_preprocess_identity():
    m = _identity_model()
    x = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(preprocess(m, x), x)


def test_preprocess_standardizes():
    m = _identity_model(1, mean=[2.0], std=[2.0])
    assert preprocess(m, [4.0]) == pytest.approx([1.0])


def test_preprocess_inverse_roundtrip():
    rng = np.random.default_rng(3)
    m = _identity_model(5, mean=rng.normal(size=5),
                        std=rng.uniform(0.5, 3.0, 5))
    for _ in range(50):
        x = rng.normal(size=5)
        back = preprocess(m, x) * m.std + m.mean
        assert np.max(np.abs(back - x)) < 1e-12


def test_preprocess_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        preprocess(_identity_model(3), [1.0, 2.0])


# -- infer --

def test_identity_network_returns_input():
    m = _identity_model()
    x = np.array([0.5, -1.5, 2.0])
    assert np.array_equal(infer(m, x), x)


def test_softmax_normalizes():
    rng = np.random.default_rng(11)
    m = _random_model(rng, loss="cross_entropy")
    for _ in range(30):
        out = infer(m, rng.normal(size=4))
        assert abs(out.sum() - 1.0) < 1e-9
        assert (out >= 0).all()


def test_pinned_two_layer_forward_matches_hand_computation():
    w1 = np.array([[1.0, 2.0], [0.0, -1.0]])
    b1 = np.array([0.5, 0.0])
    w2 = np.array([[1.0, 1.0]])
    b2 = np.array([-0.25])
    m = Model("hand", [Layer(2, 2, w1, b1, "relu"),
                       Layer(2, 1, w2, b2, "linear")], loss="mse",
              mean=[1.0, 0.0], std=[2.0, 1.0])
    x = np.array([3.0, -1.0])
    # by hand: x' = ((3-1)/2, -1) = (1, -1); z1 = (1*1+2*-1+0.5, 1) -> relu
    z1 = np.array([1 * 1 + 2 * -1 + 0.5, 0 * 1 + -1 * -1 + 0.0])
    a1 = np.maximum(z1, 0)
    expected = w2 @ a1 + b2
    assert np.max(np.abs(infer(m, x) - expected)) < 1e-9


def test_infer_is_pure():
    rng = np.random.default_rng(4)
    m = _random_model(rng)
    x = rng.normal(size=4)
    assert np.array_equal(infer(m, x), infer(m, x))


# -- train_step --

def test_zero_learning_rate_keeps_weights():
    rng = np.random.default_rng(8)
    m = _random_model(rng)
    with pytest.raises(InvariantViolationError):
        Trainer(learning_rate=0.0)
    # smallest positive rate: weights move negligibly but loss records
    tr = Trainer(learning_rate=1e-300)
    met = Metrics()
    before = [l.weights.copy() for l in m.layers]
    train_step(m, tr, met, rng.normal(size=4), rng.normal(size=4))
    assert met.sample_count == 1 and met.running_loss_mean > 0
    for prev, layer in zip(before, m.layers):
        assert np.allclose(prev, layer.weights)


def _numeric_grads(model, x, y, h=1e-5):
    out = []
    for idx in range(model.frozen_count, len(model.layers)):
        layer = model.layers[idx]
        for arr in (layer.weights, layer.bias):
            g = np.zeros_like(arr)
            flat = arr.ravel()
            gflat = g.ravel()
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                zs, acts = _forward(model, x)
                lp, _ = _loss_and_delta(model, acts[-1], y, zs[-1])
                flat[k] = orig - h
                zs, acts = _forward(model, x)
                lm, _ = _loss_and_delta(model, acts[-1], y, zs[-1])
                flat[k] = orig
                gflat[k] = (lp - lm) / (2 * h)
            out.append(g)
    return out


def _analytic_grads(model, x, y):
    before_w = [l.weights.copy() for l in model.layers]
    before_b = [l.bias.copy() for l in model.layers]
    train_step(model, Trainer(learning_rate=1.0), Metrics(), x, y)
    grads = []
    for idx in range(model.frozen_count, len(model.layers)):
        grads.append(before_w[idx] - model.layers[idx].weights)
        grads.append(before_b[idx] - model.layers[idx].bias)
        model.layers[idx].weights = before_w[idx]
        model.layers[idx].bias = before_b[idx]
    return grads


def grad_check(model, x, y) -> float:
    analytic = _analytic_grads(model, x, y)
    numeric = _numeric_grads(model, x, y)
    worst = 0.0
    for a, f in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(2024)
    for trial in range(6):
        loss = "mse" if trial % 2 == 0 else "cross_entropy"
        m = _random_model(rng, loss=loss, frozen=trial % 3)
        x = rng.normal(size=4)
        if loss == "cross_entropy":
            y = np.zeros(3)
            y[trial % 3] = 1.0
        else:
            y = rng.normal(size=4)
        assert grad_check(m, x, y) <= 1e-4


def test_frozen_prefix_untouched():
    rng = np.random.default_rng(9)
    m = _random_model(rng, frozen=2)
    frozen = [(l.weights.tobytes(), l.bias.tobytes())
              for l in m.layers[:2]]
    tr, met = Trainer(), Metrics()
    for _ in range(300):
        train_step(m, tr, met, rng.normal(size=4), rng.normal(size=4))
    assert frozen == [(l.weights.tobytes(), l.bias.tobytes())
                      for l in m.layers[:2]]


def test_fully_frozen_model_cannot_train():
    rng = np.random.default_rng(10)
    m = _random_model(rng, frozen=3)
    with pytest.raises(FrozenOnlyModelError):
        train_step(m, Trainer(), Metrics(), rng.normal(size=4),
                   rng.normal(size=4))


def test_online_convergence_on_linear_target():
    rng = np.random.default_rng(77)
    target_w = rng.normal(size=(2, 3))
    m = Model("fit", [init_layer(3, 2, "linear", rng)], loss="mse")
    tr = Trainer(learning_rate=0.01)
    met = Metrics()
    losses = []
    for _ in range(500):
        x = rng.normal(size=3)
        _, loss = train_step(m, tr, met, x, target_w @ x)
        losses.append(loss)
    assert np.mean(losses[-50:]) < 0.5 * np.mean(losses[:50])
    assert tr.step_count == 500


def test_running_loss_mean_matches_batch_mean():
    rng = np.random.default_rng(13)
    m = _random_model(rng)
    tr, met = Trainer(), Metrics()
    losses = []
    for _ in range(200):
        _, loss = train_step(m, tr, met, rng.normal(size=4),
                             rng.normal(size=4))
        losses.append(loss)
    assert abs(met.running_loss_mean - np.mean(losses)) < 1e-9
    assert met.sample_count == 200


# -- anomaly score --

def test_identity_autoencoder_scores_zero():
    m = _identity_model()
    assert anomaly_score(m, [1.5, -2.0, 7.0]) == 0.0


def test_constant_offset_scores_one():
    dim = 4
    layer = Layer(dim, dim, np.eye(dim), np.ones(dim), "linear")
    m = Model("off", [layer], loss="mse")
    assert anomaly_score(m, [0.0] * dim) == pytest.approx(1.0)


def test_score_equals_direct_mse():
    rng = np.random.default_rng(21)
    layers = [init_layer(4, 3, "sigmoid", rng),
              init_layer(3, 4, "linear", rng)]
    m = Model("ae", layers, loss="mse")
    for _ in range(20):
        x = rng.normal(size=4)
        direct = float(np.mean((infer(m, x) - preprocess(m, x)) ** 2))
        assert abs(anomaly_score(m, x) - direct) < 1e-12


def test_non_autoencoder_rejected():
    rng = np.random.default_rng(1)
    m = Model("clf", [init_layer(4, 2, "linear", rng)], loss="mse")
    with pytest.raises(NotAutoencoderError):
        anomaly_score(m, [0.0] * 4)


# -- persistence --

def test_save_load_save_identical_bytes():
    rng = np.random.default_rng(33)
    m = _random_model(rng)
    data = save_model(m)
    again = save_model(load_model(data))
    assert data == again


def test_zero_std_rejected():
    m = _identity_model()
    data = save_model(m).decode()
    broken = data.replace('"std": [\n      1.0,', '"std": [\n      0.0,')
    with pytest.raises(InvariantViolationError):
        load_model(broken)


def test_broken_dims_rejected():
    rng = np.random.default_rng(14)
    m = _random_model(rng)
    doc = save_model(m).decode()
    broken = doc.replace('"in_dim": 5', '"in_dim": 6', 1)
    with pytest.raises(InvariantViolationError):
        load_model(broken)


def test_format_error_has_field_path():
    with pytest.raises(ModelFormatError) as exc:
        load_model(b'{"format": "edgecep-model/1", "loss": "mse"}')
    assert "model_id" in str(exc.value)


def test_pool_unique_ids():
    pool = ModelPool()
    m = _identity_model()
    pool.add(m)
    assert "ident" in pool and len(pool) == 1
    with pytest.raises(InvariantViolationError):
        pool.add(_identity_model())


# -- validation --

def test_softmax_only_final_layer():
    rng = np.random.default_rng(6)
    layers = [init_layer(3, 3, "softmax", rng),
              init_layer(3, 3, "linear", rng)]
    with pytest.raises(InvariantViolationError):
        Model("bad", layers, loss="cross_entropy")


def test_loss_activation_pairing_enforced():
    rng = np.random.default_rng(6)
    with pytest.raises(InvariantViolationError):
        Model("bad", [init_layer(3, 3, "linear", rng)],
              loss="cross_entropy")
    with pytest.raises(InvariantViolationError):
        Model("bad", [init_layer(3, 3, "softmax", rng)], loss="mse")
