from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import gradient_check
from gaitphase.errors import (
    IncompatibleModelError,
    InvalidInputError,
    InvalidParameterError,
    InvalidSpecError,
    ModelFileError,
    TrainingDivergedError,
)
from gaitphase.nn import (
    AdamState,
    EarlyStopping,
    LayerSpec,
    TrainConfig,
    adam_step,
    backward,
    classifier_specs,
    classifier_train_config,
    dense_stack,
    forward,
    from_bytes,
    init_model,
    load_model,
    loss,
    make_dropout_masks,
    predict_classifier,
    predict_regressor,
    regressor_specs,
    regressor_train_config,
    save_model,
    softmax,
    to_bytes,
    to_text,
    train,
)


def small_model(hidden, out, seed=7):
    m = init_model(dense_stack(360, [8, 8], 3, hidden, out), seed)
    rng = np.random.default_rng(seed)
    for b in m.biases:
        b += rng.normal(0.0, 0.1, b.shape)
    return m


# ------------------------------------------------------------- architecture

def test_preset_parameter_counts():
    reg = init_model(regressor_specs(), 0, task="regressor")
    clf = init_model(classifier_specs(), 0, task="classifier")
    # 360*128+128 + 2*(128*128+128) + 128*3+3
    assert reg.n_params == 79619
    # 360*128+128 + 128*128+128 + 128*3+3
    assert clf.n_params == 63107
    assert [s.activation for s in reg.layers] == ["relu"] * 3 + ["linear"]
    assert [s.activation for s in clf.layers] == ["tanh"] * 2 + ["softmax"]


def test_spec_validation():
    with pytest.raises(InvalidSpecError):
        LayerSpec(0, 3, "relu")
    with pytest.raises(InvalidSpecError):
        LayerSpec(3, 3, "sigmoid")
    with pytest.raises(InvalidSpecError):
        init_model([LayerSpec(4, 3, "relu"), LayerSpec(4, 2, "linear")], 0)
    with pytest.raises(InvalidSpecError):
        init_model([LayerSpec(4, 3, "softmax"), LayerSpec(3, 2, "linear")], 0)


def test_glorot_init_is_seeded_and_bounded():
    a = init_model(regressor_specs(), 11)
    b = init_model(regressor_specs(), 11)
    c = init_model(regressor_specs(), 12)
    assert all(np.array_equal(x, y) for x, y in zip(a.parameters(), b.parameters()))
    assert not np.array_equal(a.weights[0], c.weights[0])
    limit = math.sqrt(6.0 / (360 + 128))
    assert np.abs(a.weights[0]).max() <= limit
    assert np.abs(a.weights[0]).max() > 0.95 * limit
    assert all(np.all(b == 0) for b in a.biases)


# ------------------------------------------------------------- forward/loss

def test_softmax_is_stable_and_normalized():
    p = softmax(np.array([[1000.0, 1000.0, -1000.0], [0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(p, [[0.5, 0.5, 0.0], [1 / 3, 1 / 3, 1 / 3]])


def test_loss_hand_values():
    assert loss([[1.0, 2.0], [3.0, 5.0]], [[1.0, 0.0], [3.0, 4.0]], "mse") == pytest.approx(5.0 / 4.0)
    p = np.array([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
    t = np.array([[1.0, 0, 0], [0, 0, 1.0]])
    assert loss(p, t, "cross_entropy") == pytest.approx(-(math.log(0.7) + math.log(0.8)) / 2)
    # probability floor keeps the loss finite
    assert loss([[0.0, 1.0, 0.0]], [[1.0, 0.0, 0.0]], "cross_entropy") == pytest.approx(-math.log(1e-12))
    with pytest.raises(InvalidSpecError):
        loss([[1.0]], [[1.0]], "hinge")
    with pytest.raises(InvalidInputError):
        loss([[1.0]], [[1.0, 2.0]], "mse")


def test_forward_single_and_batch_agree_bitwise_in_rowwise_mode():
    m = init_model(regressor_specs(), 3)
    x = np.random.default_rng(0).standard_normal((257, 360))
    batch = forward(m, x, rowwise=True)
    single = np.stack([forward(m, row, rowwise=True) for row in x[::16]])
    assert np.array_equal(batch[::16], single)
    np.testing.assert_allclose(forward(m, x), batch, rtol=1e-10, atol=1e-12)


def test_forward_rejects_wrong_width():
    m = init_model(classifier_specs(), 0)
    with pytest.raises(InvalidInputError):
        forward(m, np.zeros(359))


def test_dropout_masks_are_inverted_and_seeded():
    m = init_model(classifier_specs(), 0)
    masks = make_dropout_masks(m, 1000, 0.15, np.random.default_rng(4))
    assert len(masks) == 2 and masks[0].shape == (1000, 128)
    vals = np.unique(masks[0])
    np.testing.assert_allclose(vals, [0.0, 1.0 / 0.85])
    assert masks[0].mean() == pytest.approx(1.0, abs=0.02)
    again = make_dropout_masks(m, 1000, 0.15, np.random.default_rng(4))
    assert all(np.array_equal(a, b) for a, b in zip(masks, again))
    assert make_dropout_masks(m, 10, 0.0, np.random.default_rng(0)) is None


# ------------------------------------------------------------- gradients

@pytest.mark.parametrize(
    "hidden,out,kind",
    [("relu", "linear", "mse"), ("tanh", "softmax", "cross_entropy"), ("tanh", "softmax", "mse")],
)
@pytest.mark.parametrize("dropout", [False, True])
def test_gradient_matches_finite_differences(hidden, out, kind, dropout):
    m = small_model(hidden, out)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((16, 360))
    t = np.eye(3)[rng.integers(0, 3, 16)] if out == "softmax" else rng.standard_normal((16, 3))
    masks = make_dropout_masks(m, 16, 0.3, rng) if dropout else None
    worst, elem = gradient_check(m, x, t, kind, masks)
    assert worst < 1e-5
    assert elem < 1e-4


def test_cross_entropy_needs_softmax():
    m = small_model("relu", "linear")
    with pytest.raises(InvalidSpecError):
        backward(m, np.zeros((2, 360)), np.zeros((2, 3)), "cross_entropy")
    with pytest.raises(InvalidInputError):
        backward(m, np.zeros((2, 360)), np.zeros((3, 3)), "mse")


def test_backward_loss_matches_forward_loss():
    m = small_model("tanh", "softmax")
    x = np.random.default_rng(2).standard_normal((5, 360))
    t = np.eye(3)[[0, 1, 2, 0, 1]]
    value, _ = backward(m, x, t, "cross_entropy")
    assert value == loss(forward(m, x), t, "cross_entropy")


# ------------------------------------------------------------- Adam

def test_adam_first_step_is_learning_rate_times_sign():
    p = [np.array([1.0, -2.0, 3.0])]
    g = [np.array([0.5, -4.0, 0.0])]
    adam_step(p, g, AdamState.zeros_like(p), 1e-3)
    # m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
    expected = np.array([1.0 - 1e-3 * 0.5 / (0.5 + 1e-8), -2.0 + 1e-3 * 4.0 / (4.0 + 1e-8), 3.0])
    np.testing.assert_allclose(p[0], expected, rtol=0, atol=1e-15)


def test_adam_matches_reference_recursion():
    rng = np.random.default_rng(0)
    p = [rng.standard_normal(4)]
    ref = p[0].copy()
    m = np.zeros(4)
    v = np.zeros(4)
    state = AdamState.zeros_like(p)
    for t in range(1, 6):
        g = rng.standard_normal(4)
        adam_step(p, [g], state, 1e-2)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 1e-2 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(p[0], ref, rtol=1e-12)
    assert state.step == 5


def test_adam_minimizes_quadratic():
    p = [np.array([5.0, -3.0])]
    state = AdamState.zeros_like(p)
    for _ in range(3000):
        adam_step(p, [2.0 * p[0]], state, 0.05)
    np.testing.assert_allclose(p[0], 0.0, atol=1e-3)


# ------------------------------------------------------------- training

def test_early_stopping_counts_patience():
    es = EarlyStopping(patience=2)
    assert not es.update(1, 1.0)
    assert not es.update(2, 0.5)
    assert not es.update(3, 0.6)
    assert es.update(4, 0.5)  # equal is not an improvement
    assert es.best_epoch == 2 and es.best == 0.5


def test_train_config_presets_and_validation():
    r = regressor_train_config()
    c = classifier_train_config()
    assert (r.batch_size, r.dropout_rate, r.patience, r.loss, r.learning_rate) == (2048, 0.0, 4, "mse", 1e-3)
    assert (c.batch_size, c.dropout_rate, c.patience, c.loss) == (256, 0.15, 10, "cross_entropy")
    with pytest.raises(InvalidParameterError):
        TrainConfig(0, 0.0, 1, "mse")
    with pytest.raises(InvalidParameterError):
        TrainConfig(8, 1.0, 1, "mse")
    with pytest.raises(InvalidParameterError):
        TrainConfig(8, 0.0, 1, "l1")


def _toy_classification(n=600, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 6))
    y = np.eye(3)[np.argmax(x[:, :3], axis=1)]
    return x, y


def test_training_learns_and_is_deterministic():
    x, y = _toy_classification()
    model = init_model(dense_stack(6, [16], 3, "tanh", "softmax"), 1)
    cfg = TrainConfig(32, 0.1, 5, "cross_entropy", learning_rate=1e-2, max_epochs=40, seed=3)
    a, ha = train(model, (x[:500], y[:500]), (x[500:], y[500:]), cfg)
    b, hb = train(model, (x[:500], y[:500]), (x[500:], y[500:]), cfg)
    assert to_bytes(a) == to_bytes(b)
    assert ha.val_loss == hb.val_loss
    acc = np.mean(np.argmax(forward(a, x[500:]), 1) == np.argmax(y[500:], 1))
    assert acc > 0.9
    # the original model is untouched
    assert np.array_equal(model.weights[0], init_model(dense_stack(6, [16], 3, "tanh", "softmax"), 1).weights[0])


def test_training_restores_best_epoch():
    x, y = _toy_classification()
    model = init_model(dense_stack(6, [16], 3, "tanh", "softmax"), 1)
    cfg = TrainConfig(32, 0.0, 3, "cross_entropy", learning_rate=5e-2, max_epochs=60, seed=0)
    best, hist = train(model, (x[:500], y[:500]), (x[500:], y[500:]), cfg)
    assert hist.stopped_epoch - hist.best_epoch == 3 or hist.stopped_epoch == 60
    val = loss(forward(best, x[500:]), y[500:], "cross_entropy")
    assert val == pytest.approx(min(hist.val_loss), rel=1e-9)
    assert best.meta["training"]["best_epoch"] == hist.best_epoch


def test_training_divergence_raises():
    x = np.random.default_rng(0).standard_normal((64, 4)) * 1e200
    y = np.ones((64, 3))
    model = init_model(dense_stack(4, [4], 3, "relu", "linear"), 0)
    with pytest.raises(TrainingDivergedError) as info:
        train(model, (x, y), (x, y), TrainConfig(16, 0.0, 2, "mse", max_epochs=3))
    assert info.value.history.stopped_epoch == 1


# ------------------------------------------------------------- model file

def test_model_file_round_trip(tmp_path):
    m = init_model(classifier_specs(), 5, task="classifier")
    m.meta["classes"] = ["LW", "SA", "SD"]
    path = tmp_path / "m.bin"
    save_model(m, path)
    back = load_model(path)
    assert back.task == "classifier" and back.meta == m.meta
    assert all(np.array_equal(a, b) for a, b in zip(m.parameters(), back.parameters()))
    assert to_bytes(back) == path.read_bytes()
    data = path.read_bytes()
    assert data[:8] == b"GAITMLP\x00"
    assert int.from_bytes(data[8:12], "little") == 1


def test_model_file_errors():
    data = to_bytes(init_model(dense_stack(4, [3], 2, "relu", "linear"), 0))
    with pytest.raises(ModelFileError):
        from_bytes(b"NOTAMODEL" + data[9:])
    with pytest.raises(ModelFileError):
        from_bytes(data[:-8])
    with pytest.raises(ModelFileError):
        from_bytes(data[:10])
    bad_version = data[:8] + (2).to_bytes(4, "little") + data[12:]
    with pytest.raises(ModelFileError):
        from_bytes(bad_version)


def test_model_text_export_is_exact():
    import json

    m = init_model(dense_stack(4, [3], 2, "tanh", "linear"), 0)
    doc = json.loads(to_text(m))
    assert np.array_equal(np.array(doc["parameters"][0]["weights"]), m.weights[0])
    assert doc["n_params"] == m.n_params


# ------------------------------------------------------------- prediction

def test_predict_regressor_decodes_outputs():
    m = init_model(dense_stack(2, [2], 3, "relu", "linear"), 0, task="regressor")
    # force outputs: x = 0, y = 1 (25 %), slope_z = 0.5
    for w in m.weights:
        w[:] = 0.0
    m.biases[-1][:] = [0.0, 1.0, 0.5]
    m.meta["label_normalization"] = {"slope": {"mean": 2.0, "std": 10.0}}
    phase, slope = predict_regressor(m, np.zeros(2))
    assert phase == pytest.approx(25.0) and slope == pytest.approx(7.0)
    phases, slopes = predict_regressor(m, np.zeros((4, 2)))
    assert phases.shape == (4,) and np.allclose(slopes, 7.0)


def test_predict_classifier_labels_and_task_checks():
    m = init_model(dense_stack(2, [2], 3, "tanh", "softmax"), 0, task="classifier")
    for w in m.weights:
        w[:] = 0.0
    m.biases[-1][:] = [0.0, 2.0, 1.0]
    mode, probs = predict_classifier(m, np.zeros(2))
    assert mode == "SA" and probs.sum() == pytest.approx(1.0)
    idx, _ = predict_classifier(m, np.zeros((3, 2)))
    assert idx.tolist() == [1, 1, 1]
    with pytest.raises(IncompatibleModelError):
        predict_regressor(m, np.zeros(2))
    reg = init_model(dense_stack(2, [2], 3, "relu", "linear"), 0, task="regressor")
    with pytest.raises(IncompatibleModelError):
        predict_classifier(reg, np.zeros(2))


@settings(max_examples=40, deadline=None)
@given(logits=st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_softmax_property(logits):
    p = softmax(np.array([logits]))
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= 0)
    assert np.argmax(p) == np.argmax(logits) or np.isclose(p.max(), p[0, np.argmax(logits)])
