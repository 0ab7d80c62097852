"""Tests for the numpy MLP classifier, including finite-difference gradients."""

import json

import numpy as np
import pytest

from nncit.data import make_rng
from nncit.mlp import (
    MlpClassifier,
    TrainConfig,
    _bce_from_logits,
    _fit_platt,
    _forward,
    _init_params,
    _loss_and_grads,
    _sigmoid,
    predict_proba,
    save_weights,
    train,
)


def _tiny_problem(rng, n=80, gap=4.0, spread=0.5):
    """Two Gaussian blobs separated along the first coordinate."""
    pos = spread * rng.normal(size=(n, 3)) + np.array([gap, 0.0, 0.0])
    neg = spread * rng.normal(size=(n, 3))
    return pos, neg


class TestGradients:
    def _finite_difference(self, weights, biases, x, labels, l2):
        """Central-difference gradient of the penalised loss, entry by entry."""

        def loss_at(ws, bs):
            return _loss_and_grads(ws, bs, x, labels, l2)[0]

        step = 1e-5
        num_w = [np.zeros_like(w) for w in weights]
        num_b = [np.zeros_like(b) for b in biases]
        for layer, w in enumerate(weights):
            for idx in np.ndindex(w.shape):
                w_plus = [a.copy() for a in weights]
                w_minus = [a.copy() for a in weights]
                w_plus[layer][idx] += step
                w_minus[layer][idx] -= step
                num_w[layer][idx] = (
                    loss_at(w_plus, biases) - loss_at(w_minus, biases)
                ) / (2 * step)
        for layer, b in enumerate(biases):
            for idx in np.ndindex(b.shape):
                b_plus = [a.copy() for a in biases]
                b_minus = [a.copy() for a in biases]
                b_plus[layer][idx] += step
                b_minus[layer][idx] -= step
                num_b[layer][idx] = (
                    loss_at(weights, b_plus) - loss_at(weights, b_minus)
                ) / (2 * step)
        return num_w, num_b

    @pytest.mark.parametrize("l2", [0.0, 0.01])
    def test_backprop_matches_finite_differences(self, l2):
        rng = np.random.default_rng(7)
        weights, biases = _init_params([3, 5, 4, 1], rng)
        x = rng.normal(size=(6, 3))
        labels = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 0.0])
        _, g_w, g_b = _loss_and_grads(weights, biases, x, labels, l2)
        num_w, num_b = self._finite_difference(weights, biases, x, labels, l2)
        for analytic, numeric in zip(g_w + g_b, num_w + num_b):
            assert np.max(np.abs(analytic - numeric)) <= 1e-4

    def test_gradient_zero_at_flat_model(self):
        # zero last layer -> logits identically 0 on balanced labels:
        # the output-layer bias gradient is mean(sigmoid(0) - y) = 0
        weights = [np.zeros((2, 3)), np.zeros((3, 1))]
        biases = [np.zeros(3), np.zeros(1)]
        x = np.array([[1.0, -1.0], [0.5, 2.0]])
        labels = np.array([1.0, 0.0])
        _, g_w, g_b = _loss_and_grads(weights, biases, x, labels, 0.0)
        assert abs(g_b[-1][0]) < 1e-15


class TestForward:
    def test_zero_parameters_give_half_probability(self):
        model = MlpClassifier(
            weights=[np.zeros((2, 3)), np.zeros((3, 1))],
            biases=[np.zeros(3), np.zeros(1)],
            feature_mean=np.zeros(2),
            feature_scale=np.ones(2),
        )
        proba = predict_proba(model, np.array([[5.0, -3.0], [0.0, 0.0]]))
        np.testing.assert_allclose(proba, 0.5)

    def test_probabilities_strictly_inside_unit_interval(self):
        # enormous final weight saturates the logits; the clamp keeps the
        # sigmoid away from exact 0 and 1
        model = MlpClassifier(
            weights=[np.ones((1, 2)), np.full((2, 1), 1e6)],
            biases=[np.zeros(2), np.zeros(1)],
            feature_mean=np.zeros(1),
            feature_scale=np.ones(1),
        )
        proba = predict_proba(model, np.array([[10.0], [-10.0]]))
        assert np.all(proba > 0.0) and np.all(proba < 1.0)

    def test_one_dimensional_input_treated_as_single_column(self):
        model = MlpClassifier(
            weights=[np.ones((1, 2)), np.ones((2, 1))],
            biases=[np.zeros(2), np.zeros(1)],
            feature_mean=np.zeros(1),
            feature_scale=np.ones(1),
        )
        flat = predict_proba(model, np.array([0.3, -0.2]))
        column = predict_proba(model, np.array([[0.3], [-0.2]]))
        np.testing.assert_array_equal(flat, column)

    def test_feature_width_mismatch_rejected(self):
        model = MlpClassifier(
            weights=[np.ones((2, 2)), np.ones((2, 1))],
            biases=[np.zeros(2), np.zeros(1)],
            feature_mean=np.zeros(2),
            feature_scale=np.ones(2),
        )
        with pytest.raises(ValueError, match="2 columns"):
            predict_proba(model, np.ones((4, 3)))

    def test_sigmoid_extremes_finite(self):
        values = _sigmoid(np.array([-800.0, -30.0, 0.0, 30.0, 800.0]))
        assert np.all(np.isfinite(values))
        assert values[0] >= 0.0 and values[-1] <= 1.0
        assert values[2] == 0.5

    def test_bce_overflow_safe(self):
        loss = _bce_from_logits(np.array([1000.0]), np.array([0.0]))
        assert np.isfinite(loss) and loss == pytest.approx(1000.0)


class TestTrain:
    def test_separable_problem_learned(self):
        rng = np.random.default_rng(0)
        pos, neg = _tiny_problem(rng)
        model = train(pos, neg, TrainConfig(epochs=60, seed=1))
        proba = np.concatenate(
            [predict_proba(model, pos), predict_proba(model, neg)]
        )
        labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
        accuracy = np.mean((proba > 0.5) == labels)
        assert accuracy >= 0.99

    def test_nonlinear_boundary_learned(self):
        # class is the XOR quadrant sign: linearly inseparable
        rng = np.random.default_rng(3)
        x = rng.uniform(-2, 2, size=(400, 2))
        labels = (x[:, 0] * x[:, 1] > 0).astype(float)
        model = train(x[labels == 1], x[labels == 0],
                      TrainConfig(epochs=150, seed=4))
        proba = predict_proba(model, x)
        accuracy = np.mean((proba > 0.5) == labels)
        assert accuracy >= 0.95

    def test_identical_distributions_predict_near_half(self):
        rng = np.random.default_rng(5)
        pos = rng.normal(size=(150, 4))
        neg = rng.normal(size=(150, 4))
        model = train(pos, neg, TrainConfig(epochs=80, seed=6))
        proba = predict_proba(model, rng.normal(size=(400, 4)))
        assert abs(float(proba.mean()) - 0.5) < 0.05

    def test_training_reduces_loss(self):
        rng = np.random.default_rng(8)
        pos, neg = _tiny_problem(rng)
        model = train(pos, neg, TrainConfig(epochs=30, seed=9,
                                            val_fraction=0.0))
        assert model.train_loss_curve[-1] < model.train_loss_curve[0]
        assert model.epochs_run == 30

    def test_same_seed_reproducible(self):
        rng = np.random.default_rng(10)
        pos, neg = _tiny_problem(rng, n=50)
        grid = np.linspace(-2, 6, 30)[:, None] * np.ones((1, 3))
        cfg = TrainConfig(epochs=25, seed=11)
        first = predict_proba(train(pos, neg, cfg), grid)
        second = predict_proba(train(pos, neg, cfg), grid)
        np.testing.assert_array_equal(first, second)

    def test_different_seed_differs(self):
        rng = np.random.default_rng(12)
        pos, neg = _tiny_problem(rng, n=50, gap=1.0)
        grid = np.linspace(-2, 3, 30)[:, None] * np.ones((1, 3))
        a = predict_proba(train(pos, neg, TrainConfig(epochs=25, seed=1)), grid)
        b = predict_proba(train(pos, neg, TrainConfig(epochs=25, seed=2)), grid)
        assert not np.array_equal(a, b)

    def test_constant_feature_column_handled(self):
        rng = np.random.default_rng(13)
        pos, neg = _tiny_problem(rng, n=40)
        pos[:, 2] = 7.0
        neg[:, 2] = 7.0
        model = train(pos, neg, TrainConfig(epochs=20, seed=14))
        assert np.all(np.isfinite(predict_proba(model, pos)))

    def test_empty_class_rejected(self):
        with pytest.raises(ValueError, match="at least one row"):
            train(np.empty((0, 2)), np.ones((5, 2)), TrainConfig())

    def test_feature_width_mismatch_rejected(self):
        with pytest.raises(ValueError, match="width mismatch"):
            train(np.ones((5, 2)), np.ones((5, 3)), TrainConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(val_fraction=1.0)
        with pytest.raises(ValueError):
            TrainConfig(hidden=())
        with pytest.raises(ValueError):
            TrainConfig(patience=0)


class TestCalibration:
    def test_no_validation_leaves_identity_calibration(self):
        rng = np.random.default_rng(20)
        pos, neg = _tiny_problem(rng, n=40)
        model = train(pos, neg, TrainConfig(epochs=10, seed=21,
                                            val_fraction=0.0))
        assert model.calibration == (1.0, 0.0)

    def test_platt_single_class_is_identity(self):
        assert _fit_platt(np.array([1.0, 2.0]), np.array([1.0, 1.0])) == (1.0, 0.0)

    def test_platt_never_worsens_cross_entropy(self):
        rng = np.random.default_rng(22)
        for trial in range(5):
            z = rng.normal(scale=3.0, size=120)
            y = (rng.uniform(size=120) < _sigmoid(0.4 * z)).astype(float)
            a, b = _fit_platt(z, y)
            assert _bce_from_logits(a * z + b, y) <= _bce_from_logits(z, y) + 1e-9

    def test_platt_shrinks_overconfident_logits(self):
        # logits scaled 10x beyond what the labels support: the fitted
        # slope must undo most of that inflation
        rng = np.random.default_rng(23)
        z_true = rng.normal(size=300)
        y = (rng.uniform(size=300) < _sigmoid(z_true)).astype(float)
        a, _ = _fit_platt(10.0 * z_true, y)
        assert a < 0.3

    def test_platt_uninformative_degrades_to_base_rate(self):
        # labels independent of the logits: slope collapses to zero and the
        # intercept reproduces the class ratio
        rng = np.random.default_rng(24)
        z = rng.normal(size=500)
        y = np.zeros(500)
        y[:100] = 1.0  # base rate 0.2, unrelated to z
        rng.shuffle(y)
        a, b = _fit_platt(z, y)
        if a == 0.0:
            assert b == pytest.approx(np.log(100 / 400))
        else:
            assert abs(a) < 0.2
            assert abs(_sigmoid(np.array([b]))[0] - 0.2) < 0.1

    def test_trained_model_not_overconfident_on_noise(self):
        # with indistinguishable classes the calibrated output should stay
        # close to 1/2 for every query, not only on average
        rng = np.random.default_rng(25)
        pos = rng.normal(size=(120, 3))
        neg = rng.normal(size=(120, 3))
        model = train(pos, neg, TrainConfig(epochs=60, seed=26))
        proba = predict_proba(model, rng.normal(size=(200, 3)))
        assert np.all(np.abs(proba - 0.5) < 0.35)


class TestSaveWeights:
    def test_round_trip_json(self, tmp_path):
        rng = np.random.default_rng(30)
        pos, neg = _tiny_problem(rng, n=30)
        model = train(pos, neg, TrainConfig(epochs=5, seed=31))
        path = tmp_path / "weights.json"
        save_weights(model, path)
        payload = json.loads(path.read_text())
        assert payload["layer_widths"] == model.layer_widths
        assert len(payload["weights"]) == len(model.weights)
        np.testing.assert_allclose(payload["calibration"], model.calibration)
        restored = MlpClassifier(
            [np.array(w) for w in payload["weights"]],
            [np.array(b) for b in payload["biases"]],
            np.array(payload["feature_mean"]),
            np.array(payload["feature_scale"]),
        )
        restored.calibration = tuple(payload["calibration"])
        probe = rng.normal(size=(10, 3))
        np.testing.assert_allclose(
            predict_proba(restored, probe), predict_proba(model, probe)
        )
