"""Small feed-forward binary classifier trained with Adam on cross-entropy.

Everything is explicit numpy (forward pass, backpropagation, optimiser) so
the analytic gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import make_rng

__all__ = ["TrainConfig", "MlpClassifier", "train", "predict_proba", "save_weights"]

_TRAIN_STREAM = 40
# predicted probabilities stay strictly inside (0, 1) at this clamp
_LOGIT_CLAMP = 30.0
# validation smoothing weight and the rise over the best smoothed loss
# that counts toward the early-stop patience
_VAL_SMOOTHING = 0.2
_VAL_MARGIN = 0.1


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings; the defaults suit a few hundred training rows."""

    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    l2_penalty: float = 1e-4
    hidden: tuple = (64, 64)
    val_fraction: float = 0.2
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")
        if len(self.hidden) == 0 or any(h < 1 for h in self.hidden):
            raise ValueError("hidden must list positive layer widths")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(weights, biases, x):
    """Activations per layer plus final logits (no output squashing)."""
    acts = [x]
    h = x
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.tanh(h @ w + b)
        acts.append(h)
    logits = (h @ weights[-1] + biases[-1]).ravel()
    return acts, logits


def _bce_from_logits(logits, labels):
    # log(1 + e^z) - y z, computed without overflow
    return float(np.mean(np.logaddexp(0.0, logits) - labels * logits))


def _loss_and_grads(weights, biases, x, labels, l2_penalty):
    """Penalised cross-entropy and its gradients for one batch."""
    acts, logits = _forward(weights, biases, x)
    loss = _bce_from_logits(logits, labels)
    if l2_penalty:
        loss += 0.5 * l2_penalty * sum(float(np.sum(w * w)) for w in weights)
    n = x.shape[0]
    delta = ((_sigmoid(logits) - labels) / n)[:, None]
    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = acts[layer].T @ delta + l2_penalty * weights[layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (1.0 - acts[layer] ** 2)
    return loss, grads_w, grads_b


def _init_params(widths, rng):
    # biases start away from zero: a zero-bias tanh unit is an odd function
    # of its input, which has no first-order gradient toward features whose
    # classes differ in covariance rather than mean
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-0.5, 0.5, size=fan_out))
    return weights, biases


class MlpClassifier:
    """Trained tanh network with the feature standardisation baked in."""

    def __init__(self, weights, biases, feature_mean, feature_scale):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.feature_mean = np.asarray(feature_mean, dtype=np.float64)
        self.feature_scale = np.asarray(feature_scale, dtype=np.float64)
        self.layer_widths = [self.weights[0].shape[0]] + [
            w.shape[1] for w in self.weights
        ]
        # affine logit recalibration (slope, intercept); identity until fitted
        self.calibration: tuple = (1.0, 0.0)
        self.train_loss_curve: list = []
        self.epochs_run: int = 0

    @property
    def n_features(self) -> int:
        return self.layer_widths[0]

    def predict_proba(self, features) -> np.ndarray:
        return predict_proba(self, features)


def predict_proba(model: MlpClassifier, features) -> np.ndarray:
    """Predicted probability of class 1 per row, strictly inside (0, 1)."""
    f = np.ascontiguousarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    if f.ndim != 2 or f.shape[1] != model.n_features:
        raise ValueError(
            f"features must have {model.n_features} columns, got shape {f.shape}"
        )
    standardized = (f - model.feature_mean) / model.feature_scale
    _, logits = _forward(model.weights, model.biases, standardized)
    slope, intercept = model.calibration
    logits = slope * logits + intercept
    return _sigmoid(np.clip(logits, -_LOGIT_CLAMP, _LOGIT_CLAMP))


def _fit_platt(logits, labels):
    """Affine logit rescale (slope, intercept) minimising held-out cross-entropy.

    A network that memorises its training rows reports near-certain
    probabilities that the held-out data does not support; downstream
    likelihood-ratio averages are wrecked by a single overconfident
    mistake, so the raw logits are shrunk to whatever confidence the
    validation rows actually justify.  Newton iterations on the two
    parameters; a non-positive slope (validation carries no usable
    signal) degrades to a constant predictor at the base rate.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n_pos = float(y.sum())
    n_neg = float(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        return 1.0, 0.0
    slope, intercept = 1.0, 0.0
    loss = _bce_from_logits(slope * z + intercept, y)
    for _ in range(50):
        u = np.clip(slope * z + intercept, -_LOGIT_CLAMP, _LOGIT_CLAMP)
        p = _sigmoid(u)
        resid = p - y
        w = p * (1.0 - p)
        g = np.array([np.dot(resid, z), resid.sum()])
        h_aa = np.dot(w, z * z) + 1e-9
        h_ab = np.dot(w, z)
        h_bb = w.sum() + 1e-9
        det = h_aa * h_bb - h_ab * h_ab
        if det <= 0 or not np.isfinite(det):
            break
        step_a = (h_bb * g[0] - h_ab * g[1]) / det
        step_b = (h_aa * g[1] - h_ab * g[0]) / det
        damp = 1.0
        for _ in range(20):
            cand_a = np.clip(slope - damp * step_a, -50.0, 50.0)
            cand_b = np.clip(intercept - damp * step_b, -50.0, 50.0)
            cand_loss = _bce_from_logits(cand_a * z + cand_b, y)
            if cand_loss <= loss:
                break
            damp *= 0.5
        if cand_loss > loss:
            break
        converged = cand_loss > loss - 1e-10
        slope, intercept, loss = cand_a, cand_b, cand_loss
        if converged:
            break
    if slope <= 0.0:
        # no evidence the ranking generalises: flat output at the base rate
        return 0.0, float(np.log(n_pos / n_neg))
    return float(slope), float(intercept)


def _val_indices(n_pos, n_neg, fraction, rng):
    """Per-class validation pick so both classes appear in the held-out set."""
    picks = []
    offset = 0
    for size in (n_pos, n_neg):
        n_val = int(fraction * size)
        perm = rng.permutation(size) + offset
        picks.append((perm[n_val:], perm[:n_val]))
        offset += size
    fit_idx = np.concatenate([picks[0][0], picks[1][0]])
    val_idx = np.concatenate([picks[0][1], picks[1][1]])
    return fit_idx, val_idx


def train(features_pos, features_neg, cfg: TrainConfig) -> MlpClassifier:
    """Fit a classifier separating two row sets (labels 1 and 0).

    Features are standardised with the pooled training mean and scale.
    When a validation fraction is configured, the held-out cross-entropy
    is tracked through an exponential moving average (the raw per-epoch
    value on a small split is too noisy to act on); training stops once
    the average has sat cfg.patience consecutive epochs more than a small
    margin above its best, and the weights from the best-average epoch
    are restored.  The predicted probabilities are then recalibrated on
    the validation rows (affine rescale of the logits) so the reported
    confidence matches held-out reality rather than memorised training
    rows.
    """
    xp = np.ascontiguousarray(features_pos, dtype=np.float64)
    xn = np.ascontiguousarray(features_neg, dtype=np.float64)
    if xp.ndim == 1:
        xp = xp[:, None]
    if xn.ndim == 1:
        xn = xn[:, None]
    if xp.ndim != 2 or xn.ndim != 2:
        raise ValueError("feature arrays must be two-dimensional")
    if xp.shape[0] == 0 or xn.shape[0] == 0:
        raise ValueError("both classes need at least one row")
    if xp.shape[1] != xn.shape[1]:
        raise ValueError(
            f"feature width mismatch: {xp.shape[1]} vs {xn.shape[1]}"
        )
    x = np.vstack((xp, xn))
    labels = np.concatenate((np.ones(xp.shape[0]), np.zeros(xn.shape[0])))
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    x = (x - mean) / scale

    rng = make_rng(cfg.seed, (_TRAIN_STREAM,))
    fit_idx, val_idx = _val_indices(
        xp.shape[0], xn.shape[0], cfg.val_fraction, rng
    )
    x_fit, y_fit = x[fit_idx], labels[fit_idx]
    x_val, y_val = x[val_idx], labels[val_idx]
    has_val = val_idx.shape[0] > 0

    widths = [x.shape[1], *cfg.hidden, 1]
    weights, biases = _init_params(widths, rng)
    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    best_val = np.inf
    best_weights = [w.copy() for w in weights]
    best_biases = [b.copy() for b in biases]
    val_ema = None
    stall = 0
    step = 0
    loss_curve = []
    epochs_run = 0

    for _ in range(cfg.epochs):
        epochs_run += 1
        order = rng.permutation(x_fit.shape[0])
        epoch_losses = []
        for start in range(0, x_fit.shape[0], cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, g_w, g_b = _loss_and_grads(
                weights, biases, x_fit[batch], y_fit[batch], cfg.l2_penalty
            )
            epoch_losses.append(loss)
            step += 1
            lr_t = cfg.learning_rate * np.sqrt(1.0 - beta2**step) / (
                1.0 - beta1**step
            )
            for layer in range(len(weights)):
                m_w[layer] = beta1 * m_w[layer] + (1 - beta1) * g_w[layer]
                v_w[layer] = beta2 * v_w[layer] + (1 - beta2) * g_w[layer] ** 2
                weights[layer] -= lr_t * m_w[layer] / (np.sqrt(v_w[layer]) + eps)
                m_b[layer] = beta1 * m_b[layer] + (1 - beta1) * g_b[layer]
                v_b[layer] = beta2 * v_b[layer] + (1 - beta2) * g_b[layer] ** 2
                biases[layer] -= lr_t * m_b[layer] / (np.sqrt(v_b[layer]) + eps)
        loss_curve.append(float(np.mean(epoch_losses)))
        if has_val:
            _, val_logits = _forward(weights, biases, x_val)
            # judge the epoch by the best affine rescale of its logits:
            # raw held-out cross-entropy rises as soon as confidence
            # outpaces accuracy, which would halt training while the
            # ranking is still improving
            cal_a, cal_b = _fit_platt(val_logits, y_val)
            val_loss = _bce_from_logits(cal_a * val_logits + cal_b, y_val)
            val_ema = (
                val_loss if val_ema is None
                else _VAL_SMOOTHING * val_loss
                + (1.0 - _VAL_SMOOTHING) * val_ema
            )
            if val_ema < best_val:
                best_val = val_ema
                best_weights = [w.copy() for w in weights]
                best_biases = [b.copy() for b in biases]
            if val_ema > best_val + _VAL_MARGIN:
                stall += 1
            else:
                stall = 0
            if stall >= cfg.patience:
                break

    if has_val:
        weights, biases = best_weights, best_biases
    model = MlpClassifier(weights, biases, mean, scale)
    if has_val:
        _, val_logits = _forward(weights, biases, x_val)
        model.calibration = _fit_platt(val_logits, y_val)
    model.train_loss_curve = loss_curve
    model.epochs_run = epochs_run
    return model


def save_weights(model: MlpClassifier, path) -> None:
    """Dump the trained parameters as JSON (debugging aid, not a stable format)."""
    payload = {
        "layer_widths": list(model.layer_widths),
        "feature_mean": model.feature_mean.tolist(),
        "feature_scale": model.feature_scale.tolist(),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "calibration": list(model.calibration),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
