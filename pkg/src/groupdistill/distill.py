"""Distilling discriminability scores into a small feed-forward regressor.

The regressor maps an element's raw input vector to an estimate of its
(0, 1) discriminability score, so scores can be predicted for elements whose
class is unknown. It is a plain fully connected network — configurable hidden
layers, relu or tanh hidden activations, a logistic output unit — trained by
minibatch gradient descent on the mean-squared-error loss

    loss = sum((prediction - target)^2) / (2 * n)

All randomness (weight initialisation, minibatch shuffling) comes from one
seeded generator, so training is fully reproducible.
"""

from __future__ import annotations

import io
import struct

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .exceptions import DivergenceError, FormatError, ValidationError
from .validation import as_float_matrix, as_float_vector, check_same_length

MODEL_MAGIC = b"DDLM"

ACTIVATIONS = ("relu", "tanh")
_ACTIVATION_CODES = {name: i for i, name in enumerate(ACTIVATIONS)}

#: Predictions are clamped to [_CLAMP, 1 - _CLAMP], matching score records.
_CLAMP = 1e-15


def _hidden_forward(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _hidden_derivative(z: np.ndarray, a: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (z > 0.0).astype(float)
    return 1.0 - a * a


def _logistic(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def mse_loss(predictions, targets) -> float:
    """Half mean squared error: ``sum((p - t)^2) / (2 * n)``."""
    p = as_float_vector(predictions, "predictions", require_finite=False)
    t = as_float_vector(targets, "targets", require_finite=False)
    check_same_length(p, t, "predictions", "targets")
    if p.size == 0:
        raise ValidationError("loss of an empty batch is undefined")
    diff = p - t
    return float(np.dot(diff, diff) / (2.0 * p.size))


class DiscriminabilityRegressor(BaseEstimator, RegressorMixin):
    """Feed-forward regressor for (0, 1) targets.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Width of each hidden layer; must contain at least one positive entry.
    activation : {"relu", "tanh"}
        Hidden-layer nonlinearity. The output unit is always logistic.
    learning_rate, batch_size, epochs : optimisation hyperparameters for
        plain minibatch gradient descent.
    seed : int
        Seed for weight initialisation and minibatch shuffling.
    init_scale : float
        Weights start uniform in ``(-a, a)`` with
        ``a = init_scale / sqrt(fan_in)``; biases start at zero.

    Fitted attributes: ``layer_sizes_``, ``weights_``, ``biases_``,
    ``loss_curve_`` (per-epoch mean loss), ``final_loss_``, ``n_steps_``.
    """

    def __init__(self, hidden_layer_sizes=(32, 16), activation="relu",
                 learning_rate=0.05, batch_size=32, epochs=50, seed=0,
                 init_scale=1.0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.init_scale = init_scale

    # -- configuration --------------------------------------------------------

    def _validated_config(self) -> tuple[tuple[int, ...], str]:
        hidden = tuple(int(h) for h in np.atleast_1d(self.hidden_layer_sizes))
        if len(hidden) == 0 or any(h <= 0 for h in hidden):
            raise ValidationError(
                "hidden_layer_sizes must contain at least one positive width, "
                f"got {self.hidden_layer_sizes!r}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValidationError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if int(self.batch_size) < 1:
            raise ValidationError("batch_size must be >= 1")
        if int(self.epochs) < 1:
            raise ValidationError("epochs must be >= 1")
        if not self.init_scale > 0:
            raise ValidationError("init_scale must be positive")
        return hidden, self.activation

    # -- parameters ------------------------------------------------------------

    def initialize(self, n_features: int) -> "DiscriminabilityRegressor":
        """Set random initial weights for ``n_features`` inputs without training."""
        hidden, _ = self._validated_config()
        if n_features < 1:
            raise ValidationError("n_features must be >= 1")
        rng = np.random.default_rng(self.seed)
        sizes = (int(n_features),) + hidden + (1,)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            a = self.init_scale / np.sqrt(fan_in)
            weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        self.layer_sizes_ = sizes
        self.weights_ = weights
        self.biases_ = biases
        self.loss_curve_ = []
        self.final_loss_ = None
        self.n_steps_ = 0
        self._rng = rng
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError(
                "this DiscriminabilityRegressor instance is not fitted yet"
            )

    # -- forward / backward ----------------------------------------------------

    def _forward(self, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Return (activations a_0..a_L, pre-activations z_1..z_L), unclamped."""
        activations = [X]
        preacts = []
        last = len(self.weights_) - 1
        for l, (w, b) in enumerate(zip(self.weights_, self.biases_)):
            z = activations[-1] @ w + b
            preacts.append(z)
            if l == last:
                activations.append(_logistic(z))
            else:
                activations.append(_hidden_forward(z, self.activation))
        return activations, preacts

    def _loss_and_gradients(self, X: np.ndarray, y: np.ndarray):
        """Loss plus exact gradients of the loss w.r.t. every weight and bias."""
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            activations, preacts = self._forward(X)
            p = activations[-1][:, 0]
            n = X.shape[0]
            diff = p - y
            loss = float(np.dot(diff, diff) / (2.0 * n))
            # Output unit: d loss / d z_L = (p - y)/n * p * (1 - p)
            delta = ((diff / n) * p * (1.0 - p))[:, None]
            grads_w = [None] * len(self.weights_)
            grads_b = [None] * len(self.biases_)
            for l in range(len(self.weights_) - 1, -1, -1):
                grads_w[l] = activations[l].T @ delta
                grads_b[l] = delta.sum(axis=0)
                if l > 0:
                    delta = (delta @ self.weights_[l].T) * _hidden_derivative(
                        preacts[l - 1], activations[l], self.activation
                    )
        return loss, grads_w, grads_b

    # -- estimator API -----------------------------------------------------------

    def fit(self, X, y) -> "DiscriminabilityRegressor":
        X = as_float_matrix(X, "X")
        y = as_float_vector(y, "y")
        check_same_length(X, y, "X", "y")
        if X.shape[0] == 0:
            raise ValidationError("cannot fit on an empty collection")
        self.initialize(X.shape[1])
        rng = self._rng
        batch = int(self.batch_size)
        lr = float(self.learning_rate)
        n = X.shape[0]
        step = 0
        for _ in range(int(self.epochs)):
            order = rng.permutation(n)
            epoch_sq = 0.0
            for start in range(0, n, batch):
                rows = order[start:start + batch]
                step += 1
                loss, grads_w, grads_b = self._loss_and_gradients(X[rows], y[rows])
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"training diverged: non-finite loss at step {step}",
                        step=step,
                    )
                epoch_sq += loss * 2.0 * rows.size
                for l in range(len(self.weights_)):
                    self.weights_[l] -= lr * grads_w[l]
                    self.biases_[l] -= lr * grads_b[l]
            self.loss_curve_.append(epoch_sq / (2.0 * n))
        self.final_loss_ = self.loss_curve_[-1]
        self.n_steps_ = step
        return self

    def predict(self, X):
        """Predicted scores, clamped strictly inside (0, 1).

        A single vector yields a float; a matrix yields a 1-D array.
        """
        self._check_fitted()
        arr = np.asarray(X, dtype=float)
        single = arr.ndim == 1
        X2 = as_float_matrix(arr[None, :] if single else arr, "X")
        if X2.shape[1] != self.layer_sizes_[0]:
            raise ValidationError(
                f"input has dimension {X2.shape[1]}, model expects "
                f"{self.layer_sizes_[0]}"
            )
        activations, _ = self._forward(X2)
        out = np.clip(activations[-1][:, 0], _CLAMP, 1.0 - _CLAMP)
        return float(out[0]) if single else out


def gradient_check(model: DiscriminabilityRegressor, X, y,
                   step: float = 1e-5) -> float:
    """Worst relative disagreement between analytic and numerical gradients.

    Every parameter is perturbed by ``±step`` and the central finite
    difference of the loss is compared against the backpropagated gradient.
    The relative error uses a small denominator floor so that two near-zero
    gradients compare as equal rather than as noise-over-noise.
    """
    model._check_fitted()
    X = as_float_matrix(X, "X")
    y = as_float_vector(y, "y")
    check_same_length(X, y, "X", "y")
    if X.shape[0] == 0:
        raise ValidationError("gradient check needs at least one sample")
    if not step > 0:
        raise ValidationError("step must be positive")

    _, grads_w, grads_b = model._loss_and_gradients(X, y)

    def loss_at() -> float:
        acts, _ = model._forward(X)
        p = acts[-1][:, 0]
        return mse_loss(p, y)

    worst = 0.0
    for params, grads in ((model.weights_, grads_w), (model.biases_, grads_b)):
        for arr, grad in zip(params, grads):
            flat = arr.reshape(-1)
            gflat = np.asarray(grad).reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                plus = loss_at()
                flat[j] = orig - step
                minus = loss_at()
                flat[j] = orig
                numeric = (plus - minus) / (2.0 * step)
                analytic = gflat[j]
                denom = max(abs(analytic), abs(numeric), 1e-6)
                worst = max(worst, abs(analytic - numeric) / denom)
    return worst


# -- model serialisation ---------------------------------------------------------
#
# Layout (all little-endian):
#   magic "DDLM" | u32 layer-count | u32 * layer sizes | u32 activation id |
#   f64 parameters: per layer, the weight matrix row-major, then the biases.
#
# The file captures architecture and parameters only — everything needed to
# predict. Training hyperparameters are not stored; a loaded model carries the
# constructor defaults for them.


def save_model(model: DiscriminabilityRegressor, path) -> None:
    """Write a fitted model's architecture and parameters to ``path``."""
    model._check_fitted()
    buf = io.BytesIO()
    sizes = model.layer_sizes_
    buf.write(MODEL_MAGIC)
    buf.write(struct.pack("<I", len(sizes)))
    buf.write(struct.pack(f"<{len(sizes)}I", *sizes))
    buf.write(struct.pack("<I", _ACTIVATION_CODES[model.activation]))
    for w, b in zip(model.weights_, model.biases_):
        buf.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_model(path) -> DiscriminabilityRegressor:
    """Read a model written by :func:`save_model`; bit-exact round-trip."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:4] != MODEL_MAGIC:
        raise FormatError(
            f"{path}: not a model file (bad magic {raw[:4]!r})"
        )
    offset = 4
    (n_sizes,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if n_sizes < 2:
        raise FormatError(f"{path}: needs >= 2 layer sizes, got {n_sizes}")
    if len(raw) < offset + 4 * n_sizes + 4:
        raise FormatError(f"{path}: truncated header")
    sizes = struct.unpack_from(f"<{n_sizes}I", raw, offset)
    offset += 4 * n_sizes
    (act_code,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if any(s < 1 for s in sizes):
        raise FormatError(f"{path}: layer sizes must be positive, got {sizes}")
    if sizes[-1] != 1:
        raise FormatError(
            f"{path}: output layer must have size 1, got {sizes[-1]}"
        )
    if act_code not in range(len(ACTIVATIONS)):
        raise FormatError(f"{path}: unknown activation id {act_code}")
    n_params = sum(
        fan_in * fan_out + fan_out for fan_in, fan_out in zip(sizes[:-1], sizes[1:])
    )
    expected = offset + 8 * n_params
    if len(raw) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes, got {len(raw)}"
        )
    params = np.frombuffer(raw, dtype="<f8", offset=offset)
    model = DiscriminabilityRegressor(
        hidden_layer_sizes=tuple(sizes[1:-1]),
        activation=ACTIVATIONS[act_code],
    )
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(
            params[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out).copy()
        )
        pos += fan_in * fan_out
        biases.append(params[pos:pos + fan_out].copy())
        pos += fan_out
    model.layer_sizes_ = tuple(int(s) for s in sizes)
    model.weights_ = weights
    model.biases_ = biases
    model.loss_curve_ = []
    model.final_loss_ = None
    model.n_steps_ = 0
    return model
