"""Feed-forward regression network trained with per-sample weighted losses.

Parameters of all layers live in one flat float64 buffer; layer weights and
biases are views into it, so an Adam step is a single vectorised update and
the state serialises as one list.
"""

from __future__ import annotations

import json
import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data import Dataset

PROB_EPSILON = 1e-9
LOSS_IDS = ("mse", "dense", "prob", "bmc")


# --- losses -----------------------------------------------------------------

def dense_loss(pred, y, w) -> float:
    """Weighted mean squared error ``mean(w * (pred - y) ** 2)``."""
    pred, y, w = (np.asarray(a, dtype=float) for a in (pred, y, w))
    return float(np.mean(w * (pred - y) ** 2))


def dense_loss_grad(pred, y, w) -> np.ndarray:
    return 2.0 * w * (pred - y) / len(pred)


def prob_loss(pred, y, w, eps: float = PROB_EPSILON) -> float:
    """``mean((y - pred) ** 2 + sqrt((y - pred) ** 2 + eps) * w)``."""
    pred, y, w = (np.asarray(a, dtype=float) for a in (pred, y, w))
    sq = (y - pred) ** 2
    return float(np.mean(sq + np.sqrt(sq + eps) * w))


def prob_loss_grad(pred, y, w, eps: float = PROB_EPSILON) -> np.ndarray:
    r = pred - y
    return (2.0 * r + w * r / np.sqrt(r * r + eps)) / len(pred)


def _bmc_logits(pred, y, tau):
    return -((pred[:, None] - y[None, :]) ** 2) / tau


def _logsumexp(z):
    m = z.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))[:, 0]


def bmc_loss(pred, y, tau: float) -> float:
    """Batch softmax loss: each prediction should be closest to its own label.

    ``mean_i(-log softmax_j(-(pred_i - y_j) ** 2 / tau)[i])``, evaluated with
    log-sum-exp.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    pred, y = np.asarray(pred, dtype=float), np.asarray(y, dtype=float)
    z = _bmc_logits(pred, y, tau)
    return float(np.mean(_logsumexp(z) - np.diag(z)))


def bmc_loss_grad(pred, y, tau: float) -> np.ndarray:
    z = _bmc_logits(pred, y, tau)
    p = np.exp(z - _logsumexp(z)[:, None])
    diff = pred[:, None] - y[None, :]
    return (2.0 * (pred - y) - 2.0 * (p * diff).sum(axis=1)) / (tau * len(pred))


def loss_value_and_grad(loss_id: str, pred, y, w=None, tau: float = 0.02):
    """Loss value and its gradient with respect to ``pred``."""
    if loss_id == "mse":
        w = np.ones_like(pred)
        return dense_loss(pred, y, w), dense_loss_grad(pred, y, w)
    if loss_id == "dense":
        return dense_loss(pred, y, w), dense_loss_grad(pred, y, w)
    if loss_id == "prob":
        return prob_loss(pred, y, w), prob_loss_grad(pred, y, w)
    if loss_id == "bmc":
        return bmc_loss(pred, y, tau), bmc_loss_grad(pred, y, tau)
    raise ValueError(f"unknown loss {loss_id!r}; choose from {list(LOSS_IDS)}")


# --- network ----------------------------------------------------------------

def layer_shapes(n_inputs: int, hidden_layers: int, hidden_units: int):
    sizes = [n_inputs] + [hidden_units] * hidden_layers + [1]
    return [(a, b) for a, b in zip(sizes[:-1], sizes[1:])]


def n_parameters(shapes) -> int:
    return sum(a * b + b for a, b in shapes)


def unpack(flat: np.ndarray, shapes):
    """Views ``[(W, b), ...]`` into the flat parameter buffer."""
    layers, pos = [], 0
    for a, b in shapes:
        W = flat[pos : pos + a * b].reshape(a, b)
        pos += a * b
        layers.append((W, flat[pos : pos + b]))
        pos += b
    return layers


def init_params(shapes, rng) -> np.ndarray:
    """He-normal weights, zero biases."""
    flat = np.zeros(n_parameters(shapes))
    for (W, _), (fan_in, _) in zip(unpack(flat, shapes), shapes):
        W[...] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=W.shape)
    return flat


def forward(flat, shapes, X, keep=False):
    """Network output for ``X``; with ``keep`` also the layer inputs for backprop."""
    layers = unpack(flat, shapes)
    h = X
    acts = [h]
    for W, b in layers[:-1]:
        h = np.maximum(h @ W + b, 0.0)
        acts.append(h)
    W, b = layers[-1]
    out = (h @ W + b)[:, 0]
    return (out, acts) if keep else out


def backward(flat, shapes, acts, dout) -> np.ndarray:
    """Gradient of the loss w.r.t. the flat parameters given ``dL/d(out)``."""
    grad = np.zeros_like(flat)
    layers = unpack(flat, shapes)
    glayers = unpack(grad, shapes)
    delta = dout[:, None]
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        gW, gb = glayers[i]
        gW[...] = acts[i].T @ delta
        gb[...] = delta.sum(axis=0)
        if i:
            delta = (delta @ W.T) * (acts[i] > 0)
    return grad


def loss_and_grad(flat, shapes, X, y, loss_id="mse", w=None, tau=0.02):
    pred, acts = forward(flat, shapes, X, keep=True)
    value, dout = loss_value_and_grad(loss_id, pred, y, w, tau)
    return value, backward(flat, shapes, acts, dout)


class Adam:
    def __init__(self, size: int, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        lr_t = self.lr * math.sqrt(1 - self.beta2**self.t) / (1 - self.beta1**self.t)
        params -= lr_t * self.m / (np.sqrt(self.v) + self.eps * math.sqrt(1 - self.beta2**self.t))


class MLPRegressor(RegressorMixin, BaseEstimator):
    """ReLU network with a linear output unit, trained by Adam.

    Parameters
    ----------
    hidden_layers, hidden_units : int
    learning_rate : float
    batch_size : int
    max_epochs : int
    patience : int
        Epochs without validation improvement before training stops. The
        weights of the best epoch are restored.
    validation_fraction : float
        Share of the training rows held out for early stopping.
    loss : {"mse", "dense", "prob", "bmc"}
        ``dense`` and ``prob`` need ``sample_weight`` in :meth:`fit`.
    bmc_sigma : float
        Label noise scale of the BMC loss; ``tau = 2 * bmc_sigma ** 2``.
    random_state : int, Generator or None
    """

    def __init__(self, hidden_layers=2, hidden_units=128, learning_rate=1e-3, batch_size=16,
                 max_epochs=1000, patience=20, validation_fraction=0.1, loss="mse",
                 bmc_sigma=0.1, random_state=None):
        self.hidden_layers = hidden_layers
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.loss = loss
        self.bmc_sigma = bmc_sigma
        self.random_state = random_state

    def _check_config(self):
        for name in ("hidden_layers", "hidden_units", "batch_size", "max_epochs", "patience"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.loss not in LOSS_IDS:
            raise ValueError(f"unknown loss {self.loss!r}; choose from {list(LOSS_IDS)}")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")

    @property
    def tau(self) -> float:
        return 2.0 * self.bmc_sigma**2

    def fit(self, X, y, sample_weight=None):
        self._check_config()
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=float).reshape(-1)
        if len(y) != len(X):
            raise ValueError("X and y differ in length")
        if self.loss in ("dense", "prob"):
            if sample_weight is None:
                raise ValueError(f"loss {self.loss!r} needs relevance weights")
            w = np.asarray(sample_weight, dtype=float).reshape(-1)
            if len(w) != len(y):
                raise ValueError("sample_weight and y differ in length")
        else:
            w = np.ones(len(y))
        rng = np.random.default_rng(self.random_state)
        shapes = layer_shapes(X.shape[1], self.hidden_layers, self.hidden_units)
        params = init_params(shapes, rng)

        n_val = int(round(self.validation_fraction * len(y)))
        if n_val and len(y) - n_val >= 1:
            perm = rng.permutation(len(y))
            val, tr = perm[:n_val], perm[n_val:]
        else:
            val, tr = np.array([], dtype=int), np.arange(len(y))
        Xt, yt, wt = X[tr], y[tr], w[tr]
        Xv, yv, wv = X[val], y[val], w[val]

        opt = Adam(len(params), lr=self.learning_rate)
        best, best_epoch, best_val = params.copy(), 0, math.inf
        log, val_log = [], []
        bs = int(self.batch_size)
        for epoch in range(int(self.max_epochs)):
            order = rng.permutation(len(yt))
            total = 0.0
            for start in range(0, len(order), bs):
                b = order[start : start + bs]
                value, grad = loss_and_grad(params, shapes, Xt[b], yt[b], self.loss, wt[b], self.tau)
                if not (math.isfinite(value) and np.all(np.isfinite(grad))):
                    raise FloatingPointError(
                        f"non-finite loss {value!r} in epoch {epoch}, batch starting at {start} "
                        f"(loss={self.loss}, lr={self.learning_rate})"
                    )
                opt.step(params, grad)
                total += value * len(b)
            log.append(total / len(yt))
            if len(val):
                current = self._validation_loss(params, shapes, Xv, yv, wv)
            else:
                current = log[-1]
            val_log.append(current)
            if current < best_val:
                best_val, best_epoch = current, epoch
                best[...] = params
            elif epoch - best_epoch >= self.patience:
                break

        self.shapes_ = shapes
        self.params_ = best
        self.n_features_in_ = X.shape[1]
        self.training_log_ = log
        self.validation_log_ = val_log
        self.best_epoch_ = best_epoch
        self.best_validation_loss_ = best_val
        return self

    def _validation_loss(self, params, shapes, X, y, w):
        pred = forward(params, shapes, X)
        # the batch-relative BMC objective depends on batch composition; use MSE
        if self.loss == "bmc":
            return float(np.mean((pred - y) ** 2))
        value, _ = loss_value_and_grad(self.loss, pred, y, w, self.tau)
        return value

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1) if len(X) == self.n_features_in_ else X.reshape(-1, 1)
        if len(X) == 0:
            return np.zeros(0)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return forward(self.params_, self.shapes_, X)

    @property
    def layers_(self):
        return unpack(self.params_, self.shapes_)

    def to_dict(self) -> dict:
        check_is_fitted(self, "params_")
        return {
            "kind": "mlp",
            "activation": "relu",
            "config": self.get_params(),
            "input_dim": self.n_features_in_,
            "shapes": [list(s) for s in self.shapes_],
            "params": self.params_.tolist(),
            "loss_id": self.loss,
            "training_log": list(self.training_log_),
            "validation_log": list(self.validation_log_),
            "best_epoch": self.best_epoch_,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "MLPRegressor":
        config = dict(raw["config"])
        if not isinstance(config.get("random_state"), (int, type(None))):
            config["random_state"] = None
        model = cls(**config)
        model.shapes_ = [tuple(s) for s in raw["shapes"]]
        model.params_ = np.array(raw["params"], dtype=float)
        if len(model.params_) != n_parameters(model.shapes_):
            raise ValueError("parameter count does not match layer shapes")
        model.n_features_in_ = int(raw["input_dim"])
        model.training_log_ = list(raw.get("training_log", []))
        model.validation_log_ = list(raw.get("validation_log", []))
        model.best_epoch_ = raw.get("best_epoch", 0)
        return model

    @classmethod
    def from_json(cls, text: str) -> "MLPRegressor":
        return cls.from_dict(json.loads(text))


def random_mlp_targets(X, hidden_layers=2, hidden_units=16, rng=None) -> np.ndarray:
    """Outputs of an untrained network with the Gaussian initialisation above."""
    rng = np.random.default_rng(rng)
    X = np.asarray(X, dtype=float)
    shapes = layer_shapes(X.shape[1], hidden_layers, hidden_units)
    flat = init_params(shapes, rng)
    # He init leaves biases at zero; random biases make the map less symmetric
    for _, b in unpack(flat, shapes):
        b[...] = rng.normal(size=b.shape)
    return forward(flat, shapes, X)


# --- nearest-neighbour baseline ---------------------------------------------

def _split_blocks(d: Dataset, X):
    if isinstance(X, Dataset):
        X = X.X
    X = np.asarray(X, dtype=object if len(d.categorical_idx) else float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != d.n_features:
        raise ValueError(f"expected {d.n_features} feature columns, got {X.shape[1]}")
    return X[:, d.numeric_idx].astype(float), X[:, d.categorical_idx]


def knn_regress(train: Dataset, X, k: int = 5) -> np.ndarray:
    """Mean target of the ``k`` HEOM-nearest training rows.

    Equal distances are resolved in favour of the lower training index.
    """
    if not 1 <= k <= len(train):
        raise ValueError(f"k must lie in [1, {len(train)}]")
    num_q, cat_q = _split_blocks(train, X)
    num_t, cat_t = train.numeric_block(), train.categorical_block()
    ranges = num_t.max(axis=0) - num_t.min(axis=0) if len(num_t) else np.zeros(0)
    scale = np.where(ranges > 0, 1.0 / np.where(ranges > 0, ranges, 1.0), 0.0)
    out = np.empty(len(num_q))
    for i in range(len(num_q)):
        diff = (num_t - num_q[i]) * scale
        dist = np.einsum("ij,ij->i", diff, diff)
        if cat_t.shape[1]:
            dist = dist + (cat_t != cat_q[i]).sum(axis=1)
        nearest = np.argsort(dist, kind="stable")[:k]
        out[i] = train.y[nearest].mean()
    return out


class KNNRegressor(RegressorMixin, BaseEstimator):
    """kNN regressor over HEOM distances; fit takes a :class:`Dataset`."""

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, d: Dataset, y=None):
        if not isinstance(d, Dataset):
            X = np.asarray(d, dtype=float)
            d = Dataset.from_arrays(X, y)
        self.train_ = d
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "train_")
        return knn_regress(self.train_, X, min(self.k, len(self.train_)))
