"""Two-hidden-layer ReLU network with a linear scalar head.

Trained as a regressor on 0/1 labels with mean squared error and plain
mini-batch SGD.  The width of both hidden layers is fixed at 32.  All
randomness (weight init, epoch shuffling) comes from named substreams of
the fit seed, so training is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..seeding import substream

HIDDEN_WIDTH = 32


@dataclass(frozen=True)
class MlpParams:
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32


@dataclass
class MlpModel:
    """Weights of the network: x @ W1 + b1 -> relu -> W2/b2 -> relu -> w3/b3."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: float

    @property
    def n_features(self) -> int:
        return self.W1.shape[0]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _init_model(p: int, seed: int) -> MlpModel:
    rng = substream(seed, "init")
    h = HIDDEN_WIDTH
    return MlpModel(
        W1=_glorot(rng, p, h, (p, h)),
        b1=np.zeros(h),
        W2=_glorot(rng, h, h, (h, h)),
        b2=np.zeros(h),
        w3=_glorot(rng, h, 1, h),
        b3=0.0,
    )


def _forward(model: MlpModel, X: np.ndarray):
    z1 = X @ model.W1 + model.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ model.W2 + model.b2
    a2 = np.maximum(z2, 0.0)
    out = a2 @ model.w3 + model.b3
    return z1, a1, z2, a2, out


def loss_and_gradients(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """Batch MSE and its gradient with respect to every parameter.

    Returns (loss, grads) where grads has keys W1, b1, W2, b2, w3, b3.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z1, a1, z2, a2, out = _forward(model, X)
    resid = out - y
    loss = float(np.mean(resid * resid))

    B = X.shape[0]
    dout = 2.0 * resid / B
    dw3 = a2.T @ dout
    db3 = float(dout.sum())
    da2 = np.outer(dout, model.w3)
    dz2 = da2.copy()
    dz2[z2 <= 0.0] = 0.0
    dW2 = a1.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ model.W2.T
    dz1 = da1.copy()
    dz1[z1 <= 0.0] = 0.0
    dW1 = X.T @ dz1
    db1 = dz1.sum(axis=0)
    grads = {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2, "w3": dw3, "b3": db3}
    return loss, grads


def fit_mlp(X, y, params: MlpParams | None = None, seed: int = 0) -> MlpModel:
    """Train by mini-batch SGD; epochs=0 returns the untrained init.

    Raises ValueError naming the epoch if the loss stops being finite.
    """
    params = params or MlpParams()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-d")
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("y length does not match X")
    if params.batch_size < 1:
        raise ValueError("batch_size must be >= 1")

    model = _init_model(p, seed)
    shuffle_rng = substream(seed, "shuffle")
    lr = params.learning_rate
    for epoch in range(params.epochs):
        order = shuffle_rng.permutation(n)
        for lo in range(0, n, params.batch_size):
            batch = order[lo : lo + params.batch_size]
            # overflow here is not an error condition, it is the signal the
            # finiteness check below turns into a diagnostic
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_gradients(model, X[batch], y[batch])
            if not np.isfinite(loss):
                raise ValueError(f"training diverged at epoch {epoch}")
            model.W1 -= lr * grads["W1"]
            model.b1 -= lr * grads["b1"]
            model.W2 -= lr * grads["W2"]
            model.b2 -= lr * grads["b2"]
            model.w3 -= lr * grads["w3"]
            model.b3 -= lr * grads["b3"]
    return model


def predict_mlp_batch(model: MlpModel, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"model was fit on {model.n_features} features, got {X.shape[1]}"
        )
    return _forward(model, X)[4]


def predict_mlp(model: MlpModel, x) -> float:
    """Regression score for one instance; the label is score >= 0.5."""
    return float(predict_mlp_batch(model, np.asarray(x, dtype=np.float64))[0])
