"""Flat-parameter numpy models trained by mini-batch SGD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class LogisticRegression:
    features: int
    classes: int

    @property
    def num_params(self) -> int:
        return self.features * self.classes + self.classes

    def init(self, rng) -> np.ndarray:
        return np.zeros(self.num_params)

    def _unpack(self, w):
        k = self.features * self.classes
        return w[:k].reshape(self.features, self.classes), w[k:]

    def logits(self, w, X):
        W, b = self._unpack(w)
        return X @ W + b

    def loss_grad(self, w, X, y):
        W, _ = self._unpack(w)
        p = _softmax(self.logits(w, X))
        n = len(y)
        loss = -np.log(p[np.arange(n), y] + 1e-12).mean()
        p[np.arange(n), y] -= 1.0
        p /= n
        return loss, np.concatenate([(X.T @ p).ravel(), p.sum(axis=0)])

    def predict(self, w, X):
        return self.logits(w, X).argmax(axis=1)


@dataclass(frozen=True)
class MLP:
    features: int
    hidden: int
    classes: int

    @property
    def num_params(self) -> int:
        return self.features * self.hidden + self.hidden + self.hidden * self.classes + self.classes

    def init(self, rng) -> np.ndarray:
        W1 = rng.normal(0.0, np.sqrt(2.0 / self.features), size=(self.features, self.hidden))
        W2 = rng.normal(0.0, np.sqrt(1.0 / self.hidden), size=(self.hidden, self.classes))
        return np.concatenate([W1.ravel(), np.zeros(self.hidden), W2.ravel(), np.zeros(self.classes)])

    def _unpack(self, w):
        f, h, c = self.features, self.hidden, self.classes
        i = 0
        W1 = w[i : i + f * h].reshape(f, h); i += f * h
        b1 = w[i : i + h]; i += h
        W2 = w[i : i + h * c].reshape(h, c); i += h * c
        return W1, b1, W2, w[i:]

    def loss_grad(self, w, X, y):
        W1, b1, W2, b2 = self._unpack(w)
        a = X @ W1 + b1
        hdn = np.maximum(a, 0.0)
        p = _softmax(hdn @ W2 + b2)
        n = len(y)
        loss = -np.log(p[np.arange(n), y] + 1e-12).mean()
        p[np.arange(n), y] -= 1.0
        p /= n
        gW2 = hdn.T @ p
        dh = (p @ W2.T) * (a > 0)
        gW1 = X.T @ dh
        return loss, np.concatenate([gW1.ravel(), dh.sum(axis=0), gW2.ravel(), p.sum(axis=0)])

    def predict(self, w, X):
        W1, b1, W2, b2 = self._unpack(w)
        return (np.maximum(X @ W1 + b1, 0.0) @ W2 + b2).argmax(axis=1)


@dataclass(frozen=True)
class Quadratic:
    """``f(w) = 1/2 (w - w_opt)^T diag(a) (w - w_opt)``; the data arguments are ignored.

    Strong convexity ``mu = min(a)`` and smoothness ``L = max(a)`` are exact.
    """

    a: tuple[float, ...]
    w_opt: tuple[float, ...]
    start: tuple[float, ...]

    @property
    def num_params(self) -> int:
        return len(self.a)

    @property
    def mu(self) -> float:
        return min(self.a)

    @property
    def L(self) -> float:
        return max(self.a)

    def contraction(self, lr: float) -> float:
        return float(np.sqrt(1.0 - 2.0 * lr * self.mu + lr * lr * self.L * self.L))

    def init(self, rng) -> np.ndarray:
        return np.array(self.start, dtype=np.float64)

    def loss_grad(self, w, X, y):
        diff = w - np.asarray(self.w_opt)
        a = np.asarray(self.a)
        return 0.5 * float(diff @ (a * diff)), a * diff

    def predict(self, w, X):
        return np.zeros(len(X), dtype=np.int64)


def local_train(model, w, shard: Dataset, lr: float, iters: int, rng, batch_size: int | None = 32) -> np.ndarray:
    """``iters`` SGD steps from ``w``; ``batch_size=None`` uses the full shard."""
    if iters < 1:
        raise ValueError("at least one local iteration is required")
    w = np.array(w, dtype=np.float64)
    n = len(shard)
    for _ in range(iters):
        if batch_size is None or batch_size >= n:
            X, y = shard.X, shard.y
        else:
            idx = rng.choice(n, size=batch_size, replace=False)
            X, y = shard.X[idx], shard.y[idx]
        _, g = model.loss_grad(w, X, y)
        w -= lr * g
    return w


def evaluate(model, w, test: Dataset) -> tuple[float, float]:
    """Accuracy, and the rate at which label ``l`` is predicted as ``M - l - 1``."""
    if len(test) == 0:
        raise ValueError("empty test set")
    pred = model.predict(w, test.X)
    acc = float(np.mean(pred == test.y))
    target = test.classes - 1 - test.y
    eligible = target != test.y
    asr = float(np.mean(pred[eligible] == target[eligible])) if eligible.any() else 0.0
    return acc, asr
