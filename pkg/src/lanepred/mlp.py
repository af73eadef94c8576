"""The maneuver gate: a single-hidden-layer perceptron mapping a feature
vector to probabilities over {LCL, FLW, LCR}.

Trained from scratch with plain stochastic gradient descent (step size
0.02) so that the backward pass can be checked against finite
differences. Sigmoid hidden units, softmax output, cross-entropy loss.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .features import Standardizer

N_CLASSES = 3
MODEL_FORMAT_VERSION = 1


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class TrainConfig:
    step_size: float = 0.02
    hidden_units: int = 27
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    val_fraction: float = 0.1
    patience: int = 5


@dataclass
class ManeuverClassifier:
    """Immutable after training; safe to share for concurrent inference."""

    w1: np.ndarray  # (d, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h, 3)
    b2: np.ndarray  # (3,)
    standardizer: Standardizer
    seed: int = 0
    loss_curve: List[float] = field(default_factory=list)
    epochs_run: int = 0

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    def forward(self, features: np.ndarray) -> np.ndarray:
        """Class probabilities for raw (unstandardized) features.

        Accepts a single vector or a batch; output rows sum to 1.
        """
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if x.shape[1] != self.input_dim:
            raise ValueError(
                f"feature dimension {x.shape[1]} != model input {self.input_dim}"
            )
        z = self.standardizer.transform(x)
        h = _sigmoid(z @ self.w1 + self.b1)
        p = _softmax(h @ self.w2 + self.b2)
        return p[0] if np.asarray(features).ndim == 1 else p

    # -- persistence --------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "maneuver_classifier",
            "shapes": {"input": self.input_dim, "hidden": self.w1.shape[1],
                       "output": N_CLASSES},
            "w1": self.w1.tolist(), "b1": self.b1.tolist(),
            "w2": self.w2.tolist(), "b2": self.b2.tolist(),
            "standardizer": {"mean": self.standardizer.mean.tolist(),
                             "std": self.standardizer.std.tolist()},
            "training": {"seed": self.seed, "epochs_run": self.epochs_run,
                         "loss_curve": self.loss_curve},
        })

    @classmethod
    def from_json(cls, text: str) -> "ManeuverClassifier":
        d = json.loads(text)
        if d.get("kind") != "maneuver_classifier":
            raise ValueError("not a maneuver classifier artifact")
        return cls(
            w1=np.array(d["w1"]), b1=np.array(d["b1"]),
            w2=np.array(d["w2"]), b2=np.array(d["b2"]),
            standardizer=Standardizer(np.array(d["standardizer"]["mean"]),
                                      np.array(d["standardizer"]["std"])),
            seed=int(d["training"]["seed"]),
            loss_curve=list(d["training"]["loss_curve"]),
            epochs_run=int(d["training"]["epochs_run"]),
        )


def _forward_backward(z, y_onehot, w1, b1, w2, b2):
    """Mean cross-entropy loss and parameter gradients for one batch of
    already-standardized inputs."""
    n = z.shape[0]
    h = _sigmoid(z @ w1 + b1)
    logits = h @ w2 + b2
    p = _softmax(logits)
    eps = 1e-300
    loss = -np.mean(np.sum(y_onehot * np.log(p + eps), axis=1))
    dlogits = (p - y_onehot) / n
    dw2 = h.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dh = dlogits @ w2.T
    dzh = dh * h * (1.0 - h)
    dw1 = z.T @ dzh
    db1 = dzh.sum(axis=0)
    return loss, (dw1, db1, dw2, db2)


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def train(X: np.ndarray, labels: np.ndarray,
          config: Optional[TrainConfig] = None) -> ManeuverClassifier:
    """Fit the gate on a balanced training set (labels in {0,1,2}).

    Deterministic under the config seed. Training aborts on a non-finite
    loss; early stopping watches a 10% validation split and restores the
    best parameters.
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if np.any((labels < 0) | (labels >= N_CLASSES)):
        raise ValueError("labels must be in {0, 1, 2}; NDEF never trains")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    Y = np.eye(N_CLASSES)[labels]

    rng = np.random.default_rng(config.seed)
    n, d = Z.shape
    perm = rng.permutation(n)
    n_val = int(round(config.val_fraction * n)) if n >= 20 else 0
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    Zt, Yt = Z[tr_idx], Y[tr_idx]
    Zv, Yv = Z[val_idx], Y[val_idx]

    h = config.hidden_units
    w1 = _glorot(rng, d, h)
    b1 = np.zeros(h)
    w2 = _glorot(rng, h, N_CLASSES)
    b2 = np.zeros(N_CLASSES)

    best = (np.inf, None)
    bad_epochs = 0
    loss_curve: List[float] = []
    lr = config.step_size
    epochs_run = 0
    for epoch in range(config.epochs):
        order = rng.permutation(Zt.shape[0])
        epoch_losses = []
        for start in range(0, order.size, config.batch_size):
            b_idx = order[start:start + config.batch_size]
            loss, (dw1, db1, dw2, db2) = _forward_backward(Zt[b_idx], Yt[b_idx], w1, b1, w2, b2)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite training loss (step size {lr}, epoch {epoch + 1})"
                )
            w1 -= lr * dw1
            b1 -= lr * db1
            w2 -= lr * dw2
            b2 -= lr * db2
            epoch_losses.append(loss)
        loss_curve.append(float(np.mean(epoch_losses)))
        epochs_run = epoch + 1
        if n_val > 0:
            val_loss, _ = _forward_backward(Zv, Yv, w1, b1, w2, b2)
            if val_loss < best[0] - 1e-9:
                best = (val_loss, (w1.copy(), b1.copy(), w2.copy(), b2.copy()))
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs > config.patience:
                    break
    if best[1] is not None:
        w1, b1, w2, b2 = best[1]
    return ManeuverClassifier(w1=w1, b1=b1, w2=w2, b2=b2, standardizer=std,
                              seed=config.seed, loss_curve=loss_curve,
                              epochs_run=epochs_run)


def _pack(params):
    return np.concatenate([p.ravel() for p in params])


def numeric_gradient_check(classifier: ManeuverClassifier, features: np.ndarray,
                           label: int, epsilon: float = 1e-5) -> float:
    """Max relative deviation between backprop and central finite
    differences of the cross-entropy loss, over all parameters."""
    if not (1e-7 <= epsilon <= 1e-3):
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    z = classifier.standardizer.transform(np.atleast_2d(features))
    y = np.eye(N_CLASSES)[[int(label)]]
    params = [classifier.w1.copy(), classifier.b1.copy(),
              classifier.w2.copy(), classifier.b2.copy()]
    _, grads = _forward_backward(z, y, *params)
    g_bp = _pack(grads)

    g_fd = np.empty_like(g_bp)
    flat_views = params
    pos = 0
    for p in flat_views:
        flat = p.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            lp, _ = _forward_backward(z, y, *params)
            flat[i] = orig - epsilon
            lm, _ = _forward_backward(z, y, *params)
            flat[i] = orig
            g_fd[pos] = (lp - lm) / (2.0 * epsilon)
            pos += 1
    denom = np.maximum(np.abs(g_bp) + np.abs(g_fd), 1e-8)
    return float(np.max(np.abs(g_bp - g_fd) / denom))
