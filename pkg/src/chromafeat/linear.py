"""Single-pass online logistic regression with per-coordinate adaptive rates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import EncodedDataset

_EPS = 1e-8
_CLIP = 1e-7


class TrainingError(RuntimeError):
    pass


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    grad_sq: np.ndarray
    bias_grad_sq: float
    lr: float

    @property
    def dim(self) -> int:
        return int(self.weights.size)

    def decision(self, idx: np.ndarray, val: np.ndarray) -> float:
        return float(self.weights[idx] @ val) + self.bias

    def predict_proba(self, idx: np.ndarray, val: np.ndarray) -> float:
        z = self.decision(idx, val)
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-min(z, 35.0)))
        e = math.exp(max(z, -35.0))
        return e / (1.0 + e)


def train_logistic(
    data: EncodedDataset,
    epochs: int = 1,
    lr: float = 0.5,
    l2: float = 0.0,
    seed: int = 0,
) -> LinearModel:
    """Online logistic regression, examples consumed in dataset order.

    Per-coordinate update w_j <- w_j - lr * g_j / sqrt(G_j + 1e-8) with G_j
    the running sum of squared gradients; one pass by default, no shuffling.
    ``seed`` is recorded for provenance; initialization is zero so training
    is deterministic given (data order, lr).
    """
    model = LinearModel(
        weights=np.zeros(data.dim, dtype=np.float64),
        bias=0.0,
        grad_sq=np.zeros(data.dim, dtype=np.float64),
        bias_grad_sq=0.0,
        lr=lr,
    )
    w, gs = model.weights, model.grad_sq
    for epoch in range(epochs):
        for i, (y, (idx, val)) in enumerate(zip(data.labels, data.rows)):
            p = model.predict_proba(idx, val)
            g = p - float(y)
            if not math.isfinite(g):
                raise TrainingError(f"non-finite gradient at epoch {epoch}, example {i}")
            gi = g * val
            if l2:
                gi = gi + l2 * w[idx]
            gs[idx] += gi * gi
            w[idx] -= lr * gi / np.sqrt(gs[idx] + _EPS)
            model.bias_grad_sq += g * g
            model.bias -= lr * g / math.sqrt(model.bias_grad_sq + _EPS)
            if not math.isfinite(model.bias) or (idx.size and not math.isfinite(w[idx[0]])):
                raise TrainingError(f"weights diverged at epoch {epoch}, example {i}")
    return model


def log_loss(model: LinearModel, data: EncodedDataset) -> float:
    """Mean negative log likelihood with predictions clipped to [1e-7, 1-1e-7]."""
    if data.n == 0:
        raise TrainingError("log_loss over an empty dataset")
    total = 0.0
    for y, (idx, val) in zip(data.labels, data.rows):
        p = min(max(model.predict_proba(idx, val), _CLIP), 1.0 - _CLIP)
        total += -(math.log(p) if y else math.log(1.0 - p))
    return total / data.n


def accuracy(model: LinearModel, data: EncodedDataset) -> float:
    if data.n == 0:
        raise TrainingError("accuracy over an empty dataset")
    hits = 0
    for y, (idx, val) in zip(data.labels, data.rows):
        hits += int((model.predict_proba(idx, val) >= 0.5) == bool(y))
    return hits / data.n


def save_model(model: LinearModel, path) -> None:
    Path(path).write_text(
        json.dumps(
            {
                "weights": model.weights.tolist(),
                "bias": model.bias,
                "grad_sq": model.grad_sq.tolist(),
                "bias_grad_sq": model.bias_grad_sq,
                "lr": model.lr,
            },
            sort_keys=True,
        )
    )


def load_model(path) -> LinearModel:
    data = json.loads(Path(path).read_text())
    return LinearModel(
        weights=np.asarray(data["weights"], dtype=np.float64),
        bias=data["bias"],
        grad_sq=np.asarray(data["grad_sq"], dtype=np.float64),
        bias_grad_sq=data["bias_grad_sq"],
        lr=data["lr"],
    )


def append_metrics(path, record: dict) -> None:
    """Append one JSON line keyed by (dataset, encoder, budget, seed)."""
    with open(path, "at", encoding="utf-8") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")
