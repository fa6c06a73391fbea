"""Contact estimator: an 8 -> 12 -> 64 -> 64 -> 5 ReLU network trained with Adam.

Everything is plain numpy in float64. Parameters live in one flat vector so
the optimizer step is a handful of vectorized operations; the per-layer
weight and bias arrays are views into it.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DIMS = (8, 12, 64, 64, 5)
FORMAT = "fingertip-mlp"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model file is corrupt, truncated, or from an incompatible version."""


class MlpModel:
    """Fully connected ReLU network with identity output and input standardization."""

    def __init__(self, dims=DIMS, params=None):
        self.dims = tuple(int(d) for d in dims)
        sizes = [(a, b) for a, b in zip(self.dims[:-1], self.dims[1:])]
        n = sum(a * b + b for a, b in sizes)
        self.params = np.zeros(n) if params is None else np.array(params, dtype=float)
        if self.params.shape != (n,):
            raise ValueError(f"expected {n} parameters for dims {self.dims}, got {self.params.shape}")
        self.weights, self.biases = _views(self.params, sizes)
        self.input_mean = np.zeros(self.dims[0])
        self.input_std = np.ones(self.dims[0])
        self.output_mean = np.zeros(self.dims[-1])
        self.output_std = np.ones(self.dims[-1])
        self.metadata = {}

    @classmethod
    def initialize(cls, seed=0, dims=DIMS):
        """Glorot-uniform weights, zero biases."""
        model = cls(dims)
        rng = np.random.default_rng(seed)
        for w in model.weights:
            limit = math.sqrt(6.0 / (w.shape[0] + w.shape[1]))
            w[...] = rng.uniform(-limit, limit, size=w.shape)
        return model

    @property
    def n_params(self):
        return self.params.size

    def copy(self):
        other = MlpModel(self.dims, self.params.copy())
        other.input_mean = self.input_mean.copy()
        other.input_std = self.input_std.copy()
        other.output_mean = self.output_mean.copy()
        other.output_std = self.output_std.copy()
        other.metadata = json.loads(json.dumps(self.metadata))
        return other

    def set_normalization(self, inputs, targets=None):
        """Standardize inputs (and optionally targets) with the given statistics."""
        self.input_mean, self.input_std = _stats(inputs)
        if targets is not None:
            self.output_mean, self.output_std = _stats(targets)


def _stats(a):
    std = a.std(axis=0)
    return a.mean(axis=0), np.where(std > 0, std, 1.0)


def _views(flat, sizes):
    weights, biases, i = [], [], 0
    for a, b in sizes:
        weights.append(flat[i : i + a * b].reshape(a, b))
        i += a * b
        biases.append(flat[i : i + b])
        i += b
    return weights, biases


def _network(model, x):
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        x = x @ w + b
        if i < last:
            x = np.maximum(x, 0.0)
    return x


def forward(model, s):
    """Estimate ``[Fx, Fy, Fz, theta, phi]`` for one reading or a batch."""
    x = (np.asarray(s, dtype=float) - model.input_mean) / model.input_std
    return _network(model, x) * model.output_std + model.output_mean


def loss_and_gradient(model, inputs, targets):
    """Mean squared error over the batch and all 5 outputs, and its gradient.

    The error is measured in standardized target units, ``(y - mean) / std``
    with the statistics stored on the model; with the default statistics
    that is the plain MSE. The gradient comes back as a flat vector aligned
    with ``model.params``.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if len(inputs) == 0:
        raise ValueError("empty batch")
    acts = [(inputs - model.input_mean) / model.input_std]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        acts.append(np.maximum(z, 0.0) if i < last else z)

    err = acts[-1] - (targets - model.output_mean) / model.output_std
    loss = float(np.mean(err * err))

    grad = np.empty_like(model.params)
    gw, gb = _views(grad, [w.shape for w in model.weights])
    delta = 2.0 * err / err.size
    for i in range(last, -1, -1):
        gw[i][...] = acts[i].T @ delta
        gb[i][...] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return loss, grad


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def update(self, params, grad):
        """Apply one Adam step to ``params`` in place."""
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.step += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.step)
        v_hat = self.v / (1.0 - self.beta2**self.step)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class RmseReport:
    split: str
    force_rmse: float
    angle_rmse: float
    per_output: list = field(default_factory=list)

    def as_dict(self):
        return {
            "split": self.split,
            "force_rmse_N": self.force_rmse,
            "angle_rmse_rad": self.angle_rmse,
            "per_output": dict(zip(("Fx", "Fy", "Fz", "theta", "phi"), self.per_output)),
        }


def rmse_report(pred, targets, split=""):
    err = np.asarray(pred) - np.asarray(targets)
    if len(err) == 0:
        raise ValueError(f"cannot evaluate on an empty {split or 'data'} split")
    return RmseReport(
        split=split,
        force_rmse=float(np.sqrt(np.mean(err[:, :3] ** 2))),
        angle_rmse=float(np.sqrt(np.mean(err[:, 3:] ** 2))),
        per_output=[float(v) for v in np.sqrt(np.mean(err**2, axis=0))],
    )


def evaluate(model, dataset, split="test"):
    """Pooled force and angle RMSE of ``model`` on one split of ``dataset``."""
    inputs, targets = dataset.split(split)
    if len(inputs) == 0:
        raise ValueError(f"{split} split is empty")
    return rmse_report(forward(model, inputs), targets, split)


def train(dataset, epochs=10, batch=10, seed=0, lr=1e-3, lr_decay=0.9, normalize=True, log=None):
    """Fit a fresh model on the training split.

    With ``normalize`` the inputs and the targets are standardized with
    training-split statistics, so forces (tens of newtons) and angles
    (fractions of a radian) pull on the loss equally. The Adam step size is
    ``lr * lr_decay ** epoch``; without the decay the last epochs mostly
    rattle around the minimum and the training loss can tick back up.

    Returns ``(model, train_report, test_report)``. The per-epoch training
    loss (full training split, standardized units, starting with the
    untrained model) is stored in ``model.metadata["history"]``.
    """
    x_tr, y_tr = dataset.split("train")
    x_te, _ = dataset.split("test")
    if len(x_tr) == 0:
        raise ValueError("training split is empty")
    if len(x_te) == 0:
        raise ValueError("test split is empty")

    rng = np.random.default_rng(seed)
    model = MlpModel.initialize(seed=int(rng.integers(2**31)))
    if normalize:
        model.set_normalization(x_tr, y_tr)
    opt = AdamState(lr=lr)

    def train_loss():
        err = (forward(model, x_tr) - y_tr) / model.output_std
        return float(np.mean(err * err))

    history = [train_loss()]
    for epoch in range(epochs):
        opt.lr = lr * lr_decay**epoch
        order = rng.permutation(len(x_tr))
        for start in range(0, len(order), batch):
            idx = order[start : start + batch]
            _, grad = loss_and_gradient(model, x_tr[idx], y_tr[idx])
            opt.update(model.params, grad)
        history.append(train_loss())
        if log:
            log(f"epoch {epoch + 1}/{epochs}: train mse {history[-1]:.5g}")

    model.metadata = {
        "seed": seed,
        "epochs": epochs,
        "batch": batch,
        "lr": lr,
        "lr_decay": lr_decay,
        "adam_steps": opt.step,
        "history": history,
        "dataset": {k: dataset.metadata.get(k) for k in ("seed", "noise_std", "record_count", "layout_hash")},
    }
    return model, evaluate(model, dataset, "train"), evaluate(model, dataset, "test")


def save_model(model, path):
    doc = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "dims": list(model.dims),
        "weights": [w.ravel().tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "input_mean": model.input_mean.tolist(),
        "input_std": model.input_std.tolist(),
        "output_mean": model.output_mean.tolist(),
        "output_std": model.output_std.tolist(),
        "metadata": model.metadata,
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path):
    """Load a model written by :func:`save_model`.

    Raises:
        ModelFormatError: unreadable JSON, wrong format or version, or
            arrays that do not match the declared dimensions.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: cannot parse model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError(f"{path}: not a {FORMAT} file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported format_version {doc.get('format_version')!r} (expected {FORMAT_VERSION})"
        )
    try:
        dims = tuple(doc["dims"])
        model = MlpModel(dims)
        if len(doc["weights"]) != len(dims) - 1 or len(doc["biases"]) != len(dims) - 1:
            raise ModelFormatError(f"{path}: layer count does not match dims {dims}")
        for w, b, wl, bl in zip(model.weights, model.biases, doc["weights"], doc["biases"]):
            if len(wl) != w.size or len(bl) != b.size:
                raise ModelFormatError(f"{path}: parameter array does not match dims {dims}")
            w[...] = np.array(wl, dtype=float).reshape(w.shape)
            b[...] = np.array(bl, dtype=float)
        model.input_mean = np.array(doc["input_mean"], dtype=float).reshape(dims[0])
        model.input_std = np.array(doc["input_std"], dtype=float).reshape(dims[0])
        model.output_mean = np.array(doc["output_mean"], dtype=float).reshape(dims[-1])
        model.output_std = np.array(doc["output_std"], dtype=float).reshape(dims[-1])
        model.metadata = doc.get("metadata", {})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from None
    return model
