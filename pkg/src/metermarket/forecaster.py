"""Quantile bidding model: a small ReLU network trained on pinball loss.

One hidden layer, identity output, full-batch adaptive-moment updates. The
procurement bid for a period is the predicted conditional quantile of
demand at the critical fractile. An optional spectral-norm clip keeps the
network's Lipschitz constant within a budget k_f so that profit bounds
driven by k_f stay valid for the trained model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

POWER_ITERATIONS = 20

__all__ = [
    "LagSpec",
    "TrainConfig",
    "AnnModel",
    "build_lag_features",
    "pinball_loss",
    "spectral_norm",
    "train",
    "predict_bid",
    "model_lipschitz",
    "loss_and_grads",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class LagSpec:
    """Which past periods feed the model, as positive look-back offsets."""

    offsets: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.offsets or any((not isinstance(o, int)) or o < 1 for o in self.offsets):
            raise ValueError("offsets must be positive integers")

    @classmethod
    def daily_pairs(cls, periods_per_day: int = 48) -> "LagSpec":
        """Adjacent-period pairs at one, two, and three days back."""
        h = periods_per_day
        return cls((h, h + 1, 2 * h, 2 * h + 1, 3 * h, 3 * h + 1))

    @classmethod
    def offset_pairs(cls, periods_per_day: int = 48) -> "LagSpec":
        """A deliberately shifted lag set for model mis-specification studies."""
        h = periods_per_day
        return cls((h - 6, h - 10, 2 * h - 6, 2 * h - 10, 3 * h + 10, 3 * h + 4))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    hidden: int = 3
    seed: int = 0
    k_f: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.hidden < 1:
            raise ValueError("epochs and hidden must be at least 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.k_f is not None and self.k_f <= 0.0:
            raise ValueError("k_f must be positive when given")


@dataclass
class AnnModel:
    """Trained network plus the standardization that wraps it.

    The network itself maps standardized features to a standardized
    quantile; predict_bid applies the scalers on both ends. w1 is
    (hidden, inputs), w2 is (1, hidden); hidden activation ReLU, output
    identity.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    tau: float
    final_loss: float = field(default=float("nan"))

    def forward_standardized(self, z: np.ndarray) -> np.ndarray:
        hidden = np.maximum(z @ self.w1.T + self.b1, 0.0)
        return (hidden @ self.w2.T + self.b2).ravel()


def build_lag_features(series: np.ndarray, spec: LagSpec) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and target vector from one load series.

    Row k predicts series[t] with t = max(offsets) + k from the values at
    t - offset for each offset, so every row is fully observed.
    """
    arr = np.asarray(series, dtype=float).ravel()
    start = max(spec.offsets)
    if arr.size <= start:
        raise ValueError(f"series of length {arr.size} too short for offsets up to {start}")
    t = np.arange(start, arr.size)
    x = np.column_stack([arr[t - off] for off in spec.offsets])
    return x, arr[t]


def pinball_loss(predicted: np.ndarray, target: np.ndarray, tau: float) -> float:
    """Mean quantile loss: (1 - tau) penalizes over-prediction, tau under-prediction."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly inside (0, 1)")
    p = np.asarray(predicted, dtype=float)
    d = np.asarray(target, dtype=float)
    return float(np.mean((1.0 - tau) * np.maximum(p - d, 0.0) + tau * np.maximum(d - p, 0.0)))


def spectral_norm(w: np.ndarray, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Largest singular value by power iteration on W^T W."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    u = np.random.default_rng(seed).normal(size=w.shape[0])
    u /= np.linalg.norm(u) or 1.0
    sigma = 0.0
    for _ in range(iterations):
        v = w.T @ u
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        v /= nv
        u = w @ v
        sigma = np.linalg.norm(u)
        if sigma == 0.0:
            return 0.0
        u /= sigma
    return float(sigma)


def loss_and_grads(model: AnnModel, z: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Pinball loss and its exact gradients in standardized space."""
    n = z.shape[0]
    pre = z @ model.w1.T + model.b1
    hidden = np.maximum(pre, 0.0)
    pred = (hidden @ model.w2.T + model.b2).ravel()
    loss = pinball_loss(pred, y, model.tau)
    # subgradient of the pinball loss in the prediction
    g = ((1.0 - model.tau) * (pred > y).astype(float) - model.tau * (pred < y).astype(float)) / n
    dw2 = g[None, :] @ hidden
    db2 = np.array([g.sum()])
    dhidden = np.outer(g, model.w2.ravel())
    dpre = dhidden * (pre > 0.0)
    dw1 = dpre.T @ z
    db1 = dpre.sum(axis=0)
    return loss, {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


def _clip_spectral(w: np.ndarray, limit: float) -> np.ndarray:
    s = spectral_norm(w)
    if s > limit > 0.0:
        return w * (limit / s)
    return w


def train(x: np.ndarray, y: np.ndarray, tau: float, config: TrainConfig = TrainConfig()) -> AnnModel:
    """Fit the quantile network on a feature matrix and target vector.

    Inputs and targets are standardized by their training statistics
    (constant columns get unit scale). Updates are full-batch Adam; when
    config.k_f is set, both weight matrices are rescaled after every step so
    the product of their spectral norms stays at or below k_f. Training is
    deterministic for a given config. Non-finite losses abort with
    diagnostics rather than returning garbage.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim != 2 or x.shape[0] != y.size or x.shape[0] == 0:
        raise ValueError("x must be (n_rows, n_features) aligned with y")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly inside (0, 1)")

    x_mean = x.mean(axis=0)
    x_std = x.std(axis=0)
    x_std = np.where(x_std < 1e-12, 1.0, x_std)
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    z = (x - x_mean) / x_std
    t = (y - y_mean) / y_std

    rng = np.random.default_rng(config.seed)
    n_in, n_h = x.shape[1], config.hidden
    lim1 = math.sqrt(6.0 / (n_in + n_h))
    lim2 = math.sqrt(6.0 / (n_h + 1))
    model = AnnModel(
        w1=rng.uniform(-lim1, lim1, (n_h, n_in)),
        b1=np.zeros(n_h),
        w2=rng.uniform(-lim2, lim2, (1, n_h)),
        b2=np.zeros(1),
        x_mean=x_mean,
        x_std=x_std,
        y_mean=y_mean,
        y_std=y_std,
        tau=tau,
    )
    limit = math.sqrt(config.k_f) if config.k_f is not None else None
    if limit is not None:
        model.w1 = _clip_spectral(model.w1, limit)
        model.w2 = _clip_spectral(model.w2, limit)

    params = ("w1", "b1", "w2", "b2")
    m = {p: np.zeros_like(getattr(model, p)) for p in params}
    v = {p: np.zeros_like(getattr(model, p)) for p in params}
    loss = float("nan")
    for step in range(1, config.epochs + 1):
        loss, grads = loss_and_grads(model, z, t)
        if not math.isfinite(loss):
            raise FloatingPointError(
                f"training diverged at epoch {step}: loss={loss!r}, lr={config.learning_rate}")
        for p in params:
            m[p] = config.beta1 * m[p] + (1.0 - config.beta1) * grads[p]
            v[p] = config.beta2 * v[p] + (1.0 - config.beta2) * grads[p] ** 2
            m_hat = m[p] / (1.0 - config.beta1**step)
            v_hat = v[p] / (1.0 - config.beta2**step)
            setattr(model, p, getattr(model, p) - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps))
        if limit is not None:
            model.w1 = _clip_spectral(model.w1, limit)
            model.w2 = _clip_spectral(model.w2, limit)
    model.final_loss = float(loss)
    return model


def predict_bid(model: AnnModel, features: np.ndarray) -> np.ndarray:
    """Raw-scale quantile bids for raw-scale feature rows."""
    f = np.atleast_2d(np.asarray(features, dtype=float))
    z = (f - model.x_mean) / model.x_std
    return model.forward_standardized(z) * model.y_std + model.y_mean


def model_lipschitz(model: AnnModel, include_scaling: bool = False) -> float:
    """Upper bound on the network's Lipschitz constant.

    Default: product of the two spectral norms, the quantity the training
    clip controls. With include_scaling, the standardizers are folded in and
    the bound applies to the raw feature-to-bid map.
    """
    if include_scaling:
        return model.y_std * spectral_norm(model.w1 / model.x_std) * spectral_norm(model.w2)
    return spectral_norm(model.w1) * spectral_norm(model.w2)


_FORMAT_TAG = "ann-quantile v1"


def save_model(model: AnnModel, path: str | Path) -> None:
    """Write the model as documented plain text.

    Layout: a format tag; scalar fields (tau, dims, activations, scaler
    parameters); then each matrix as a `name rows cols` header followed by
    row-major lines of full-precision floats.
    """
    lines = [
        _FORMAT_TAG,
        f"tau {model.tau!r}",
        f"input_dim {model.w1.shape[1]}",
        f"hidden_dim {model.w1.shape[0]}",
        "hidden_activation relu",
        "output_activation identity",
        "x_mean " + " ".join(repr(float(v)) for v in model.x_mean),
        "x_std " + " ".join(repr(float(v)) for v in model.x_std),
        f"y_mean {model.y_mean!r}",
        f"y_std {model.y_std!r}",
    ]
    for name in ("w1", "b1", "w2", "b2"):
        arr = np.atleast_2d(getattr(model, name))
        lines.append(f"{name} {arr.shape[0]} {arr.shape[1]}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in arr)
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path) -> AnnModel:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != _FORMAT_TAG:
        raise ValueError(f"{path} is not a {_FORMAT_TAG!r} file")
    fields: dict[str, str] = {}
    mats: dict[str, np.ndarray] = {}
    i = 1
    while i < len(text):
        head = text[i].split()
        if head[0] in ("w1", "b1", "w2", "b2"):
            rows, cols = int(head[1]), int(head[2])
            block = [[float(v) for v in text[i + 1 + r].split()] for r in range(rows)]
            mats[head[0]] = np.array(block).reshape(rows, cols)
            i += 1 + rows
        else:
            fields[head[0]] = text[i].partition(" ")[2]
            i += 1
    if fields.get("hidden_activation") != "relu" or fields.get("output_activation") != "identity":
        raise ValueError("unsupported activation in model file")
    return AnnModel(
        w1=mats["w1"],
        b1=mats["b1"].ravel(),
        w2=mats["w2"],
        b2=mats["b2"].ravel(),
        x_mean=np.array([float(v) for v in fields["x_mean"].split()]),
        x_std=np.array([float(v) for v in fields["x_std"].split()]),
        y_mean=float(fields["y_mean"]),
        y_std=float(fields["y_std"]),
        tau=float(fields["tau"]),
    )
