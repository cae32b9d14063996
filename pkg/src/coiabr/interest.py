"""Interestingness regressor over precomputed per-chunk feature vectors."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .media import INTEREST_MAX, INTEREST_MIN


@dataclass(frozen=True)
class FeatureSample:
    features: np.ndarray
    label: float
    chunk_id: str = ""


@dataclass
class Dataset:
    features: np.ndarray  # (n, dim)
    labels: np.ndarray    # (n,)
    chunk_ids: list[str] = field(default_factory=list)
    train_fraction: float = 0.9

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise nn.DimensionMismatch("features must be (n, dim) with one label per row")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if np.any((self.labels < INTEREST_MIN) | (self.labels > INTEREST_MAX)):
            raise ValueError("labels must lie in [1, 5]")
        if not self.chunk_ids:
            self.chunk_ids = [str(i) for i in range(len(self.labels))]

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_samples(cls, samples, train_fraction: float = 0.9) -> "Dataset":
        samples = list(samples)
        dims = {len(s.features) for s in samples}
        if len(dims) > 1:
            raise nn.DimensionMismatch(f"inconsistent feature dims {sorted(dims)}")
        return cls(np.array([s.features for s in samples]), np.array([s.label for s in samples]),
                   [s.chunk_id for s in samples], train_fraction)

    def split(self, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Disjoint (train, test) index arrays covering every sample."""
        n = len(self)
        order = np.random.default_rng(seed).permutation(n)
        n_train = int(round(self.train_fraction * n))
        n_train = min(max(n_train, 1), n - 1) if n >= 2 else n_train
        return np.sort(order[:n_train]), np.sort(order[n_train:])


def mse(y, y_hat) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    return float(np.mean((y - y_hat) ** 2))


@dataclass(frozen=True)
class RegressorConfig:
    hidden: tuple[int, ...] = (256, 128)
    batch_size: int = 64
    epochs: int = 50
    learning_rate: float = 1e-3
    # multiplicative learning-rate decay applied after each epoch
    lr_decay: float = 0.93
    # L2 penalty on weights (not biases), added to the batch MSE
    weight_decay: float = 1e-2
    seed: int = 0


@dataclass
class TrainResult:
    model: nn.Network
    loss_history: list[float]
    train_idx: np.ndarray
    test_idx: np.ndarray
    test_mse: float


def train_regressor(data: Dataset, config: RegressorConfig = RegressorConfig()) -> TrainResult:
    """Mini-batch Adam on mean squared error; records train MSE per epoch."""
    if len(data) < 2:
        raise ValueError("need at least 2 samples")
    train_idx, test_idx = data.split(config.seed)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise ValueError("train/test split left an empty side")
    rng = np.random.default_rng(config.seed)
    net = nn.init_network([data.dim, *config.hidden, 1], rng=rng)
    # start as the constant label-mean predictor so early epochs fit shape, not offset
    net.layers[-1].weights[:] = 0.0
    net.layers[-1].biases[:] = data.labels[train_idx].mean()
    opt = nn.OptimizerState("adam", config.learning_rate)
    X, y = data.features[train_idx], data.labels[train_idx]
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), config.batch_size):
            b = order[start:start + config.batch_size]
            acts = nn.forward_trace(net, X[b])
            err = acts[-1][:, 0] - y[b]
            grad_out = (2.0 / len(b)) * err[:, None]
            grads = nn.backward(net, X[b], grad_out, acts)
            if config.weight_decay:
                grads = [(dw + 2.0 * config.weight_decay * l.weights, db)
                         for (dw, db), l in zip(grads, net.layers)]
            opt.step(net, grads)
        history.append(mse(y, nn.forward(net, X)[:, 0]))
        opt.learning_rate *= config.lr_decay
    test_pred = predict_interestingness(net, data.features[test_idx])
    return TrainResult(net, history, train_idx, test_idx, mse(data.labels[test_idx], test_pred))


def predict_interestingness(model: nn.Network, features):
    """Linear head output clamped to [1, 5]; accepts one vector or a batch of rows."""
    out = nn.forward(model, features)[..., 0]
    out = np.clip(out, INTEREST_MIN, INTEREST_MAX)
    return float(out) if np.ndim(out) == 0 else out


def planted_dataset(n: int, dim: int = 512, noise: float = 0.0, seed: int = 0,
                    train_fraction: float = 0.9) -> tuple[Dataset, np.ndarray]:
    """Synthetic features with labels ``clamp(1 + 4 * sigmoid(a . x) + noise, 1, 5)``.

    Returns the dataset and the planted direction ``a``.
    """
    rng = np.random.default_rng(seed)
    a = rng.normal(size=dim) / np.sqrt(dim)
    X = rng.normal(size=(n, dim))
    clean = 1.0 + 4.0 / (1.0 + np.exp(-(X @ a)))
    y = np.clip(clean + noise * rng.normal(size=n), INTEREST_MIN, INTEREST_MAX)
    return Dataset(X, y, train_fraction=train_fraction), a


def load_features(source) -> Dataset:
    """Read ``chunk_id,label,f1,...,fD`` CSV rows (an optional header is skipped)."""
    if isinstance(source, bytes):
        source = source.decode()
    if isinstance(source, str):
        source = io.StringIO(source)
    ids, labels, rows = [], [], []
    for lineno, row in enumerate(csv.reader(source), start=1):
        if not row:
            continue
        try:
            label = float(row[1])
            feats = [float(v) for v in row[2:]]
        except (ValueError, IndexError):
            if lineno == 1:
                continue
            raise ValueError(f"line {lineno}: malformed feature row") from None
        if rows and len(feats) != len(rows[0]):
            raise nn.DimensionMismatch(f"line {lineno}: expected {len(rows[0])} features, got {len(feats)}")
        ids.append(row[0])
        labels.append(label)
        rows.append(feats)
    if not rows:
        raise ValueError("feature file is empty")
    return Dataset(np.array(rows), np.array(labels), ids)


def dump_features(data: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for cid, label, feats in zip(data.chunk_ids, data.labels, data.features):
        w.writerow([cid, repr(float(label)), *(repr(float(v)) for v in feats)])
    return buf.getvalue()
