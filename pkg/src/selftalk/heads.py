"""Feed-forward classifier heads, Adam training, and model file IO.

Everything here is plain numpy: dense layers with rectifier activations
and inverted dropout, a softmax output, analytic backprop, and a small
Adam loop with early stopping on validation macro-F1. The gradients are
exercised against central finite differences in the test suite, so keep
forward and backward in lockstep when touching either.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from selftalk.errors import DataError
from selftalk.labels import CLASSES
from selftalk.util import fnv1a64

MODEL_MAGIC = b"MMHD"
MODEL_VERSION = 1

DEFAULT_DROPOUT = 0.1
HIDDEN_3LAYER = (256, 128)
HIDDEN_5LAYER = (512, 256, 128, 64)

LINGUISTIC_DIM = 256


@dataclass(frozen=True)
class ClassDistribution:
    p: np.ndarray
    predicted: str
    least_margin: float

    @classmethod
    def from_probs(cls, p: np.ndarray) -> "ClassDistribution":
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (len(CLASSES),):
            raise DataError(f"expected a {len(CLASSES)}-class distribution, got {p.shape}")
        if abs(float(p.sum()) - 1.0) > 1e-9 or np.any(p < 0):
            raise DataError("probabilities must be nonnegative and sum to 1")
        return cls(p=p, predicted=CLASSES[int(np.argmax(p))], least_margin=least_margin(p))


def least_margin(p: np.ndarray) -> float:
    """Difference between the two highest class probabilities."""
    top2 = np.sort(np.asarray(p, dtype=np.float64))[-2:]
    return float(top2[1] - top2[0])


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


class FeedForwardHead:
    """Dense ReLU stack with dropout after each hidden activation."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray],
                 dropout: float = DEFAULT_DROPOUT):
        if len(weights) != len(biases) or not weights:
            raise DataError("weights and biases must be nonempty and parallel")
        for i in range(1, len(weights)):
            if weights[i].shape[1] != weights[i - 1].shape[0]:
                raise DataError("layer dimensions do not chain")
        self.weights = weights
        self.biases = biases
        self.dropout = dropout

    @classmethod
    def create(cls, in_dim: int, hidden: tuple[int, ...], out_dim: int = len(CLASSES),
               dropout: float = DEFAULT_DROPOUT,
               rng: np.random.Generator | None = None) -> "FeedForwardHead":
        """He-initialized weights; zero weights when rng is None."""
        dims = [in_dim, *hidden, out_dim]
        weights, biases = [], []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            if rng is None:
                w = np.zeros((d_out, d_in))
            else:
                w = rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_out, d_in))
            weights.append(w)
            biases.append(np.zeros(d_out))
        return cls(weights, biases, dropout)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward(self, x: np.ndarray, train_mode: bool = False,
                rng: np.random.Generator | None = None) -> ClassDistribution:
        p, _ = self.forward_batch(np.asarray(x, dtype=np.float64)[None, :],
                                  train_mode=train_mode, rng=rng)
        return ClassDistribution.from_probs(p[0])

    def forward_batch(self, x: np.ndarray, train_mode: bool = False,
                      rng: np.random.Generator | None = None) -> tuple[np.ndarray, dict]:
        """Batched forward; returns (probs, cache for backward)."""
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DataError(f"input shape {x.shape} does not match head in_dim {self.in_dim}")
        if train_mode and self.dropout > 0 and rng is None:
            raise DataError("train_mode forward with dropout needs an rng")
        acts = [x]
        masks: list[np.ndarray | None] = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            if i < last:
                h = np.maximum(z, 0.0)
                if train_mode and self.dropout > 0:
                    keep = 1.0 - self.dropout
                    mask = (rng.random(h.shape) < keep) / keep
                    h = h * mask
                    masks.append(mask)
                else:
                    masks.append(None)
                acts.append(h)
            else:
                h = z
        p = softmax(h)
        return p, {"acts": acts, "masks": masks, "probs": p}

    def backward(self, cache: dict, dlogits: np.ndarray) -> list[np.ndarray]:
        """Gradients in params() order, given dL/dlogits for the batch."""
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        acts, masks = cache["acts"], cache["masks"]
        d = dlogits
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = acts[i]
            grads[2 * i] = d.T @ a_in
            grads[2 * i + 1] = d.sum(axis=0)
            if i > 0:
                d = d @ self.weights[i]
                if masks[i - 1] is not None:
                    d = d * masks[i - 1]
                d = d * (acts[i] > 0.0)
        return grads

    def input_gradient(self, cache: dict, dlogits: np.ndarray) -> np.ndarray:
        """dL/dx for the batch, reusing the forward cache."""
        acts, masks = cache["acts"], cache["masks"]
        d = dlogits
        for i in range(len(self.weights) - 1, 0, -1):
            d = d @ self.weights[i]
            if masks[i - 1] is not None:
                d = d * masks[i - 1]
            d = d * (acts[i] > 0.0)
        return d @ self.weights[0]


def cross_entropy(probs: np.ndarray, y_idx: np.ndarray) -> float:
    n = probs.shape[0]
    picked = probs[np.arange(n), y_idx]
    return float(-np.mean(np.log(np.clip(picked, 1e-12, None))))


def ce_dlogits(probs: np.ndarray, y_idx: np.ndarray) -> np.ndarray:
    """d(mean CE)/dlogits = (p - onehot)/n; the softmax+CE shortcut."""
    n = probs.shape[0]
    d = probs.copy()
    d[np.arange(n), y_idx] -= 1.0
    return d / n


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * np.square(g)
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 10
    max_epochs: int = 200
    val_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size <= 0:
            raise DataError("learning_rate and batch_size must be positive")
        if self.patience < 1:
            raise DataError("patience must be >= 1")


@dataclass
class TrainHistory:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val_f1: float = -1.0


def _labels_to_idx(y) -> np.ndarray:
    idx = np.empty(len(y), dtype=np.int64)
    for i, lab in enumerate(y):
        if isinstance(lab, (int, np.integer)):
            idx[i] = int(lab)
        else:
            try:
                idx[i] = CLASSES.index(lab)
            except ValueError as exc:
                raise DataError(f"label {lab!r} outside the class set") from exc
    if idx.size and (idx.min() < 0 or idx.max() >= len(CLASSES)):
        raise DataError("label index outside the class set")
    return idx


def stratified_split(y_idx: np.ndarray, fraction: float,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-class holdout of round(fraction*n_c), at least 1 when n_c > 1."""
    train_rows, val_rows = [], []
    for c in range(len(CLASSES)):
        rows = np.flatnonzero(y_idx == c)
        rows = rng.permutation(rows)
        k = int(round(fraction * rows.size))
        if rows.size > 1:
            k = max(k, 1)
        k = min(k, rows.size - 1) if rows.size else 0
        val_rows.extend(rows[:k])
        train_rows.extend(rows[k:])
    return np.sort(np.array(train_rows, dtype=np.int64)), np.sort(
        np.array(val_rows, dtype=np.int64))


def train(head: FeedForwardHead, x: np.ndarray, y, cfg: TrainConfig,
          x_val: np.ndarray | None = None, y_val=None) -> TrainHistory:
    """Adam + cross-entropy with early stopping on validation macro-F1.

    Mutates the head in place and leaves it at the best-validation
    epoch's weights. When no explicit validation set is given, a
    stratified fraction of the training data is held out.
    """
    from selftalk.evalkit import macro_f1_from_labels

    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("training set must be a nonempty 2-D array")
    y_idx = _labels_to_idx(y)
    if y_idx.size != x.shape[0]:
        raise DataError("feature/label length mismatch")

    rng = np.random.default_rng(cfg.seed)
    if x_val is None:
        tr, va = stratified_split(y_idx, cfg.val_fraction, rng)
        x_val, yv_idx = x[va], y_idx[va]
        x, y_idx = x[tr], y_idx[tr]
    else:
        x_val = np.asarray(x_val, dtype=np.float64)
        yv_idx = _labels_to_idx(y_val)
    if x_val.shape[0] == 0:
        raise DataError("validation split came out empty; dataset too small")

    opt = Adam(head.params(), lr=cfg.learning_rate, beta1=cfg.beta1,
               beta2=cfg.beta2, eps=cfg.eps)
    history = TrainHistory()
    best_weights = None
    stale = 0
    n = x.shape[0]
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            probs, cache = head.forward_batch(x[rows], train_mode=True, rng=rng)
            total_loss += cross_entropy(probs, y_idx[rows]) * rows.size
            grads = head.backward(cache, ce_dlogits(probs, y_idx[rows]))
            opt.step(grads)
        val_probs, _ = head.forward_batch(x_val)
        val_pred = np.argmax(val_probs, axis=1)
        val_f1 = macro_f1_from_labels(yv_idx, val_pred)
        history.epochs.append({
            "epoch": epoch,
            "train_loss": total_loss / n,
            "val_macro_f1": val_f1,
        })
        if val_f1 > history.best_val_f1:
            history.best_val_f1 = val_f1
            history.best_epoch = epoch
            best_weights = ([w.copy() for w in head.weights],
                            [b.copy() for b in head.biases])
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    if best_weights is not None:
        head.weights, head.biases = best_weights
    return history


def reference_linguistic_encode(text: str, dim: int = LINGUISTIC_DIM) -> np.ndarray:
    """Hashed character 2- and 3-gram frequencies, L2-normalized.

    Desk-scale stand-in for a text encoder: deterministic, no model
    weights involved. Empty or sub-2-char text maps to the zero vector.
    """
    vec = np.zeros(dim)
    data = text.encode("utf-8")
    for n in (2, 3):
        for i in range(len(data) - n + 1):
            vec[fnv1a64(data[i:i + n]) % dim] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0:
        vec /= norm
    return vec


def save_params(path: str | Path, params: list[tuple[np.ndarray, np.ndarray]]) -> None:
    """Flat little-endian model file: magic, version, layer dims, f32 data."""
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", MODEL_VERSION, len(params)))
        for w, b in params:
            fh.write(struct.pack("<II", w.shape[1], w.shape[0]))
        for w, b in params:
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_params(path: str | Path) -> list[tuple[np.ndarray, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MODEL_MAGIC:
        raise DataError(f"{path}: not a model file (bad magic)")
    version, n_layers = struct.unpack_from("<II", blob, 4)
    if version != MODEL_VERSION:
        raise DataError(f"{path}: unsupported model version {version}")
    off = 12
    dims = []
    for _ in range(n_layers):
        d_in, d_out = struct.unpack_from("<II", blob, off)
        dims.append((d_in, d_out))
        off += 8
    out = []
    for d_in, d_out in dims:
        w = np.frombuffer(blob, dtype="<f4", count=d_in * d_out, offset=off)
        off += 4 * d_in * d_out
        b = np.frombuffer(blob, dtype="<f4", count=d_out, offset=off)
        off += 4 * d_out
        out.append((w.reshape(d_out, d_in).astype(np.float64),
                    b.astype(np.float64)))
    if off != len(blob):
        raise DataError(f"{path}: trailing bytes in model file")
    return out


def save_head(path: str | Path, head: FeedForwardHead) -> None:
    save_params(path, list(zip(head.weights, head.biases)))


def load_head(path: str | Path, dropout: float = DEFAULT_DROPOUT) -> FeedForwardHead:
    layers = load_params(path)
    return FeedForwardHead([w for w, _ in layers], [b for _, b in layers], dropout)
