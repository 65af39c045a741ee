"""Gated fusion of acoustic and linguistic embeddings.

Both inputs are projected to a shared width d, a sigmoid gate assigns
each coordinate a weight g, and the fused vector g*x1' + (1-g)*x2'
feeds a 5-layer classifier head. Per coordinate the two modality
weights sum to exactly 1 by construction. A static mode pins g = 0.5
for the ablation baseline.
"""

from __future__ import annotations

import numpy as np

from selftalk.errors import DataError
from selftalk.heads import (
    HIDDEN_5LAYER,
    Adam,
    ClassDistribution,
    FeedForwardHead,
    TrainConfig,
    ce_dlogits,
    cross_entropy,
    load_params,
    save_params,
)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


class FusionGate:
    def __init__(self, proj_a: tuple[np.ndarray, np.ndarray],
                 proj_l: tuple[np.ndarray, np.ndarray],
                 gate: tuple[np.ndarray, np.ndarray],
                 head: FeedForwardHead, mode: str = "adaptive"):
        wa, ba = proj_a
        wl, bl = proj_l
        wg, bg = gate
        d = wa.shape[0]
        if wl.shape[0] != d or wg.shape != (d, 2 * d) or bg.shape != (d,):
            raise DataError("fusion gate dimensions do not chain")
        if head.in_dim != d:
            raise DataError("fusion head input dim must equal the common dim")
        if mode not in ("adaptive", "static"):
            raise DataError(f"unknown fusion mode {mode!r}")
        self.wa, self.ba = wa, ba
        self.wl, self.bl = wl, bl
        self.wg, self.bg = wg, bg
        self.head = head
        self.mode = mode

    @classmethod
    def create(cls, d_a: int, d_l: int, d: int | None = None,
               hidden: tuple[int, ...] = HIDDEN_5LAYER,
               mode: str = "adaptive",
               rng: np.random.Generator | None = None) -> "FusionGate":
        if d is None:
            d = min(d_a, d_l)

        def init(shape):
            if rng is None:
                return np.zeros(shape)
            return rng.normal(0.0, 1.0 / np.sqrt(shape[1]), size=shape)

        head = FeedForwardHead.create(d, hidden, rng=rng)
        return cls((init((d, d_a)), np.zeros(d)),
                   (init((d, d_l)), np.zeros(d)),
                   (init((d, 2 * d)), np.zeros(d)),
                   head, mode)

    @property
    def common_dim(self) -> int:
        return self.wa.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.wa, self.ba, self.wl, self.bl, self.wg, self.bg,
                *self.head.params()]

    def fuse(self, x1: np.ndarray, x2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Single-vector fusion; returns (z, g)."""
        z, g, _ = self._fuse_batch(np.asarray(x1, dtype=np.float64)[None, :],
                                   np.asarray(x2, dtype=np.float64)[None, :])
        return z[0], g[0]

    def _fuse_batch(self, x1: np.ndarray, x2: np.ndarray):
        if x1.shape[1] != self.wa.shape[1] or x2.shape[1] != self.wl.shape[1]:
            raise DataError(
                f"fusion inputs ({x1.shape[1]}, {x2.shape[1]}) do not match "
                f"projections ({self.wa.shape[1]}, {self.wl.shape[1]})")
        x1p = x1 @ self.wa.T + self.ba
        x2p = x2 @ self.wl.T + self.bl
        c = np.concatenate([x1p, x2p], axis=1)
        if self.mode == "static":
            g = np.full_like(x1p, 0.5)
        else:
            g = _sigmoid(c @ self.wg.T + self.bg)
        z = g * x1p + (1.0 - g) * x2p
        return z, g, {"x1": x1, "x2": x2, "x1p": x1p, "x2p": x2p, "c": c, "g": g}

    def classify(self, x1: np.ndarray, x2: np.ndarray) -> ClassDistribution:
        z, _ = self.fuse(x1, x2)
        return self.head.forward(z)

    def forward_batch(self, x1: np.ndarray, x2: np.ndarray,
                      train_mode: bool = False,
                      rng: np.random.Generator | None = None):
        z, g, fcache = self._fuse_batch(x1, x2)
        probs, hcache = self.head.forward_batch(z, train_mode=train_mode, rng=rng)
        return probs, {"fuse": fcache, "head": hcache}

    def backward(self, cache: dict, dlogits: np.ndarray) -> list[np.ndarray]:
        """Gradients in params() order from dL/dlogits."""
        head_grads = self.head.backward(cache["head"], dlogits)
        dz = self.head.input_gradient(cache["head"], dlogits)
        f = cache["fuse"]
        x1p, x2p, g, c = f["x1p"], f["x2p"], f["g"], f["c"]
        dx1p = dz * g
        dx2p = dz * (1.0 - g)
        if self.mode == "static":
            dwg = np.zeros_like(self.wg)
            dbg = np.zeros_like(self.bg)
        else:
            dg = dz * (x1p - x2p)
            ds = dg * g * (1.0 - g)
            dwg = ds.T @ c
            dbg = ds.sum(axis=0)
            dc = ds @ self.wg
            d = self.common_dim
            dx1p = dx1p + dc[:, :d]
            dx2p = dx2p + dc[:, d:]
        dwa = dx1p.T @ f["x1"]
        dba = dx1p.sum(axis=0)
        dwl = dx2p.T @ f["x2"]
        dbl = dx2p.sum(axis=0)
        return [dwa, dba, dwl, dbl, dwg, dbg, *head_grads]

    def save(self, path) -> None:
        save_params(path, [(self.wa, self.ba), (self.wl, self.bl),
                           (self.wg, self.bg),
                           *zip(self.head.weights, self.head.biases)])

    @classmethod
    def load(cls, path, mode: str = "adaptive") -> "FusionGate":
        layers = load_params(path)
        if len(layers) < 4:
            raise DataError(f"{path}: too few layers for a fusion model")
        (wa, ba), (wl, bl), (wg, bg) = layers[0], layers[1], layers[2]
        head_layers = layers[3:]
        head = FeedForwardHead([w for w, _ in head_layers],
                               [b for _, b in head_layers])
        return cls((wa, ba), (wl, bl), (wg, bg), head, mode)


def train_fusion(gate: FusionGate, x1: np.ndarray, x2: np.ndarray, y,
                 cfg: TrainConfig):
    """Joint Adam over projections, gate, and head; early stop on val F1."""
    from selftalk.evalkit import macro_f1_from_labels
    from selftalk.heads import TrainHistory, _labels_to_idx, stratified_split

    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    y_idx = _labels_to_idx(y)
    if x1.shape[0] != x2.shape[0] or x1.shape[0] != y_idx.size or x1.shape[0] == 0:
        raise DataError("fusion training inputs misaligned or empty")

    rng = np.random.default_rng(cfg.seed)
    tr, va = stratified_split(y_idx, cfg.val_fraction, rng)
    x1v, x2v, yv = x1[va], x2[va], y_idx[va]
    x1, x2, y_idx = x1[tr], x2[tr], y_idx[tr]
    if x1v.shape[0] == 0:
        raise DataError("validation split came out empty; dataset too small")

    opt = Adam(gate.params(), lr=cfg.learning_rate, beta1=cfg.beta1,
               beta2=cfg.beta2, eps=cfg.eps)
    history = TrainHistory()
    best = None
    stale = 0
    n = x1.shape[0]
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            probs, cache = gate.forward_batch(x1[rows], x2[rows],
                                              train_mode=True, rng=rng)
            total_loss += cross_entropy(probs, y_idx[rows]) * rows.size
            opt.step(gate.backward(cache, ce_dlogits(probs, y_idx[rows])))
        val_probs, _ = gate.forward_batch(x1v, x2v)
        val_f1 = macro_f1_from_labels(yv, np.argmax(val_probs, axis=1))
        history.epochs.append({"epoch": epoch, "train_loss": total_loss / n,
                               "val_macro_f1": val_f1})
        if val_f1 > history.best_val_f1:
            history.best_val_f1 = val_f1
            history.best_epoch = epoch
            best = [p.copy() for p in gate.params()]
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    if best is not None:
        for p, bp in zip(gate.params(), best):
            p[...] = bp
    return history
