"""Embeddings, mean pooling, and locality-aware EMA adaptation.

When two utterances sit close in time the current embedding is blended
with the previous one, e_adapted = alpha*e_curr + (1-alpha)*e_prev. The
blend weight comes either from a fixed constant or from a small gate
network over the concatenated pair. Beyond the continuity window the
current embedding passes through untouched with alpha = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from selftalk.errors import DataError

CONTINUITY_WINDOW_S = 4.0
STATIC_ALPHA = 0.5
GATE_HIDDEN = 64


@dataclass(frozen=True)
class Embedding:
    values: np.ndarray
    source: str = "acoustic"
    t_start: float = 0.0
    t_end: float = 0.0

    def __post_init__(self) -> None:
        if self.values.ndim != 1:
            raise DataError("embedding must be a flat vector")
        if not np.all(np.isfinite(self.values)):
            raise DataError("embedding must be finite")
        if self.source not in ("acoustic", "linguistic"):
            raise DataError(f"unknown embedding source {self.source!r}")

    @property
    def dim(self) -> int:
        return self.values.size


def mean_pool(frame_vectors: np.ndarray | list) -> np.ndarray:
    """Arithmetic mean over a nonempty stack of equal-dim frame vectors."""
    arr = np.asarray(frame_vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DataError("mean_pool expects a nonempty 2-D stack of frame vectors")
    return arr.mean(axis=0)


def _sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-x))


class AlphaGateNet:
    """2-layer MLP mapping [e_curr; e_prev] to a scalar blend weight.

    Rectifier hidden layer, sigmoid output, so alpha stays strictly
    inside (0, 1). Zero initialization gives alpha = sigmoid(0) = 0.5,
    the static-blend starting point.
    """

    def __init__(self, dim: int, hidden: int = GATE_HIDDEN, rng: np.random.Generator | None = None):
        self.dim = dim
        self.hidden = hidden
        if rng is None:
            self.w1 = np.zeros((hidden, 2 * dim))
            self.w2 = np.zeros((1, hidden))
        else:
            self.w1 = rng.normal(0.0, 1.0 / np.sqrt(2 * dim), size=(hidden, 2 * dim))
            self.w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(1, hidden))
        self.b1 = np.zeros(hidden)
        self.b2 = np.zeros(1)

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def alpha(self, e_curr: np.ndarray, e_prev: np.ndarray) -> float:
        return self.forward(e_curr, e_prev)[0]

    def forward(self, e_curr: np.ndarray, e_prev: np.ndarray) -> tuple[float, dict]:
        """Returns (alpha, cache for backward)."""
        if e_curr.shape != e_prev.shape or e_curr.size != self.dim:
            raise DataError("gate input dims do not match network")
        x = np.concatenate([e_curr, e_prev])
        z1 = self.w1 @ x + self.b1
        h = np.maximum(z1, 0.0)
        z2 = float((self.w2 @ h + self.b2)[0])
        a = float(_sigmoid(z2))
        return a, {"x": x, "z1": z1, "h": h, "alpha": a}

    def backward(self, cache: dict, dalpha: float) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of a scalar loss given dL/dalpha.

        Returns ([dw1, db1, dw2, db2], dL/dx) with x the concatenated
        input, so callers can split dx into current/previous parts.
        """
        a = cache["alpha"]
        dz2 = dalpha * a * (1.0 - a)
        dw2 = dz2 * cache["h"][None, :]
        db2 = np.array([dz2])
        dh = dz2 * self.w2[0]
        dz1 = dh * (cache["z1"] > 0.0)
        dw1 = np.outer(dz1, cache["x"])
        db1 = dz1
        dx = self.w1.T @ dz1
        return [dw1, db1, dw2, db2], dx


def adapt(
    e_curr: Embedding,
    e_prev: Embedding | None,
    gap_s: float,
    gate: AlphaGateNet,
    window_s: float = CONTINUITY_WINDOW_S,
) -> tuple[Embedding, float]:
    """Adaptive EMA blend; passthrough with alpha = 1 beyond the window.

    The boundary is inclusive: gap_s equal to window_s still blends.
    """
    if e_prev is None or gap_s > window_s:
        return e_curr, 1.0
    if e_prev.dim != e_curr.dim:
        raise DataError(f"embedding dims differ: {e_curr.dim} vs {e_prev.dim}")
    a, _ = gate.forward(e_curr.values, e_prev.values)
    blended = a * e_curr.values + (1.0 - a) * e_prev.values
    out = Embedding(blended, e_curr.source, e_curr.t_start, e_curr.t_end)
    return out, a


def adapt_static(
    e_curr: Embedding,
    e_prev: Embedding | None,
    gap_s: float,
    alpha: float = STATIC_ALPHA,
    window_s: float = CONTINUITY_WINDOW_S,
) -> tuple[Embedding, float]:
    """Same branch rule as adapt with a fixed blend weight."""
    if e_prev is None or gap_s > window_s:
        return e_curr, 1.0
    if e_prev.dim != e_curr.dim:
        raise DataError(f"embedding dims differ: {e_curr.dim} vs {e_prev.dim}")
    blended = alpha * e_curr.values + (1.0 - alpha) * e_prev.values
    out = Embedding(blended, e_curr.source, e_curr.t_start, e_curr.t_end)
    return out, alpha


def train_gate(gate: AlphaGateNet, head, samples: list[tuple], cfg) -> object:
    """Train the gate jointly with a classifier head by backprop through
    the blend weight.

    samples: (e_curr, e_prev or None, gap_s, label index) tuples. Items
    outside the continuity window pass through unblended and contribute
    no gate gradient, mirroring inference.
    """
    from selftalk.evalkit import macro_f1_from_labels
    from selftalk.heads import Adam, TrainHistory, ce_dlogits, cross_entropy

    if not samples:
        raise DataError("gate training needs samples")
    rng = np.random.default_rng(cfg.seed)
    order_all = rng.permutation(len(samples))
    n_val = max(1, int(round(cfg.val_fraction * len(samples))))
    if n_val >= len(samples):
        raise DataError("gate training set too small to hold out validation")
    val_rows = order_all[:n_val]
    train_rows = order_all[n_val:]

    params = [*gate.params(), *head.params()]
    opt = Adam(params, lr=cfg.learning_rate, beta1=cfg.beta1,
               beta2=cfg.beta2, eps=cfg.eps)
    history = TrainHistory()
    best = None
    stale = 0

    def blended(sample):
        e_curr, e_prev, gap, _ = sample
        if e_prev is None or gap > CONTINUITY_WINDOW_S:
            return e_curr, None
        a, gcache = gate.forward(e_curr, e_prev)
        return a * e_curr + (1.0 - a) * e_prev, gcache

    def validate() -> float:
        truths, preds = [], []
        for row in val_rows:
            sample = samples[row]
            vec, _ = blended(sample)
            probs, _ = head.forward_batch(vec[None, :])
            preds.append(int(np.argmax(probs[0])))
            truths.append(int(sample[3]))
        return macro_f1_from_labels(truths, preds)

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(train_rows)
        total_loss = 0.0
        for start in range(0, order.size, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            acc = [np.zeros_like(p) for p in params]
            for row in rows:
                e_curr, e_prev, gap, y = samples[row]
                vec, gcache = blended(samples[row])
                probs, hcache = head.forward_batch(vec[None, :],
                                                   train_mode=True, rng=rng)
                total_loss += cross_entropy(probs, np.array([y]))
                dlogits = ce_dlogits(probs, np.array([y]))
                hgrads = head.backward(hcache, dlogits)
                if gcache is not None:
                    dvec = head.input_gradient(hcache, dlogits)[0]
                    dalpha = float(np.dot(dvec, e_curr - e_prev))
                    ggrads, _ = gate.backward(gcache, dalpha)
                else:
                    ggrads = [np.zeros_like(p) for p in gate.params()]
                for slot, g in zip(acc, [*ggrads, *hgrads]):
                    slot += g
            opt.step([g / rows.size for g in acc])
        val_f1 = validate()
        history.epochs.append({"epoch": epoch,
                               "train_loss": total_loss / order.size,
                               "val_macro_f1": val_f1})
        if val_f1 > history.best_val_f1:
            history.best_val_f1 = val_f1
            history.best_epoch = epoch
            best = [p.copy() for p in params]
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    if best is not None:
        for p, bp in zip(params, best):
            p[...] = bp
    return history


@dataclass
class AdaptationState:
    """Per-session carry of the previous embedding and its end time.

    By default the adapted embedding is what gets cached for the next
    step; set cache_raw to carry the unadapted one instead.
    """

    cache_raw: bool = False
    _prev: Embedding | None = None
    _prev_t_end: float | None = None

    def step(
        self,
        e_curr: Embedding,
        gate: AlphaGateNet | None,
        static_alpha: float | None = None,
        window_s: float = CONTINUITY_WINDOW_S,
    ) -> tuple[Embedding, float]:
        if self._prev_t_end is None:
            gap = float("inf")
        else:
            gap = e_curr.t_start - self._prev_t_end
        if static_alpha is not None:
            out, a = adapt_static(e_curr, self._prev, gap, alpha=static_alpha, window_s=window_s)
        else:
            if gate is None:
                raise DataError("adaptive mode needs a gate network")
            out, a = adapt(e_curr, self._prev, gap, gate, window_s=window_s)
        self._prev = e_curr if self.cache_raw else out
        self._prev_t_end = e_curr.t_end
        return out, a
