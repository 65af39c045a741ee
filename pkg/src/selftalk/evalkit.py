"""Evaluation: LOSO folds, confusion-matrix metrics, margin histograms,
external-label mapping, and embedding-distance reporting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from selftalk.errors import DataError
from selftalk.labels import CLASSES, NEGATIVE, OTHERS, POSITIVE
from selftalk.manifest import Utterance

EMOTION_MAP = {
    "angry": NEGATIVE,
    "disgusted": NEGATIVE,
    "fearful": NEGATIVE,
    "sad": NEGATIVE,
    "happy": POSITIVE,
    "surprised": POSITIVE,
    "neutral": OTHERS,
    "other": OTHERS,
    "unknown": OTHERS,
}

SENTIMENT_MAP = {
    "negative": NEGATIVE,
    "positive": POSITIVE,
    "neutral": OTHERS,
}


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts, rows = truth, cols = predicted."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        c = self.counts
        if c.shape != (len(CLASSES), len(CLASSES)):
            raise DataError(f"confusion matrix must be {len(CLASSES)}x{len(CLASSES)}")
        if np.any(c < 0) or not np.issubdtype(c.dtype, np.integer):
            raise DataError("confusion matrix needs nonnegative integer counts")

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "ConfusionMatrix":
        if len(y_true) != len(y_pred):
            raise DataError("label sequences differ in length")
        c = np.zeros((len(CLASSES), len(CLASSES)), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            ti = t if isinstance(t, (int, np.integer)) else CLASSES.index(t)
            pi = p if isinstance(p, (int, np.integer)) else CLASSES.index(p)
            c[ti, pi] += 1
        return cls(c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def metrics(cm: ConfusionMatrix) -> dict:
    """Per-class precision/recall/F1 plus macro averages.

    Zero denominators resolve to 0 rather than NaN: a class never
    predicted has precision 0, a class never seen has recall 0.
    """
    c = cm.counts.astype(np.float64)
    per_class = {}
    precs, recs, f1s = [], [], []
    for i, name in enumerate(CLASSES):
        tp = c[i, i]
        pred = c[:, i].sum()
        truth = c[i, :].sum()
        prec = tp / pred if pred > 0 else 0.0
        rec = tp / truth if truth > 0 else 0.0
        f1 = 2 * prec * rec / (prec + rec) if (prec + rec) > 0 else 0.0
        per_class[name] = {"precision": prec, "recall": rec, "f1": f1,
                           "support": int(truth)}
        precs.append(prec)
        recs.append(rec)
        f1s.append(f1)
    return {
        "per_class": per_class,
        "macro_precision": float(np.mean(precs)),
        "macro_recall": float(np.mean(recs)),
        "macro_f1": float(np.mean(f1s)),
        "accuracy": float(np.trace(c) / c.sum()) if c.sum() > 0 else 0.0,
    }


def macro_f1_from_labels(y_true, y_pred) -> float:
    return metrics(ConfusionMatrix.from_labels(y_true, y_pred))["macro_f1"]


@dataclass(frozen=True)
class FoldPlan:
    """One fold per participant: (held-out id, training ids)."""

    folds: tuple[tuple[str, tuple[str, ...]], ...]


def loso_folds(utterances: list[Utterance]) -> FoldPlan:
    participants = sorted({u.participant_id for u in utterances})
    if len(participants) < 2:
        raise DataError("leave-one-subject-out needs at least 2 participants")
    folds = []
    for held in participants:
        train = tuple(p for p in participants if p != held)
        folds.append((held, train))
    return FoldPlan(tuple(folds))


def margin_histogram(records: list[tuple[str, float]], bins: int = 20) -> dict:
    """Per-class histogram of least margins over [0, 1].

    records: (true label, margin) pairs, e.g. from stage traces.
    """
    if bins < 1:
        raise DataError("need at least one bin")
    edges = np.linspace(0.0, 1.0, bins + 1)
    out: dict = {"edges": edges.tolist(), "classes": {}}
    for name in CLASSES:
        vals = np.array([m for lab, m in records if lab == name])
        if np.any((vals < 0) | (vals > 1)):
            raise DataError("margins must lie in [0, 1]")
        hist, _ = np.histogram(vals, bins=edges)
        out["classes"][name] = hist.tolist()
    return out


def map_external_labels(source: str, label: str) -> str:
    """Fold an external emotion or sentiment label into the 3-class set."""
    table = {"emotion": EMOTION_MAP, "sentiment": SENTIMENT_MAP}.get(source)
    if table is None:
        raise DataError(f"unknown label source {source!r}")
    key = label.strip().lower()
    if key not in table:
        raise DataError(f"unmapped {source} label {label!r}")
    return table[key]


def mean_intra_class_distance(embeddings_by_class: dict[str, list[np.ndarray]]) -> dict[str, float]:
    """Mean pairwise Euclidean distance within each class; 0 when < 2 vectors."""
    out: dict[str, float] = {}
    for name, vecs in embeddings_by_class.items():
        n = len(vecs)
        if n < 2:
            out[name] = 0.0
            continue
        acc = 0.0
        pairs = 0
        for i in range(n):
            for j in range(i + 1, n):
                acc += float(np.linalg.norm(vecs[i] - vecs[j]))
                pairs += 1
        out[name] = acc / pairs
    return out


def embedding_distance_report(before: dict[str, list[np.ndarray]],
                              after: dict[str, list[np.ndarray]]) -> list[dict]:
    """Rows of (class, distance before, distance after, delta)."""
    d_before = mean_intra_class_distance(before)
    d_after = mean_intra_class_distance(after)
    rows = []
    for name in CLASSES:
        b = d_before.get(name, 0.0)
        a = d_after.get(name, 0.0)
        rows.append({"class": name, "before": b, "after": a, "delta": a - b})
    return rows
