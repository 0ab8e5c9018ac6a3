"""Evaluation metrics: MSE, R^2, accuracy, one-vs-rest AUC (midrank ties), cross-entropy."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DimensionError

PROB_CLAMP = 1e-12


def _weights(w, n):
    return np.ones(n) if w is None else np.asarray(w, dtype=np.float64)


def mse(pred, y, weights=None) -> float:
    pred, y = np.asarray(pred, dtype=np.float64), np.asarray(y, dtype=np.float64)
    w = _weights(weights, len(y))
    return float(np.sum(w * (pred - y) ** 2) / w.sum())


def r2(pred, y, weights=None) -> float | None:
    pred, y = np.asarray(pred, dtype=np.float64), np.asarray(y, dtype=np.float64)
    w = _weights(weights, len(y))
    ybar = np.sum(w * y) / w.sum()
    sst = np.sum(w * (y - ybar) ** 2)
    if sst == 0:
        return None
    return float(1.0 - np.sum(w * (y - pred) ** 2) / sst)


def auc(scores, labels, weights=None) -> float | None:
    """Area under the ROC curve via the (weighted) rank statistic.

    Tied scores contribute one half per positive/negative pair, which is the
    midrank convention.  Returns None when only one class is present.
    """
    s = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels).astype(bool)
    w = _weights(weights, len(s))
    if len(lab) != len(s):
        raise DimensionError("auc: scores and labels differ in length")
    wp_total = w[lab].sum()
    wn_total = w[~lab].sum()
    if wp_total == 0 or wn_total == 0:
        return None
    order = np.argsort(s, kind="mergesort")
    s, lab, w = s[order], lab[order], w[order]
    # tie groups in ascending score order
    starts = np.r_[0, np.flatnonzero(s[1:] != s[:-1]) + 1]
    pos_w = np.add.reduceat(np.where(lab, w, 0.0), starts)
    neg_w = np.add.reduceat(np.where(lab, 0.0, w), starts)
    neg_below = np.cumsum(neg_w) - neg_w
    total = np.sum(pos_w * neg_below) + 0.5 * np.sum(pos_w * neg_w)
    return float(total / (wp_total * wn_total))


def auc_ovr(probs, y, n_classes: int | None = None, weights=None) -> list:
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    k = probs.shape[1] if n_classes is None else n_classes
    return [auc(probs[:, c], y == c, weights) for c in range(k)]


def cross_entropy(probs, y, weights=None) -> float:
    """Weighted mean negative log-likelihood; ``probs`` is (n,) for binary or (n, K)."""
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(y)
    w = _weights(weights, len(y))
    if probs.ndim == 1:
        p = np.clip(probs, PROB_CLAMP, 1 - PROB_CLAMP)
        yy = y.astype(np.float64)
        per = -(yy * np.log(p) + (1 - yy) * np.log(1 - p))
    else:
        p = np.clip(probs[np.arange(len(y)), y.astype(np.int64)], PROB_CLAMP, 1 - PROB_CLAMP)
        per = -np.log(p)
    return float(np.sum(w * per) / w.sum())


def predicted_class(probs) -> np.ndarray:
    probs = np.asarray(probs)
    if probs.ndim == 1:
        return (probs > 0.5).astype(np.int64)
    return np.argmax(probs, axis=1)  # first maximum wins: ties go to the lowest index


def accuracy(probs, y, weights=None) -> float:
    y = np.asarray(y).astype(np.int64)
    w = _weights(weights, len(y))
    return float(np.sum(w * (predicted_class(probs) == y)) / w.sum())


def metrics(predictions, targets, weights=None, task: str = "regression") -> dict:
    """Metrics appropriate to ``task`` as a JSON-ready dict (undefined values are None)."""
    predictions = np.asarray(predictions, dtype=np.float64)
    n = len(targets)
    if predictions.shape[0] != n or (weights is not None and len(weights) != n):
        raise DimensionError("metrics: predictions, targets and weights must have matching lengths")
    if task == "regression":
        return {"n": n, "mse": mse(predictions, targets, weights), "r2": r2(predictions, targets, weights)}
    if task == "binary":
        return {"n": n, "accuracy": accuracy(predictions, targets, weights),
                "auc": auc(predictions, targets, weights),
                "cross_entropy": cross_entropy(predictions, targets, weights)}
    if task == "multiclass":
        return {"n": n, "accuracy": accuracy(predictions, targets, weights),
                "auc_ovr": auc_ovr(predictions, targets, predictions.shape[1], weights),
                "cross_entropy": cross_entropy(predictions, targets, weights)}
    raise ConfigError(f"unknown task {task!r}")
