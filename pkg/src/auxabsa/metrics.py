"""Multi-label and multiclass evaluation metrics.

Multi-label inputs are ``(N, C)`` binary indicator arrays (see
:func:`binarize`). Classes with a zero denominator contribute 0 to macro
averages.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .corpus import POLARITIES, AspectInventory


def binarize(sets: Iterable[Iterable[str]], inventory: AspectInventory) -> np.ndarray:
    return np.array([inventory.encode(s) for s in sets], dtype=np.int64).reshape(-1, inventory.C)


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _counts(gold, pred):
    gold = np.asarray(gold, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    if gold.shape != pred.shape or gold.ndim != 2 or gold.shape[0] == 0:
        raise ValueError(f"expected matching non-empty (N, C) arrays, got {gold.shape} and {pred.shape}")
    tp = (gold & pred).sum(0)
    fp = (~gold & pred).sum(0)
    fn = (gold & ~pred).sum(0)
    return tp, fp, fn


def _f1(tp, fp, fn):
    return _safe_div(2 * tp, 2 * tp + fp + fn)


def multilabel_f1(gold, pred, average: str = "macro") -> float:
    tp, fp, fn = _counts(gold, pred)
    if average == "macro":
        return float(_f1(tp, fp, fn).mean())
    if average == "micro":
        return float(_f1(tp.sum(), fp.sum(), fn.sum()))
    raise ValueError(f"unknown averaging {average!r}")


def sample_jaccard(gold, pred) -> float:
    gold = np.asarray(gold, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    _counts(gold, pred)
    inter = (gold & pred).sum(1)
    union = (gold | pred).sum(1)
    per_example = np.where(union == 0, 1.0, _safe_div(inter, union))
    return float(per_example.mean())


def multilabel_precision_recall(gold, pred) -> tuple[float, float]:
    """Macro-averaged precision and recall."""
    tp, fp, fn = _counts(gold, pred)
    return float(_safe_div(tp, tp + fp).mean()), float(_safe_div(tp, tp + fn).mean())


def _class_ids(labels: Sequence) -> np.ndarray:
    return np.array([POLARITIES.index(l) if isinstance(l, str) else int(l) for l in labels])


def multiclass_f1(gold: Sequence, pred: Sequence, average: str = "macro", n_classes: int = 3) -> float:
    """F1 over polarity classes; ``micro`` equals accuracy for single-label data."""
    g, p = _class_ids(gold), _class_ids(pred)
    if len(g) != len(p) or len(g) == 0:
        raise ValueError("gold and predictions must be non-empty and equally long")
    if average == "micro":
        return float((g == p).mean())
    if average != "macro":
        raise ValueError(f"unknown averaging {average!r}")
    classes = np.arange(n_classes)
    tp = ((g[:, None] == classes) & (p[:, None] == classes)).sum(0)
    fp = ((g[:, None] != classes) & (p[:, None] == classes)).sum(0)
    fn = ((g[:, None] == classes) & (p[:, None] != classes)).sum(0)
    return float(_f1(tp, fp, fn).mean())


def detection_report(gold, pred) -> dict:
    precision, recall = multilabel_precision_recall(gold, pred)
    return {
        "f1_macro": multilabel_f1(gold, pred, "macro"),
        "f1_micro": multilabel_f1(gold, pred, "micro"),
        "jaccard": sample_jaccard(gold, pred),
        "precision": precision,
        "recall": recall,
    }


def sentiment_report(gold, pred) -> dict:
    return {
        "f1_micro": multiclass_f1(gold, pred, "micro"),
        "f1_macro": multiclass_f1(gold, pred, "macro"),
    }
