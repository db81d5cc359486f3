"""Confusion matrices, unweighted average recall, and Fleiss' kappa."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import AbsentClass, InvalidCounts, LabelOutOfRange, LengthMismatch


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{y_true.size} true labels vs {y_pred.size} predictions")
    if y_true.size and (
        y_true.min() < 0 or y_true.max() >= n_classes or y_pred.min() < 0 or y_pred.max() >= n_classes
    ):
        raise LabelOutOfRange(f"labels must lie in [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def uar(cm: np.ndarray) -> float:
    """Mean over classes of per-class recall, counts[c][c] / row-sum(c).

    Counts are integers, so the mean is taken in exact rational arithmetic
    and rounded to float once at the end.
    """
    cm = np.asarray(cm)
    row_sums = cm.sum(axis=1)
    if np.any(row_sums == 0):
        empty = np.flatnonzero(row_sums == 0).tolist()
        raise AbsentClass(f"no true instance for class(es) {empty}; split is invalid")
    recalls = [Fraction(int(cm[c][c]), int(row_sums[c])) for c in range(cm.shape[0])]
    return float(sum(recalls) / len(recalls))


def fleiss_kappa(counts) -> float:
    """Chance-corrected agreement for a constant number of raters per item.

    counts[i][j] is the number of raters assigning item i to category j;
    every row must sum to the same n >= 2.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 2 or counts.shape[0] < 2:
        raise InvalidCounts("need an items-by-categories matrix with at least 2 items")
    row_sums = counts.sum(axis=1)
    n = row_sums[0]
    if n < 2 or np.any(row_sums != n):
        raise InvalidCounts("every item must be rated by the same n >= 2 raters")
    p_i = (np.sum(counts * counts, axis=1) - n) / (n * (n - 1))
    p_bar = float(np.mean(p_i))
    p_j = counts.sum(axis=0) / (counts.shape[0] * n)
    p_e = float(np.sum(p_j * p_j))
    if p_e >= 1.0:
        return 1.0 if p_bar >= 1.0 else 0.0
    return (p_bar - p_e) / (1.0 - p_e)


_KAPPA_BANDS = (
    (0.81, "almost perfect"),
    (0.61, "substantial"),
    (0.41, "moderate"),
    (0.21, "fair"),
    (0.0, "slight"),
)


def kappa_interpretation(kappa: float) -> str:
    """Conventional agreement band for a kappa value (0.41-0.60 = moderate)."""
    for lo, name in _KAPPA_BANDS:
        if kappa >= lo:
            return name
    return "poor"
