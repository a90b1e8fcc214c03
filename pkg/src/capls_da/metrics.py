"""Scoring functions shared by the unsupervised and zero-shot conditions."""

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import sem

from capls_da.errors import EmptyTestClass, InputError, LabelOutOfRange, LengthMismatch


def _aligned(predicted: ArrayLike, truth: ArrayLike) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    pred = np.asarray(predicted, dtype=np.int64).reshape(-1)
    true = np.asarray(truth, dtype=np.int64).reshape(-1)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{pred.shape[0]} predictions for {true.shape[0]} ground-truth labels.")
    if pred.size == 0:
        raise LengthMismatch("Cannot score an empty prediction set.")
    return pred, true


def per_image_accuracy(predicted: ArrayLike, truth: ArrayLike) -> float:
    pred, true = _aligned(predicted, truth)
    return float(np.mean(pred == true))


def per_class_accuracy(predicted: ArrayLike, truth: ArrayLike, classes: ArrayLike | None = None) -> dict[int, float]:
    """Accuracy restricted to the rows of each class; every requested class must have rows."""
    pred, true = _aligned(predicted, truth)
    wanted = np.unique(true) if classes is None else np.asarray(classes, dtype=np.int64)
    scores: dict[int, float] = {}
    for label in wanted.tolist():
        rows = true == label
        if not rows.any():
            raise EmptyTestClass(f"Class {label} has no test rows.")
        scores[label] = float(np.mean(pred[rows] == label))
    return scores


def confusion_matrix(predicted: ArrayLike, truth: ArrayLike, n_classes: int) -> NDArray[np.int64]:
    """Entry (i, j) counts rows with truth i predicted as j."""
    pred, true = _aligned(predicted, truth)
    for name, labels in (("prediction", pred), ("truth", true)):
        if labels.min() < 0 or labels.max() >= n_classes:
            raise LabelOutOfRange(f"A {name} label lies outside [0, {n_classes}).")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    return counts


def harmonic_mean(acc_known: float, acc_unseen: float) -> float:
    if acc_known + acc_unseen == 0:
        return 0.0
    return 2.0 * acc_known * acc_unseen / (acc_known + acc_unseen)


def mean_and_sem(values: ArrayLike) -> tuple[float, float]:
    """Mean and standard error of the mean (0 for a single value)."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise InputError("Cannot aggregate an empty list of values.")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(sem(arr))
