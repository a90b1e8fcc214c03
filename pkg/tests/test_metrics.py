"""Tests for accuracy, confusion and aggregation helpers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capls_da.errors import EmptyTestClass, InputError, LabelOutOfRange, LengthMismatch
from capls_da.metrics import (
    confusion_matrix,
    harmonic_mean,
    mean_and_sem,
    per_class_accuracy,
    per_image_accuracy,
)


def test_per_image_accuracy() -> None:
    assert per_image_accuracy([0, 1, 2, 2], [0, 1, 1, 2]) == 0.75


def test_per_image_accuracy_rejects_misaligned_input() -> None:
    with pytest.raises(LengthMismatch):
        per_image_accuracy([0, 1], [0])
    with pytest.raises(LengthMismatch):
        per_image_accuracy([], [])


def test_per_class_accuracy_weights_classes_equally() -> None:
    scores = per_class_accuracy([0, 0, 0, 1, 1], [0, 0, 0, 0, 1])

    assert scores == {0: 0.75, 1: 1.0}


def test_per_class_accuracy_requires_rows_for_every_class() -> None:
    with pytest.raises(EmptyTestClass, match="Class 5"):
        per_class_accuracy([0, 1], [0, 1], classes=[0, 5])


def test_confusion_matrix_counts() -> None:
    counts = confusion_matrix([0, 1, 1, 2], [0, 0, 1, 2], n_classes=3)

    np.testing.assert_array_equal(counts, [[1, 1, 0], [0, 1, 0], [0, 0, 1]])
    assert counts.sum() == 4


def test_confusion_matrix_rejects_out_of_range_labels() -> None:
    with pytest.raises(LabelOutOfRange):
        confusion_matrix([0, 3], [0, 1], n_classes=3)


@pytest.mark.parametrize(
    ("known", "unseen", "expected"),
    [
        (1.0, 1.0, 1.0),
        (0.8, 0.6, 2 * 0.48 / 1.4),
        (0.9, 0.0, 0.0),
        (0.0, 0.0, 0.0),
    ],
)
def test_harmonic_mean(known: float, unseen: float, expected: float) -> None:
    assert harmonic_mean(known, unseen) == pytest.approx(expected)


def test_mean_and_sem() -> None:
    mean, err = mean_and_sem([1.0, 2.0, 3.0, 4.0])

    assert mean == pytest.approx(2.5)
    assert err == pytest.approx(np.std([1.0, 2.0, 3.0, 4.0], ddof=1) / math.sqrt(4))


def test_mean_and_sem_single_value() -> None:
    assert mean_and_sem([0.7]) == (0.7, 0.0)


def test_mean_and_sem_rejects_empty_input() -> None:
    with pytest.raises(InputError):
        mean_and_sem([])


@settings(max_examples=50, deadline=None)
@given(
    pairs=st.lists(
        st.tuples(st.integers(min_value=0, max_value=4), st.integers(min_value=0, max_value=4)),
        min_size=1,
        max_size=40,
    )
)
def test_confusion_rows_count_each_true_class(pairs: list[tuple[int, int]]) -> None:
    predicted, truth = (np.array(column) for column in zip(*pairs, strict=True))

    counts = confusion_matrix(predicted, truth, 5)

    np.testing.assert_array_equal(counts.sum(axis=1), np.bincount(truth, minlength=5))
    np.testing.assert_array_equal(counts.sum(axis=0), np.bincount(predicted, minlength=5))
