"""Recognition in the learned subspace: projection, centering, class means and NCM prediction."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist
from scipy.special import softmax

from capls_da.errors import DegenerateClassMean, DimensionMismatch, EmptyClass, ZeroVector
from capls_da.preprocess import ZERO_NORM, FeatureMatrix
from capls_da.slpp import LabeledDataset, ProjectionMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SubspaceModel:
    """Immutable nearest-class-mean classifier living in the projected space."""

    projection: ProjectionMatrix
    train_mean: NDArray[np.float64]
    class_means: NDArray[np.float64]
    classes: NDArray[np.int64]

    @property
    def n_classes(self) -> int:
        return int(self.classes.shape[0])


@dataclass(frozen=True, slots=True)
class ConfidenceTable:
    """Softmax class probabilities; column j belongs to `classes[j]`."""

    q: NDArray[np.float64]
    predicted: NDArray[np.int64]
    distances: NDArray[np.float64]
    classes: NDArray[np.int64]

    def column_of(self, label: int) -> int:
        return int(np.searchsorted(self.classes, label))


def project(p: ProjectionMatrix, x: FeatureMatrix) -> NDArray[np.float64]:
    """z_i = P^T x_i for every row."""
    if x.cols != p.d_in:
        raise DimensionMismatch(f"Features have {x.cols} columns, projection expects {p.d_in}.")
    return x.data @ p.p


def center_and_normalize(z: NDArray[np.float64], train_mean: ArrayLike) -> NDArray[np.float64]:
    mean = np.asarray(train_mean, dtype=np.float64)
    if mean.shape != (z.shape[1],):
        raise DimensionMismatch(f"Mean has shape {mean.shape}, projections have {z.shape[1]} columns.")
    centered = z - mean
    norms = np.linalg.norm(centered, axis=1)
    zero_rows = np.flatnonzero(norms < ZERO_NORM)
    if zero_rows.size:
        raise ZeroVector(f"Projected row {int(zero_rows[0])} coincides with the training mean.")
    return centered / norms[:, None]


def fit_model(
    p: ProjectionMatrix,
    train: LabeledDataset,
    mean_pool: Sequence[FeatureMatrix],
    *,
    classes: ArrayLike | None = None,
) -> SubspaceModel:
    """Fit the mean z̄ over `mean_pool` and one unit-norm class mean per class from `train`."""
    pool = [project(p, m) for m in mean_pool] or [project(p, train.features)]
    train_mean = np.vstack(pool).mean(axis=0)
    z = center_and_normalize(project(p, train.features), train_mean)

    wanted = train.classes() if classes is None else np.unique(np.asarray(classes, dtype=np.int64))
    class_means = np.empty((wanted.shape[0], p.d_sub))
    for row, label in enumerate(wanted):
        members = train.labels == label
        if not members.any():
            raise EmptyClass(f"Class {int(label)} has no labelled instance to form its mean.")
        mean = z[members].mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < ZERO_NORM:
            raise DegenerateClassMean(f"Mean of class {int(label)} vanishes after centering.")
        class_means[row] = mean / norm

    logger.debug("subspace model fit classes=%s train_rows=%s pool_rows=%s", wanted.shape[0], train.rows, sum(len(block) for block in pool))
    return SubspaceModel(projection=p, train_mean=train_mean, class_means=class_means, classes=wanted)


def predict(model: SubspaceModel, x: FeatureMatrix, *, temperature: float = 1.0) -> ConfidenceTable:
    """Nearest class mean with softmax(-distance / temperature) confidences.

    argmin picks the first minimum, so ties go to the lowest class id.
    """
    z = center_and_normalize(project(model.projection, x), model.train_mean)
    distances = cdist(z, model.class_means)
    q = softmax(-distances / temperature, axis=1)
    predicted = model.classes[np.argmin(distances, axis=1)]
    return ConfidenceTable(q=q, predicted=predicted, distances=distances, classes=model.classes)
