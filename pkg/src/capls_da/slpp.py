"""Supervised similarity graph and joint-subspace projection learning.

Instances are stored row-wise (n x d), so the column-wise products X D X^T and
X L X^T + I of the objective become the d x d matrices X^T D X and X^T L X + ridge * I.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from capls_da.errors import ConfigError, DegenerateData, DimensionMismatch, LabelOutOfRange, LengthMismatch
from capls_da.linalg import RESIDUAL_TOL, SYMMETRY_TOL, solve_generalized_sym
from capls_da.preprocess import FeatureMatrix

logger = logging.getLogger(__name__)

ProjectionKind = Literal["slpp", "lda"]


@dataclass(frozen=True, slots=True)
class LabeledDataset:
    features: FeatureMatrix
    labels: NDArray[np.int64]

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != self.features.rows:
            raise LengthMismatch(f"{labels.shape[0]} labels for {self.features.rows} feature rows.")
        if labels.size and labels.min() < 0:
            raise LabelOutOfRange(f"Class labels must be non-negative, got {int(labels.min())}.")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def rows(self) -> int:
        return self.features.rows

    @property
    def x(self) -> NDArray[np.float64]:
        return self.features.data

    def classes(self) -> NDArray[np.int64]:
        return np.unique(self.labels)

    def subset(self, rows: ArrayLike) -> "LabeledDataset":
        index = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(self.features.with_data(self.x[index]), self.labels[index])

    def with_features(self, features: FeatureMatrix) -> "LabeledDataset":
        return LabeledDataset(features, self.labels)


def concat(parts: Sequence[LabeledDataset]) -> LabeledDataset:
    """Stack datasets row-wise; the result carries the first part's domain tag."""
    if not parts:
        raise DegenerateData("Nothing to concatenate.")
    widths = {part.features.cols for part in parts}
    if len(widths) != 1:
        raise DimensionMismatch(f"Datasets disagree on feature dimension: {sorted(widths)}.")
    features = FeatureMatrix(np.vstack([part.x for part in parts]), parts[0].features.domain)
    return LabeledDataset(features, np.concatenate([part.labels for part in parts]))


@dataclass(frozen=True, slots=True)
class SimilarityGraph:
    w: NDArray[np.float64]
    degree: NDArray[np.float64]
    laplacian: NDArray[np.float64]


@dataclass(frozen=True, slots=True)
class ProjectionMatrix:
    """Columns are the leading generalized eigenvectors, `eigenvalues` in matching order."""

    p: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]
    kind: ProjectionKind = "slpp"

    @property
    def d_in(self) -> int:
        return int(self.p.shape[0])

    @property
    def d_sub(self) -> int:
        return int(self.p.shape[1])


def build_similarity(data: LabeledDataset) -> SimilarityGraph:
    """Label-match graph: w[i][j] = 1 iff labels agree, whatever domain the rows came from."""
    labels = data.labels
    w = (labels[:, None] == labels[None, :]).astype(np.float64)
    degree = w.sum(axis=1)
    return SimilarityGraph(w=w, degree=degree, laplacian=np.diag(degree) - w)


def scatter_matrices(data: LabeledDataset, *, ridge: float = 1.0) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(X^T D X, X^T L X + ridge * I) from per-class sums, without forming the n x n graph.

    With the label-match graph, degree[i] is the size of i's class and X^T W X is the sum
    over classes of the outer product of that class's feature sum.
    """
    x = data.x
    classes, inverse, counts = np.unique(data.labels, return_inverse=True, return_counts=True)
    degree = counts[inverse].astype(np.float64)

    class_sums = np.zeros((classes.shape[0], x.shape[1]))
    np.add.at(class_sums, inverse, x)

    a = (x * degree[:, None]).T @ x
    b = a - class_sums.T @ class_sums + ridge * np.eye(x.shape[1])
    return (a + a.T) / 2.0, (b + b.T) / 2.0


def fisher_scatter_matrices(
    data: LabeledDataset, *, ridge: float = 1.0
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(between-class scatter, within-class scatter + ridge * I)."""
    x = data.x
    classes, inverse, counts = np.unique(data.labels, return_inverse=True, return_counts=True)
    if classes.shape[0] < 2:
        raise DegenerateData("LDA needs at least two classes; between-class scatter is zero.")

    class_means = np.zeros((classes.shape[0], x.shape[1]))
    np.add.at(class_means, inverse, x)
    class_means /= counts[:, None]

    offsets = class_means - x.mean(axis=0)
    between = (offsets * counts[:, None]).T @ offsets
    within_dev = x - class_means[inverse]
    within = within_dev.T @ within_dev + ridge * np.eye(x.shape[1])
    return (between + between.T) / 2.0, (within + within.T) / 2.0


def trace_ratio(p: NDArray[np.float64], a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    return float(np.trace(p.T @ a @ p) / np.trace(p.T @ b @ p))


def _require_instances(data: LabeledDataset) -> None:
    if data.rows < 2:
        raise DegenerateData(f"At least 2 labelled instances are required, got {data.rows}.")


def learn_projection(
    data: LabeledDataset,
    d_sub: int,
    *,
    ridge: float = 1.0,
    residual_tol: float = RESIDUAL_TOL,
    symmetry_tol: float = SYMMETRY_TOL,
) -> ProjectionMatrix:
    """SLPP: leading eigenvectors of X^T D X p = λ (X^T L X + ridge * I) p."""
    _require_instances(data)
    a, b = scatter_matrices(data, ridge=ridge)
    pairs = solve_generalized_sym(a, b, d_sub, residual_tol=residual_tol, symmetry_tol=symmetry_tol)
    logger.info("slpp projection learnt n=%s d_in=%s d_sub=%s top_eigenvalue=%.6g", data.rows, a.shape[0], d_sub, pairs.values[0])
    return ProjectionMatrix(p=pairs.vectors, eigenvalues=pairs.values, kind="slpp")


def learn_lda_projection(
    data: LabeledDataset,
    d_sub: int,
    *,
    ridge: float = 1.0,
    residual_tol: float = RESIDUAL_TOL,
    symmetry_tol: float = SYMMETRY_TOL,
) -> ProjectionMatrix:
    """Fisher discriminant: leading eigenvectors of S_b p = λ (S_w + ridge * I) p."""
    _require_instances(data)
    a, b = fisher_scatter_matrices(data, ridge=ridge)
    pairs = solve_generalized_sym(a, b, d_sub, residual_tol=residual_tol, symmetry_tol=symmetry_tol)
    logger.info("lda projection learnt n=%s d_in=%s d_sub=%s top_eigenvalue=%.6g", data.rows, a.shape[0], d_sub, pairs.values[0])
    return ProjectionMatrix(p=pairs.vectors, eigenvalues=pairs.values, kind="lda")


ProjectionLearner = Callable[..., ProjectionMatrix]

PROJECTION_LEARNERS: dict[str, ProjectionLearner] = {
    "slpp": learn_projection,
    "lda": learn_lda_projection,
}


def projection_learner(kind: str) -> ProjectionLearner:
    try:
        return PROJECTION_LEARNERS[kind]
    except KeyError:
        raise ConfigError(f"Projection must be one of: {', '.join(PROJECTION_LEARNERS)}; got {kind!r}.") from None
