"""Domain adaptation under the generalized zero-shot condition.

Labelled target data exists only for the known classes; test rows may belong to any class and
are never seen while fitting.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from capls_da.config import DEFAULT_SUBSPACE_DIM, SolverConfig, resolve_subspace_dim
from capls_da.errors import ConfigError, DimensionMismatch, InputError, InsufficientClassSize, UnknownClassInTargetTrain
from capls_da.metrics import harmonic_mean, mean_and_sem, per_class_accuracy
from capls_da.preprocess import FeatureMatrix, Preprocessor, preprocessing_fingerprint
from capls_da.slpp import LabeledDataset, ProjectionKind, concat, projection_learner
from capls_da.subspace import ConfidenceTable, SubspaceModel, fit_model, predict

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ZslSplit:
    known_classes: tuple[int, ...]
    unseen_classes: tuple[int, ...]
    target_train_rows: tuple[int, ...]
    target_test_rows: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.known_classes or not self.unseen_classes:
            raise ConfigError(
                f"A split needs at least one known and one unseen class, got {len(self.known_classes)} known "
                f"and {len(self.unseen_classes)} unseen."
            )
        overlap = set(self.known_classes) & set(self.unseen_classes)
        if overlap:
            raise InputError(f"Classes {sorted(overlap)} are both known and unseen.")
        shared_rows = set(self.target_train_rows) & set(self.target_test_rows)
        if shared_rows:
            raise InputError(f"{len(shared_rows)} target rows are in both the train and test partitions.")

    @property
    def all_classes(self) -> tuple[int, ...]:
        return tuple(sorted(self.known_classes + self.unseen_classes))

    def validate_against(self, labels: ArrayLike) -> None:
        """Check the split against the full labelled target it indexes."""
        target = np.asarray(labels, dtype=np.int64)
        rows = np.asarray(self.target_train_rows + self.target_test_rows, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= target.shape[0]):
            raise InputError(f"Split references rows outside the {target.shape[0]} target rows.")
        if set(np.unique(target).tolist()) != set(self.all_classes):
            raise InputError("Split classes do not match the target label set.")
        stray = set(target[list(self.target_train_rows)].tolist()) - set(self.known_classes)
        if stray:
            raise InputError(f"Target training rows carry unseen classes {sorted(stray)}.")


@dataclass(frozen=True, slots=True)
class GzslMetrics:
    acc_known: float
    acc_unseen: float
    harmonic: float

    def to_dict(self) -> dict[str, float]:
        return {"acc_known": self.acc_known, "acc_unseen": self.acc_unseen, "harmonic": self.harmonic}


def make_split(labels: ArrayLike, n_known: int, seed: int, *, row_seed: int = 0) -> ZslSplit:
    """Random known/unseen class split plus a per-class half/half row split.

    The row split depends on `row_seed` only, so every class split shares one fixed
    train/test partition of the target rows; floor(n_c / 2) rows of each class are tested.
    """
    target = np.asarray(labels, dtype=np.int64).reshape(-1)
    classes, counts = np.unique(target, return_counts=True)
    if not 1 <= n_known < classes.shape[0]:
        raise ConfigError(f"Known class count must lie in [1, {classes.shape[0]}), got {n_known}.")
    small = classes[counts < 2]
    if small.size:
        raise InsufficientClassSize(f"Classes {small.tolist()} have fewer than 2 target instances.")

    known = np.sort(np.random.default_rng(seed).choice(classes, size=n_known, replace=False))
    unseen = np.setdiff1d(classes, known)

    row_rng = np.random.default_rng(row_seed)
    train_rows: list[int] = []
    test_rows: list[int] = []
    for label in classes.tolist():
        members = row_rng.permutation(np.flatnonzero(target == label))
        n_test = members.size // 2
        test_rows.extend(members[:n_test].tolist())
        if label in known:
            train_rows.extend(members[n_test:].tolist())

    return ZslSplit(
        known_classes=tuple(known.tolist()),
        unseen_classes=tuple(unseen.tolist()),
        target_train_rows=tuple(sorted(train_rows)),
        target_test_rows=tuple(sorted(test_rows)),
        seed=seed,
    )


@dataclass(frozen=True, slots=True)
class ZslModel:
    model: SubspaceModel
    preprocessor: Preprocessor
    subspace_dim: int
    fingerprint: str

    def predict(self, target_test: FeatureMatrix, *, temperature: float = 1.0) -> ConfidenceTable:
        return predict(self.model, self.preprocessor.apply(target_test), temperature=temperature)


@dataclass(frozen=True, slots=True)
class ZslResult:
    model: SubspaceModel
    predicted: NDArray[np.int64]
    confidences: ConfidenceTable
    subspace_dim: int
    preprocessing: dict[str, object]
    fingerprint: str


def fit_zsl(
    source: LabeledDataset,
    target_labeled: LabeledDataset | None,
    d_sub: int = DEFAULT_SUBSPACE_DIM,
    *,
    projection: ProjectionKind = "slpp",
    solver: SolverConfig | None = None,
    zscore: bool = False,
) -> ZslModel:
    """Learn P on source plus labelled target and fit class means over every source class."""
    solver = solver or SolverConfig()
    source_classes = source.classes()
    parts: list[LabeledDataset] = [source]
    if target_labeled is not None and target_labeled.rows:
        if target_labeled.features.cols != source.features.cols:
            raise DimensionMismatch(
                f"Source has {source.features.cols} feature columns, labelled target has {target_labeled.features.cols}."
            )
        unknown = np.setdiff1d(target_labeled.classes(), source_classes)
        if unknown.size:
            raise UnknownClassInTargetTrain(f"Labelled target classes {unknown.tolist()} do not occur in the source.")
        parts.append(target_labeled)

    preprocessor = Preprocessor.fit([part.features for part in parts], zscore=zscore)
    prepared = [part.with_features(preprocessor.apply(part.features)) for part in parts]
    train = concat(prepared)
    dim = resolve_subspace_dim(d_sub, d_in=train.features.cols, n_train=train.rows)

    p = projection_learner(projection)(train, dim, ridge=solver.ridge, residual_tol=solver.residual_tol, symmetry_tol=solver.symmetry_tol)
    model = fit_model(p, train, [part.features for part in prepared], classes=source_classes)
    logger.info("zsl model fit source=%s labelled_target=%s dim=%s classes=%s", source.rows, train.rows - source.rows, dim, model.n_classes)
    return ZslModel(
        model=model,
        preprocessor=preprocessor,
        subspace_dim=dim,
        fingerprint=preprocessing_fingerprint(*(part.features for part in prepared)),
    )


def run_zsl(
    source: LabeledDataset,
    target_labeled: LabeledDataset | None,
    target_test: FeatureMatrix,
    d_sub: int = DEFAULT_SUBSPACE_DIM,
    *,
    projection: ProjectionKind = "slpp",
    solver: SolverConfig | None = None,
    zscore: bool = False,
) -> ZslResult:
    """Single pass: fit on source and labelled target, then predict the test rows over all classes."""
    solver = solver or SolverConfig()
    fitted = fit_zsl(source, target_labeled, d_sub, projection=projection, solver=solver, zscore=zscore)
    table = fitted.predict(target_test, temperature=solver.temperature)
    return ZslResult(
        model=fitted.model,
        predicted=table.predicted,
        confidences=table,
        subspace_dim=fitted.subspace_dim,
        preprocessing=fitted.preprocessor.describe(),
        fingerprint=fitted.fingerprint,
    )


def split_target(target: LabeledDataset, split: ZslSplit) -> tuple[LabeledDataset | None, LabeledDataset]:
    """(labelled target training part or None, test part) for a split of `target`."""
    split.validate_against(target.labels)
    train = target.subset(split.target_train_rows) if split.target_train_rows else None
    return train, target.subset(split.target_test_rows)


def gzsl_metrics(predicted: ArrayLike, truth: ArrayLike, split: ZslSplit) -> GzslMetrics:
    """Mean per-class accuracy over known and unseen classes and their harmonic mean."""
    known = per_class_accuracy(predicted, truth, split.known_classes)
    unseen = per_class_accuracy(predicted, truth, split.unseen_classes)
    acc_known = float(np.mean(list(known.values())))
    acc_unseen = float(np.mean(list(unseen.values())))
    return GzslMetrics(acc_known=acc_known, acc_unseen=acc_unseen, harmonic=harmonic_mean(acc_known, acc_unseen))


def aggregate_metrics(runs: Sequence[GzslMetrics]) -> dict[str, dict[str, float]]:
    """Mean and standard error of each metric across splits."""
    summary: dict[str, dict[str, float]] = {}
    for key in ("acc_known", "acc_unseen", "harmonic"):
        mean, err = mean_and_sem([getattr(run, key) for run in runs])
        summary[key] = {"mean": mean, "sem": err}
    return summary
