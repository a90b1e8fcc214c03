"""Unsupervised domain adaptation with confidence-aware pseudo-label selection."""

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from capls_da.config import DEFAULT_ITERATIONS, DEFAULT_SUBSPACE_DIM, SolverConfig, resolve_subspace_dim
from capls_da.errors import ConfigError, DimensionMismatch, LengthMismatch
from capls_da.preprocess import FeatureMatrix, Preprocessor, preprocessing_fingerprint
from capls_da.slpp import LabeledDataset, ProjectionKind, concat, projection_learner
from capls_da.subspace import ConfidenceTable, SubspaceModel, fit_model, predict

SelectionMode = Literal["capls", "all"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Selection:
    """Pseudo-labelled target rows chosen for the next refit, grouped by class."""

    indices: NDArray[np.int64]
    labels: NDArray[np.int64]
    per_class: dict[int, int]
    empty_classes: tuple[int, ...] = ()

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return zip(self.indices.tolist(), self.labels.tolist(), strict=True)

    def __len__(self) -> int:
        return int(self.indices.shape[0])


def _validate_fraction(fraction: float | Fraction) -> None:
    if not 0 < fraction <= 1:
        raise ConfigError(f"Selection fraction must lie in (0, 1], got {fraction}.")


def select_confident(q: ConfidenceTable, fraction: float | Fraction) -> Selection:
    """Top ceil(fraction * |S_c|) members of every non-empty pseudo-label pool S_c.

    Members are ranked by their confidence for the pool's class; ties go to the lower row.
    """
    _validate_fraction(fraction)
    if not isinstance(fraction, Fraction):
        # 0.28 * 25 is 7.000000000000001 in floating point
        fraction = Fraction(fraction).limit_denominator()
    indices: list[NDArray[np.int64]] = []
    labels: list[NDArray[np.int64]] = []
    per_class: dict[int, int] = {}
    empty: list[int] = []

    for column, label in enumerate(q.classes.tolist()):
        members = np.flatnonzero(q.predicted == label)
        if members.size == 0:
            empty.append(label)
            per_class[label] = 0
            continue
        scores = q.q[members, column]
        ranked = members[np.lexsort((members, -scores))]
        take = math.ceil(fraction * members.size)
        indices.append(ranked[:take])
        labels.append(np.full(take, label, dtype=np.int64))
        per_class[label] = take

    if empty:
        logger.warning("empty pseudo-label pools classes=%s", empty)
    return Selection(
        indices=np.concatenate(indices) if indices else np.empty(0, dtype=np.int64),
        labels=np.concatenate(labels) if labels else np.empty(0, dtype=np.int64),
        per_class=per_class,
        empty_classes=tuple(empty),
    )


@dataclass(frozen=True, slots=True)
class IterationRecord:
    t: int
    fraction: float
    selected_total: int
    selected_per_class: dict[int, int]
    empty_classes: tuple[int, ...]
    changed_labels: int
    accuracy: float | None = None

    def to_dict(self) -> dict[str, object]:
        return {
            "t": self.t,
            "fraction": self.fraction,
            "selected_total": self.selected_total,
            "selected_per_class": {str(k): v for k, v in self.selected_per_class.items()},
            "empty_classes": list(self.empty_classes),
            "changed_labels": self.changed_labels,
            "accuracy": self.accuracy,
        }


@dataclass(slots=True)
class IterationState:
    """Mutable loop state: iteration index, current selection, model and trace."""

    t: int
    selected: Selection
    model: SubspaceModel
    confidences: ConfidenceTable
    trace: list[IterationRecord] = field(default_factory=list)

    def advance(self, selected: Selection, model: SubspaceModel, confidences: ConfidenceTable) -> int:
        changed = int(np.count_nonzero(confidences.predicted != self.confidences.predicted))
        self.t += 1
        self.selected = selected
        self.model = model
        self.confidences = confidences
        return changed


@dataclass(frozen=True, slots=True)
class UdaResult:
    model: SubspaceModel
    predicted: NDArray[np.int64]
    confidences: ConfidenceTable
    trace: tuple[IterationRecord, ...]
    subspace_dim: int
    preprocessing: dict[str, object]
    fingerprint: str


def _accuracy(predicted: NDArray[np.int64], truth: NDArray[np.int64] | None) -> float | None:
    if truth is None:
        return None
    return float(np.mean(predicted == truth))


def _check_truth(truth: ArrayLike | None, rows: int) -> NDArray[np.int64] | None:
    if truth is None:
        return None
    labels = np.asarray(truth, dtype=np.int64).reshape(-1)
    if labels.shape[0] != rows:
        raise LengthMismatch(f"{labels.shape[0]} evaluation labels for {rows} target rows.")
    return labels


def _prepare(
    source: LabeledDataset, target: FeatureMatrix, *, zscore: bool
) -> tuple[LabeledDataset, FeatureMatrix, Preprocessor]:
    if source.features.cols != target.cols:
        raise DimensionMismatch(f"Source has {source.features.cols} feature columns, target has {target.cols}.")
    preprocessor = Preprocessor.fit([source.features, target], zscore=zscore)
    return source.with_features(preprocessor.apply(source.features)), preprocessor.apply(target), preprocessor


def run_uda(
    source: LabeledDataset,
    target: FeatureMatrix,
    d_sub: int = DEFAULT_SUBSPACE_DIM,
    t_max: int = DEFAULT_ITERATIONS,
    *,
    projection: ProjectionKind = "slpp",
    selection: SelectionMode = "capls",
    solver: SolverConfig | None = None,
    zscore: bool = False,
    target_truth: ArrayLike | None = None,
) -> UdaResult:
    """Iterative self-training: P_0 from source, then T rounds of select, refit, re-predict.

    `target_truth` is only used to report accuracy in the trace, never for fitting.
    """
    if t_max < 1:
        raise ConfigError(f"Iteration count must be positive, got {t_max}.")
    if selection not in ("capls", "all"):
        raise ConfigError(f"Selection must be 'capls' or 'all', got {selection!r}.")
    solver = solver or SolverConfig()
    truth = _check_truth(target_truth, target.rows)
    learner = projection_learner(projection)

    src, tgt, preprocessor = _prepare(source, target, zscore=zscore)
    dim = resolve_subspace_dim(d_sub, d_in=src.features.cols, n_train=src.rows)
    mean_pool = [src.features, tgt]
    source_classes = src.classes()

    def refit(train: LabeledDataset) -> tuple[SubspaceModel, ConfidenceTable]:
        p = learner(train, dim, ridge=solver.ridge, residual_tol=solver.residual_tol, symmetry_tol=solver.symmetry_tol)
        model = fit_model(p, src, mean_pool, classes=source_classes)
        return model, predict(model, tgt, temperature=solver.temperature)

    model, table = refit(src)
    empty_selection = Selection(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), {})
    state = IterationState(t=0, selected=empty_selection, model=model, confidences=table)
    state.trace.append(
        IterationRecord(0, 0.0, 0, {}, (), 0, _accuracy(table.predicted, truth))
    )
    logger.info("capls start source=%s target=%s dim=%s iterations=%s projection=%s", src.rows, tgt.rows, dim, t_max, projection)

    for t in range(1, t_max + 1):
        fraction = Fraction(t, t_max) if selection == "capls" else Fraction(1)
        selected = select_confident(state.confidences, fraction)
        pseudo = LabeledDataset(tgt.with_data(tgt.data[selected.indices]), selected.labels)
        model, table = refit(concat([src, pseudo]))
        changed = state.advance(selected, model, table)
        record = IterationRecord(
            t=state.t,
            fraction=float(fraction),
            selected_total=len(selected),
            selected_per_class=selected.per_class,
            empty_classes=selected.empty_classes,
            changed_labels=changed,
            accuracy=_accuracy(table.predicted, truth),
        )
        state.trace.append(record)
        logger.info("capls iteration t=%s selected=%s changed=%s accuracy=%s", t, len(selected), changed, record.accuracy)

    return UdaResult(
        model=state.model,
        predicted=state.confidences.predicted,
        confidences=state.confidences,
        trace=tuple(state.trace),
        subspace_dim=dim,
        preprocessing=preprocessor.describe(),
        fingerprint=preprocessing_fingerprint(src.features, tgt),
    )


def run_source_only(
    source: LabeledDataset,
    target: FeatureMatrix,
    d_sub: int = DEFAULT_SUBSPACE_DIM,
    *,
    projection: ProjectionKind = "slpp",
    solver: SolverConfig | None = None,
    zscore: bool = False,
    target_truth: ArrayLike | None = None,
) -> UdaResult:
    """The no-adaptation baseline: P_0 from labelled source only, no pseudo-label rounds."""
    solver = solver or SolverConfig()
    truth = _check_truth(target_truth, target.rows)
    src, tgt, preprocessor = _prepare(source, target, zscore=zscore)
    dim = resolve_subspace_dim(d_sub, d_in=src.features.cols, n_train=src.rows)

    p = projection_learner(projection)(src, dim, ridge=solver.ridge, residual_tol=solver.residual_tol, symmetry_tol=solver.symmetry_tol)
    model = fit_model(p, src, [src.features, tgt])
    table = predict(model, tgt, temperature=solver.temperature)
    return UdaResult(
        model=model,
        predicted=table.predicted,
        confidences=table,
        trace=(IterationRecord(0, 0.0, 0, {}, (), 0, _accuracy(table.predicted, truth)),),
        subspace_dim=dim,
        preprocessing=preprocessor.describe(),
        fingerprint=preprocessing_fingerprint(src.features, tgt),
    )
