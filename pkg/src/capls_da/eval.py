"""Baselines and experiment protocols built on top of the two pipelines."""

import itertools
import logging
from collections.abc import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist

from capls_da.capls import SelectionMode, UdaResult, run_uda
from capls_da.config import DEFAULT_ITERATIONS, DEFAULT_SUBSPACE_DIM, SolverConfig
from capls_da.data import DatasetBundle
from capls_da.errors import DimensionMismatch, EmptyTrainingSet
from capls_da.metrics import confusion_matrix, mean_and_sem, per_class_accuracy, per_image_accuracy
from capls_da.preprocess import Domain, FeatureMatrix, preprocessing_fingerprint
from capls_da.slpp import LabeledDataset, concat

__all__ = [
    "all_domain_pairs",
    "confusion_matrix",
    "evaluate_domain_pairs",
    "mean_and_sem",
    "per_class_accuracy",
    "per_image_accuracy",
    "preprocessing_fingerprint",
    "run_baseline_1nn",
    "run_baseline_lda_subspace",
    "sensitivity_sweep",
]

SWEEP_DIMS = (16, 32, 64, 128, 256, 512)
SWEEP_ITERATIONS = (5, 10, 15, 20, 25, 30)

logger = logging.getLogger(__name__)


def run_baseline_1nn(
    source: LabeledDataset | None,
    target_labeled: LabeledDataset | None,
    test: FeatureMatrix,
) -> NDArray[np.int64]:
    """Label of the Euclidean-nearest training row; source and labelled target pooled, no alignment.

    argmin returns the first minimum, so distance ties go to the lowest training row.
    """
    parts = [part for part in (source, target_labeled) if part is not None and part.rows]
    if not parts:
        raise EmptyTrainingSet("The 1NN baseline needs at least one labelled training row.")
    train = concat(parts)
    if train.features.cols != test.cols:
        raise DimensionMismatch(f"Training rows have {train.features.cols} columns, test rows have {test.cols}.")
    nearest = np.argmin(cdist(test.data, train.x), axis=1)
    return train.labels[nearest]


def run_baseline_lda_subspace(
    source: LabeledDataset,
    target: FeatureMatrix,
    d_sub: int = DEFAULT_SUBSPACE_DIM,
    t_max: int = DEFAULT_ITERATIONS,
    *,
    selection: SelectionMode = "capls",
    solver: SolverConfig | None = None,
    zscore: bool = False,
    target_truth: ArrayLike | None = None,
) -> UdaResult:
    """The full CAPLS pipeline with the Fisher discriminant in place of SLPP."""
    return run_uda(
        source,
        target,
        d_sub,
        t_max,
        projection="lda",
        selection=selection,
        solver=solver,
        zscore=zscore,
        target_truth=target_truth,
    )


def sensitivity_sweep(
    source: LabeledDataset,
    target: FeatureMatrix,
    truth: ArrayLike,
    *,
    dims: Iterable[int] = SWEEP_DIMS,
    iterations: Iterable[int] = SWEEP_ITERATIONS,
    fixed_dim: int = DEFAULT_SUBSPACE_DIM,
    fixed_iterations: int = DEFAULT_ITERATIONS,
    solver: SolverConfig | None = None,
) -> dict[str, dict[int, float]]:
    """Final accuracy over a dim grid at fixed T, and over a T grid at fixed dim."""
    by_dim = {
        d: per_image_accuracy(run_uda(source, target, d, fixed_iterations, solver=solver).predicted, truth)
        for d in dims
    }
    by_iterations = {
        t: per_image_accuracy(run_uda(source, target, fixed_dim, t, solver=solver).predicted, truth)
        for t in iterations
    }
    return {"dim": by_dim, "iterations": by_iterations}


def all_domain_pairs(bundle: DatasetBundle) -> list[tuple[str, str]]:
    """Every ordered (source, target) pair of distinct domains."""
    return list(itertools.permutations(bundle.domains, 2))


def evaluate_domain_pairs(
    bundle: DatasetBundle,
    d_sub: int = DEFAULT_SUBSPACE_DIM,
    t_max: int = DEFAULT_ITERATIONS,
    *,
    solver: SolverConfig | None = None,
) -> dict[str, float]:
    """Per-image accuracy for each source->target task plus their average."""
    scores: dict[str, float] = {}
    for source_name, target_name in all_domain_pairs(bundle):
        target = bundle.domains[target_name]
        result = run_uda(
            bundle.domains[source_name],
            FeatureMatrix(target.x, Domain.TARGET),
            d_sub,
            t_max,
            solver=solver,
        )
        scores[f"{source_name}->{target_name}"] = per_image_accuracy(result.predicted, target.labels)
        logger.info("task done source=%s target=%s accuracy=%.4f", source_name, target_name, scores[f"{source_name}->{target_name}"])
    scores["average"] = float(np.mean(list(scores.values())))
    return scores
