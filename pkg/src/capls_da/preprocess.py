"""Instance normalization applied to raw features before learning."""

import hashlib
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from capls_da.errors import DimensionMismatch, InputError, NonFiniteValue, ZeroVector

ZERO_NORM = 1e-12
STD_FLOOR = 1e-8


class Domain(StrEnum):
    SOURCE = "source"
    TARGET = "target"


@dataclass(frozen=True, slots=True)
class FeatureMatrix:
    """Row-wise instance features tagged with the domain they were drawn from."""

    data: NDArray[np.float64]
    domain: Domain = Domain.SOURCE

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionMismatch(f"Feature matrix must be 2-D and non-empty, got shape {data.shape}.")
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            row, col = (int(v) for v in bad[0])
            raise NonFiniteValue(row, col)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def cols(self) -> int:
        return int(self.data.shape[1])

    def with_data(self, data: ArrayLike) -> "FeatureMatrix":
        return FeatureMatrix(np.asarray(data, dtype=np.float64), self.domain)


@dataclass(frozen=True, slots=True)
class ZScoreStats:
    """Per-column mean and (floored) population standard deviation."""

    mean: NDArray[np.float64]
    std: NDArray[np.float64]

    def to_dict(self) -> dict[str, list[float]]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


def l2_normalize_rows(x: FeatureMatrix) -> FeatureMatrix:
    """Scale every row to unit Euclidean norm."""
    norms = np.linalg.norm(x.data, axis=1)
    zero_rows = np.flatnonzero(norms < ZERO_NORM)
    if zero_rows.size:
        raise ZeroVector(f"Row {int(zero_rows[0])} has (near) zero norm; the feature file is likely corrupt.")
    return x.with_data(x.data / norms[:, None])


def fit_zscore(x: NDArray[np.float64]) -> ZScoreStats:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    return ZScoreStats(mean=mean, std=np.where(std < STD_FLOOR, STD_FLOOR, std))


def zscore_columns(x: FeatureMatrix, stats: ZScoreStats | None = None) -> tuple[FeatureMatrix, ZScoreStats]:
    """Standardize columns with `stats`, computing them from `x` when omitted."""
    if stats is None:
        stats = fit_zscore(x.data)
    elif stats.mean.shape != (x.cols,) or stats.std.shape != (x.cols,):
        raise DimensionMismatch(f"Z-score stats cover {stats.mean.shape[0]} columns, matrix has {x.cols}.")
    return x.with_data((x.data - stats.mean) / stats.std), stats


@dataclass(frozen=True, slots=True)
class Preprocessor:
    """The pipeline's input normalization: optional z-score, then row l2 normalization.

    Z-score statistics are fit once on all training matrices jointly and reused for held-out data.
    """

    zscore: bool = False
    stats: ZScoreStats | None = None

    @classmethod
    def fit(cls, training: list[FeatureMatrix], *, zscore: bool = False) -> "Preprocessor":
        if not training:
            raise InputError("At least one training matrix is required to fit preprocessing.")
        if not zscore:
            return cls(zscore=False)
        widths = {m.cols for m in training}
        if len(widths) != 1:
            raise DimensionMismatch(f"Training matrices disagree on feature dimension: {sorted(widths)}.")
        stacked = np.vstack([m.data for m in training])
        return cls(zscore=True, stats=fit_zscore(stacked))

    def apply(self, x: FeatureMatrix) -> FeatureMatrix:
        if self.zscore:
            x, _ = zscore_columns(x, self.stats)
        return l2_normalize_rows(x)

    def describe(self) -> dict[str, object]:
        return {"l2_rows": True, "zscore": self.zscore, "zscore_fit": "joint-training" if self.zscore else None}


def preprocessing_fingerprint(*matrices: FeatureMatrix) -> str:
    """sha256 over the shapes and raw bytes of preprocessed inputs, in order."""
    digest = hashlib.sha256()
    for matrix in matrices:
        digest.update(f"{matrix.rows}x{matrix.cols};".encode())
        digest.update(np.ascontiguousarray(matrix.data, dtype="<f8").tobytes())
    return digest.hexdigest()
