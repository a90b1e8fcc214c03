"""Feature/label files, split files, experiment reports and the synthetic domain-shift generator.

Feature files come in two forms, chosen by suffix:

* ``.bin``: magic ``CPLS``, little-endian u32 rows, u32 cols, then row-major little-endian float64.
* anything else: CSV, one instance per line, ``%.17g`` values, no header.

Label files hold one base-10 integer per line.
"""

import logging
import math
import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from capls_da.errors import ConfigError, DimensionMismatch, InputError, IoError, ParseError, RowCountMismatch
from capls_da.preprocess import Domain, FeatureMatrix
from capls_da.slpp import LabeledDataset
from capls_da.zsl import ZslSplit

BINARY_MAGIC = b"CPLS"
BINARY_HEADER = struct.Struct("<4sII")
BINARY_DTYPE = np.dtype("<f8")

logger = logging.getLogger(__name__)


def _is_binary(path: Path) -> bool:
    return path.suffix.lower() == ".bin"


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as error:
        raise IoError(f"Cannot read {path}: {error.strerror or error}.") from error


def _write_bytes(path: Path, payload: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as error:
        raise IoError(f"Cannot write {path}: {error.strerror or error}.") from error


def _parse_binary(path: Path, payload: bytes) -> NDArray[np.float64]:
    if len(payload) < BINARY_HEADER.size:
        raise ParseError(str(path), 1, "file is shorter than the binary header")
    magic, rows, cols = BINARY_HEADER.unpack_from(payload)
    if magic != BINARY_MAGIC:
        raise ParseError(str(path), 1, f"bad magic bytes {magic!r}")
    expected = BINARY_HEADER.size + rows * cols * BINARY_DTYPE.itemsize
    if len(payload) != expected:
        raise ParseError(str(path), 1, f"expected {expected} bytes for {rows}x{cols}, found {len(payload)}")
    body = np.frombuffer(payload, dtype=BINARY_DTYPE, offset=BINARY_HEADER.size)
    return body.reshape(rows, cols).astype(np.float64)


def _decode_text(path: Path, payload: bytes) -> str:
    try:
        return payload.decode("utf-8")
    except UnicodeDecodeError as error:
        line = payload[: error.start].count(b"\n") + 1
        raise ParseError(str(path), line, f"invalid UTF-8 byte 0x{payload[error.start]:02x}") from error


def _parse_csv(path: Path, payload: bytes) -> NDArray[np.float64]:
    rows: list[list[float]] = []
    for number, line in enumerate(_decode_text(path, payload).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            values = [float(cell) for cell in line.split(",")]
        except ValueError as error:
            raise ParseError(str(path), number, str(error)) from error
        if rows and len(values) != len(rows[0]):
            raise ParseError(str(path), number, f"expected {len(rows[0])} values, found {len(values)}")
        rows.append(values)
    if not rows:
        raise ParseError(str(path), 1, "no feature rows")
    return np.asarray(rows, dtype=np.float64)


def load_feature_matrix(path: str | Path, domain: Domain = Domain.SOURCE) -> FeatureMatrix:
    """Parse an unlabelled feature file; non-finite values raise NonFiniteValue with coordinates."""
    path = Path(path)
    payload = _read_bytes(path)
    data = _parse_binary(path, payload) if _is_binary(path) else _parse_csv(path, payload)
    return FeatureMatrix(data, domain)


def load_labels(path: str | Path) -> NDArray[np.int64]:
    path = Path(path)
    labels: list[int] = []
    for number, line in enumerate(_decode_text(path, _read_bytes(path)).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            labels.append(int(line.strip(), 10))
        except ValueError as error:
            raise ParseError(str(path), number, str(error)) from error
    return np.asarray(labels, dtype=np.int64)


def load_features(features_path: str | Path, labels_path: str | Path, domain: Domain = Domain.SOURCE) -> LabeledDataset:
    features = load_feature_matrix(features_path, domain)
    labels = load_labels(labels_path)
    if labels.shape[0] != features.rows:
        raise RowCountMismatch(f"{labels_path} has {labels.shape[0]} labels but {features_path} has {features.rows} rows.")
    return LabeledDataset(features, labels)


def encode_features(data: NDArray[np.float64], *, binary: bool) -> bytes:
    if binary:
        header = BINARY_HEADER.pack(BINARY_MAGIC, data.shape[0], data.shape[1])
        return header + np.ascontiguousarray(data, dtype=BINARY_DTYPE).tobytes()
    lines = (",".join(f"{value:.17g}" for value in row) for row in data.tolist())
    return ("\n".join(lines) + "\n").encode("utf-8")


def save_features(
    data: LabeledDataset | FeatureMatrix,
    features_path: str | Path,
    labels_path: str | Path | None = None,
) -> None:
    features_path = Path(features_path)
    matrix = data.features if isinstance(data, LabeledDataset) else data
    _write_bytes(features_path, encode_features(matrix.data, binary=_is_binary(features_path)))
    if labels_path is not None:
        if not isinstance(data, LabeledDataset):
            raise InputError("Labels requested for an unlabelled feature matrix.")
        save_labels(data.labels, labels_path)


def save_labels(labels: NDArray[np.int64], path: str | Path) -> None:
    _write_bytes(Path(path), "".join(f"{int(label)}\n" for label in labels).encode("utf-8"))


class SplitFile(BaseModel):
    """On-disk layout of a known/unseen split."""

    model_config = ConfigDict(extra="ignore")

    known_classes: list[int]
    unseen_classes: list[int]
    target_train_rows: list[int]
    target_test_rows: list[int]
    seed: int | None = None


def load_split(path: str | Path) -> ZslSplit:
    path = Path(path)
    try:
        parsed = SplitFile.model_validate_json(_read_bytes(path))
    except ValidationError as error:
        raise InputError(f"Invalid split file {path}: {error.errors()[0]['msg']}.") from error
    return ZslSplit(
        known_classes=tuple(sorted(parsed.known_classes)),
        unseen_classes=tuple(sorted(parsed.unseen_classes)),
        target_train_rows=tuple(parsed.target_train_rows),
        target_test_rows=tuple(parsed.target_test_rows),
        seed=parsed.seed,
    )


def save_split(split: ZslSplit, path: str | Path) -> None:
    payload = SplitFile(
        known_classes=list(split.known_classes),
        unseen_classes=list(split.unseen_classes),
        target_train_rows=list(split.target_train_rows),
        target_test_rows=list(split.target_test_rows),
        seed=split.seed,
    )
    _write_bytes(Path(path), payload.model_dump_json(indent=2).encode("utf-8"))


class ExperimentReport(BaseModel):
    """Serialized run: effective configuration, per-iteration trace, metrics and library versions."""

    config: dict[str, Any]
    trace: list[dict[str, Any]] = Field(default_factory=list)
    metrics: dict[str, Any] = Field(default_factory=dict)
    versions: dict[str, str] = Field(default_factory=dict)


def save_report(report: ExperimentReport, path: str | Path) -> None:
    path = Path(path)
    _write_bytes(path, (report.model_dump_json(indent=2) + "\n").encode("utf-8"))
    logger.info("report written path=%s trace_length=%s", path, len(report.trace))


def load_report(path: str | Path) -> ExperimentReport:
    path = Path(path)
    try:
        return ExperimentReport.model_validate_json(_read_bytes(path))
    except ValidationError as error:
        raise InputError(f"Invalid report file {path}: {error.errors()[0]['msg']}.") from error


@dataclass(frozen=True, slots=True)
class DatasetBundle:
    """Named domains sharing one label space and one feature dimensionality."""

    name: str
    domains: Mapping[str, LabeledDataset]
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.domains:
            raise InputError(f"Dataset {self.name!r} has no domains.")
        widths = {domain.features.cols for domain in self.domains.values()}
        if len(widths) != 1:
            raise DimensionMismatch(f"Domains of {self.name!r} disagree on feature dimension: {sorted(widths)}.")
        if self.class_names:
            top = max(int(domain.labels.max()) for domain in self.domains.values())
            if top >= len(self.class_names):
                raise InputError(f"Label {top} has no entry among {len(self.class_names)} class names.")

    @property
    def n_classes(self) -> int:
        if self.class_names:
            return len(self.class_names)
        return 1 + max(int(domain.labels.max()) for domain in self.domains.values())


@dataclass(frozen=True, slots=True)
class SynthConfig:
    """Gaussian blobs with unit σ around a shared offset; target drawn fresh, rotated in one plane, translated and noised."""

    n_classes: int = 10
    n_per_class_source: int = 50
    n_per_class_target: int = 50
    dim: int = 32
    class_sep: float = 4.0
    rotation: float = 0.0
    translation: float = 0.0
    noise: float = 0.0
    offset: float = 8.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_classes", "n_per_class_source", "n_per_class_target", "dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}.")
        if not self.class_sep > 0:
            raise ConfigError(f"class_sep must be positive, got {self.class_sep}.")
        if self.translation < 0 or self.noise < 0 or self.offset < 0:
            raise ConfigError("translation, noise and offset must be non-negative.")
        if self.rotation != 0 and self.dim < 2:
            raise ConfigError("A rotation shift needs dim >= 2.")

    def to_dict(self) -> dict[str, float | int]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def _class_means(cfg: SynthConfig, rng: np.random.Generator) -> NDArray[np.float64]:
    # orthonormal directions at radius sep/√2 put every pair exactly class_sep apart
    radius = cfg.class_sep / math.sqrt(2.0)
    gaussian = rng.standard_normal((cfg.dim, cfg.n_classes))
    if cfg.n_classes <= cfg.dim:
        directions, _ = np.linalg.qr(gaussian)
        return directions.T * radius
    return (gaussian / np.linalg.norm(gaussian, axis=0)).T * radius


def _sample(means: NDArray[np.float64], per_class: int, rng: np.random.Generator) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    labels = np.repeat(np.arange(means.shape[0], dtype=np.int64), per_class)
    return means[labels] + rng.standard_normal((labels.shape[0], means.shape[1])), labels


def _unit(v: NDArray[np.float64]) -> NDArray[np.float64]:
    return v / np.linalg.norm(v)


def _shift_axes(means: NDArray[np.float64], rng: np.random.Generator) -> NDArray[np.float64]:
    """(dim, 2) orthonormal columns: the offset axis, then a direction inside the span of the class means.

    The offset axis avoids the class means when the dimension leaves room, so every class keeps
    the same norm. A 1-D space gets the offset axis only.
    """
    dim = means.shape[1]
    basis, singular, _ = np.linalg.svd(means.T, full_matrices=False)
    span = basis[:, singular > 1e-9 * singular[0]]
    axis = rng.standard_normal(dim)
    if span.shape[1] < dim:
        axis -= span @ (span.T @ axis)
    axis = _unit(axis)
    if dim < 2:
        return axis[:, None]
    inner = span @ rng.standard_normal(span.shape[1])
    inner -= axis * (axis @ inner)
    return np.column_stack([axis, _unit(inner)])


def _rotate(x: NDArray[np.float64], plane: NDArray[np.float64], angle: float) -> NDArray[np.float64]:
    # turns the first plane axis towards the second
    coords = x @ plane
    cos, sin = math.cos(angle), math.sin(angle)
    rotated = coords @ np.array([[cos, sin], [-sin, cos]])
    return x + (rotated - coords) @ plane.T


def generate_synthetic(cfg: SynthConfig) -> DatasetBundle:
    """Source and target domains; identical SynthConfig gives bit-identical arrays.

    Both domains share `cfg.offset` along the first shift axis, as deep features share a large
    common mean. Rotating the target about the origin therefore slides the whole domain towards
    the class-mean direction of the second axis, by 2 sin(rotation / 2) * offset, on top of
    turning the class structure that lies in the plane.
    """
    rng = np.random.default_rng(cfg.seed)
    means = _class_means(cfg, rng)
    axes = _shift_axes(means, rng)
    means = means + cfg.offset * axes[:, 0]
    direction = _unit(rng.standard_normal(cfg.dim))

    source_x, source_y = _sample(means, cfg.n_per_class_source, rng)
    target_x, target_y = _sample(means, cfg.n_per_class_target, rng)

    if cfg.rotation:
        target_x = _rotate(target_x, axes, cfg.rotation)
    target_x += cfg.translation * direction
    if cfg.noise:
        target_x += cfg.noise * rng.standard_normal(target_x.shape)

    return DatasetBundle(
        name=f"synthetic-seed{cfg.seed}",
        domains={
            "source": LabeledDataset(FeatureMatrix(source_x, Domain.SOURCE), source_y),
            "target": LabeledDataset(FeatureMatrix(target_x, Domain.TARGET), target_y),
        },
        class_names=tuple(f"class_{k}" for k in range(cfg.n_classes)),
    )
