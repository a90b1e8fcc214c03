"""Solver configuration from environment variables."""

import logging
import os
from dataclasses import asdict, dataclass, replace

from capls_da.errors import ConfigError

DEFAULT_SUBSPACE_DIM = 128
DEFAULT_ITERATIONS = 20
DEFAULT_KNOWN_CLASSES = 35
DEFAULT_SPLIT_SEEDS = (0, 1, 2, 3, 4)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SolverConfig:
    """Numerical knobs that are not experiment flags."""

    ridge: float = 1.0
    temperature: float = 1.0
    residual_tol: float = 1e-6
    symmetry_tol: float = 1e-10

    def with_overrides(self, *, ridge: float | None = None, temperature: float | None = None) -> "SolverConfig":
        updated = self
        if ridge is not None:
            updated = replace(updated, ridge=_require_positive("ridge", ridge))
        if temperature is not None:
            updated = replace(updated, temperature=_require_positive("temperature", temperature))
        return updated

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def _require_positive(name: str, value: float) -> float:
    if value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}.")
    return float(value)


def _parse_positive_float(raw_value: str | None, *, default: float) -> float:
    if raw_value is None:
        return default
    try:
        parsed = float(raw_value.strip())
    except ValueError:
        return default
    if parsed <= 0:
        return default
    return parsed


def load_solver_config_from_env() -> SolverConfig:
    """Build a SolverConfig from CAPLS_* environment variables."""
    defaults = SolverConfig()
    return SolverConfig(
        ridge=_parse_positive_float(os.getenv("CAPLS_RIDGE"), default=defaults.ridge),
        temperature=_parse_positive_float(os.getenv("CAPLS_TEMPERATURE"), default=defaults.temperature),
        residual_tol=_parse_positive_float(os.getenv("CAPLS_RESIDUAL_TOL"), default=defaults.residual_tol),
        symmetry_tol=_parse_positive_float(os.getenv("CAPLS_SYMMETRY_TOL"), default=defaults.symmetry_tol),
    )


def resolve_subspace_dim(requested: int, *, d_in: int, n_train: int) -> int:
    """Clamp the requested subspace dimensionality to what the training data supports."""
    if requested <= 0:
        raise ConfigError(f"Subspace dimensionality must be positive, got {requested}.")
    resolved = max(1, min(requested, d_in, n_train - 1))
    if resolved != requested:
        logger.warning("subspace dim clamped requested=%s resolved=%s d_in=%s n_train=%s", requested, resolved, d_in, n_train)
    return resolved
