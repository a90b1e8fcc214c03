"""Joint-subspace domain adaptation with confidence-aware pseudo-label selection."""

__version__ = "0.1.0"
