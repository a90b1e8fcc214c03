"""Dense symmetric eigensolvers for the regularized generalized eigenproblem."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from capls_da.errors import DimensionMismatch, InputError, KTooLarge, NonConvergence, NotPositiveDefinite

RESIDUAL_TOL = 1e-6
SYMMETRY_TOL = 1e-10

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class EigenPairs:
    """Eigenvalues in non-increasing order; column k of `vectors` belongs to `values[k]`."""

    values: NDArray[np.float64]
    vectors: NDArray[np.float64]

    def __len__(self) -> int:
        return int(self.values.shape[0])


def as_sym_matrix(a: ArrayLike, *, name: str = "matrix", tol: float = SYMMETRY_TOL) -> NDArray[np.float64]:
    """Validate a square symmetric matrix and return its exactly symmetric float64 copy."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty square matrix, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries.")
    scale = max(float(np.abs(arr).max()), 1.0)
    if float(np.abs(arr - arr.T).max()) > tol * scale:
        raise DimensionMismatch(f"{name} is not symmetric.")
    return (arr + arr.T) / 2.0


def _fix_signs(vectors: NDArray[np.float64]) -> NDArray[np.float64]:
    # largest-magnitude entry of each column is made positive
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _check_k(k: int, dim: int) -> None:
    if k < 1:
        raise KTooLarge(f"k must be at least 1, got {k}.")
    if k > dim:
        raise KTooLarge(f"k={k} exceeds matrix dimension {dim}.")


def cholesky(b: ArrayLike) -> NDArray[np.float64]:
    """Lower-triangular L with L @ L.T == b."""
    sym = as_sym_matrix(b, name="b")
    try:
        return scipy.linalg.cholesky(sym, lower=True)
    except np.linalg.LinAlgError as error:
        raise NotPositiveDefinite(f"Matrix is not positive definite: {error}") from error


def symmetric_eigs(a: ArrayLike, k: int) -> EigenPairs:
    """The k largest eigenpairs of a symmetric matrix, orthonormal eigenvectors."""
    sym = as_sym_matrix(a, name="a")
    dim = sym.shape[0]
    _check_k(k, dim)
    try:
        values, vectors = scipy.linalg.eigh(sym, subset_by_index=[dim - k, dim - 1])
    except np.linalg.LinAlgError as error:
        raise NonConvergence(f"Symmetric eigensolver did not converge: {error}") from error

    order = np.argsort(-values, kind="stable")
    return EigenPairs(values=values[order], vectors=_fix_signs(vectors[:, order]))


def residuals(a: NDArray[np.float64], b: NDArray[np.float64], pairs: EigenPairs) -> NDArray[np.float64]:
    """Scaled residual ||A p - λ B p|| / ((||A||_F + |λ| ||B||_F) ||p||) per pair."""
    a_norm = np.linalg.norm(a, "fro")
    b_norm = np.linalg.norm(b, "fro")
    p = pairs.vectors
    raw = np.linalg.norm(a @ p - (b @ p) * pairs.values, axis=0)
    scale = (a_norm + np.abs(pairs.values) * b_norm) * np.linalg.norm(p, axis=0)
    return raw / np.maximum(scale, np.finfo(np.float64).tiny)


def solve_generalized_sym(
    a: ArrayLike,
    b: ArrayLike,
    k: int,
    *,
    residual_tol: float = RESIDUAL_TOL,
    symmetry_tol: float = SYMMETRY_TOL,
) -> EigenPairs:
    """The k largest solutions of A p = λ B p with B-orthonormal eigenvectors.

    B = L L^T is factored and the standard problem L^{-1} A L^{-T} y = λ y is solved;
    eigenvectors come back as p = L^{-T} y.
    """
    sym_a = as_sym_matrix(a, name="a", tol=symmetry_tol)
    sym_b = as_sym_matrix(b, name="b", tol=symmetry_tol)
    if sym_a.shape != sym_b.shape:
        raise DimensionMismatch(f"a and b must share a shape, got {sym_a.shape} and {sym_b.shape}.")
    _check_k(k, sym_a.shape[0])

    lower = cholesky(sym_b)
    half = scipy.linalg.solve_triangular(lower, sym_a, lower=True)
    reduced = scipy.linalg.solve_triangular(lower, half.T, lower=True)
    standard = symmetric_eigs((reduced + reduced.T) / 2.0, k)

    vectors = scipy.linalg.solve_triangular(lower.T, standard.vectors, lower=False)
    pairs = EigenPairs(values=standard.values, vectors=_fix_signs(vectors))

    worst = float(residuals(sym_a, sym_b, pairs).max())
    if worst > residual_tol:
        raise NonConvergence(f"Generalized eigenpair residual {worst:.3e} exceeds tolerance {residual_tol:.1e}.")
    logger.debug("generalized eigensolve dim=%s k=%s top=%s worst_residual=%s", sym_a.shape[0], k, pairs.values[0], worst)
    return pairs
