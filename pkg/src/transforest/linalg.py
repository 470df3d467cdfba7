"""Dense matrix primitives: SVD-backed norms, principal angles, projectors.

All functions are pure and operate on 2-D float64 numpy arrays. Every
matrix factorization performed by this package goes through this module
and bumps a counter, so callers can assert that a code path (e.g. tree
prediction) is factorization-free.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, NumericError

DEFAULT_RANK_TOL = 1e-8

# Number of matrix factorizations (SVD / eigendecomposition / linear solve)
# performed since the last reset. Instrumentation only; never read by the
# algorithms themselves.
_factorization_count = 0


def factorization_count() -> int:
    return _factorization_count


def reset_factorization_count() -> None:
    global _factorization_count
    _factorization_count = 0


def _bump() -> None:
    global _factorization_count
    _factorization_count += 1


def as_matrix(m, allow_empty_cols: bool = False) -> np.ndarray:
    """Validate and convert input to a finite 2-D float64 array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    if a.shape[0] < 1 or (a.shape[1] < 1 and not allow_empty_cols):
        raise DimensionMismatch(f"matrix must be nonempty, got shape {a.shape}")
    if a.size and not np.isfinite(a).all():
        raise NumericError("matrix contains NaN or Inf entries")
    return a


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD M = U diag(s) V' with orthonormal U, V columns."""

    left_vectors: np.ndarray     # m x k
    singular_values: np.ndarray  # k, nonincreasing, >= 0
    right_vectors: np.ndarray    # n x k


def svd(m) -> SvdResult:
    """Thin SVD of a dense matrix.

    Raises NumericError if the iterative factorization fails to converge.
    """
    a = as_matrix(m)
    _bump()
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc
    return SvdResult(u, s, vt.T)


def singular_values(m) -> np.ndarray:
    """Singular values only (nonincreasing)."""
    a = as_matrix(m)
    _bump()
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc


def nuclear_norm(m) -> float:
    """Sum of singular values."""
    return float(singular_values(m).sum())


def spectral_norm(m) -> float:
    """Largest singular value (induced 2-norm)."""
    return float(singular_values(m)[0])


def frobenius_norm(m) -> float:
    """Square root of the sum of squared entries."""
    return float(np.linalg.norm(as_matrix(m, allow_empty_cols=True)))


def concat_columns(a, b) -> np.ndarray:
    """Columns of `a` followed by columns of `b`; row counts must agree."""
    a = as_matrix(a)
    b = as_matrix(b, allow_empty_cols=True)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(
            f"row counts differ: {a.shape[0]} vs {b.shape[0]}"
        )
    return np.hstack([a, b])


def orthonormal_basis(m, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal columns spanning the column space of `m`.

    The numerical rank keeps singular values above tol * sigma_1. A zero
    matrix yields a zero-width (rows, 0) result.
    """
    if tol <= 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    res = svd(m)
    s = res.singular_values
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((res.left_vectors.shape[0], 0))
    rank = int(np.count_nonzero(s > tol * s[0]))
    return res.left_vectors[:, :rank].copy()


def smallest_principal_angle(basis_a, basis_b) -> float:
    """Smallest principal angle, in radians, between two subspaces.

    Both arguments must have orthonormal columns and share the ambient
    dimension. Returns arccos of the largest singular value of
    basis_a' basis_b, clamped to [0, pi/2].
    """
    a = as_matrix(basis_a, allow_empty_cols=True)
    b = as_matrix(basis_b, allow_empty_cols=True)
    if a.shape[1] == 0 or b.shape[1] == 0:
        raise DimensionMismatch("principal angle of an empty basis is undefined")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(
            f"ambient dimensions differ: {a.shape[0]} vs {b.shape[0]}"
        )
    top = singular_values(a.T @ b)[0]
    # roundoff can push the cosine past 1 by ~1e-16
    return float(np.arccos(np.clip(top, -1.0, 1.0)))


def least_squares_projector(d, ridge: float = 0.0) -> np.ndarray:
    """Projector D (D'D + ridge I)^-1 D' onto span(D).

    Exact orthogonal projector for ridge = 0 and full column rank D;
    a slightly shrunken one for ridge > 0. Raises NumericError for a
    singular D'D when ridge = 0.
    """
    d = as_matrix(d)
    if ridge < 0:
        raise ConfigError(f"ridge must be nonnegative, got {ridge}")
    if ridge == 0.0:
        s = singular_values(d)
        full_rank = d.shape[1] <= d.shape[0] and s[-1] > 1e-12 * max(s[0], 1e-300)
        if not full_rank:
            raise NumericError(
                "D'D is singular with ridge = 0; pass a positive ridge"
            )
    gram = d.T @ d + ridge * np.eye(d.shape[1])
    _bump()
    try:
        inv_dt = np.linalg.solve(gram, d.T)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "D'D + ridge I could not be solved; pass a larger ridge"
        ) from exc
    return d @ inv_dt
