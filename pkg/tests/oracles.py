"""Slow, independent reference implementations used only by the tests.

None of these call into transforest. Singular values come from a
hand-rolled one-sided Jacobi iteration rather than LAPACK, sparse codes
from exhaustive support enumeration, and gradients from central
differences, so agreement with the package is meaningful evidence.
"""

from itertools import combinations

import numpy as np


def jacobi_singular_values(a, max_sweeps: int = 60, tol: float = 1e-14) -> np.ndarray:
    """Singular values by one-sided Jacobi column orthogonalization.

    Rotates column pairs until mutually orthogonal; the singular values
    are then the column norms. O(n^2 m) per sweep, fine for test sizes.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("need a 2-D array")
    if a.shape[0] < a.shape[1]:
        a = a.T.copy()
    n = a.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = a[:, p] @ a[:, p]
                beta = a[:, q] @ a[:, q]
                gamma = a[:, p] @ a[:, q]
                if abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                col_p = a[:, p].copy()
                a[:, p] = c * col_p - s * a[:, q]
                a[:, q] = s * col_p + c * a[:, q]
        if not rotated:
            break
    sv = np.sqrt(np.sum(a * a, axis=0))
    sv.sort()
    return sv[::-1]


def nuclear_norm_ref(a) -> float:
    return float(jacobi_singular_values(a).sum())


def spectral_norm_ref(a) -> float:
    return float(jacobi_singular_values(a)[0])


def principal_angle_ref(basis_a, basis_b) -> float:
    """Smallest principal angle via the Jacobi oracle's top singular value."""
    prod = np.asarray(basis_a).T @ np.asarray(basis_b)
    top = jacobi_singular_values(prod)[0]
    return float(np.arccos(min(1.0, max(-1.0, top))))


def best_subset_code(dictionary, target, sparsity: int):
    """Globally optimal sparse code by enumerating every support.

    Returns (residual_norm, code). Exponential in n_atoms; use only on
    small dictionaries. Greedy pursuit can never beat this residual.
    """
    d = np.asarray(dictionary, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    n_atoms = d.shape[1]
    best_resid = float(np.linalg.norm(y))
    best_code = np.zeros(n_atoms)
    for k in range(1, min(sparsity, n_atoms) + 1):
        for support in combinations(range(n_atoms), k):
            sub = d[:, list(support)]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            resid = float(np.linalg.norm(y - sub @ coef))
            if resid < best_resid - 1e-12:
                best_resid = resid
                best_code = np.zeros(n_atoms)
                best_code[list(support)] = coef
    return best_resid, best_code


def least_squares_residual_ref(dictionary, target) -> float:
    """Unrestricted least-squares residual ||y - D c*||, c* from lstsq."""
    d = np.asarray(dictionary, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    coef, *_ = np.linalg.lstsq(d, y, rcond=None)
    return float(np.linalg.norm(y - d @ coef))


def numeric_gradient(f, t, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar matrix function."""
    t = np.asarray(t, dtype=np.float64)
    g = np.zeros_like(t)
    for idx in np.ndindex(*t.shape):
        e = np.zeros_like(t)
        e[idx] = step
        g[idx] = (f(t + e) - f(t - e)) / (2.0 * step)
    return g


def numeric_directional_derivative(f, t, direction, step: float = 1e-6) -> float:
    """Central-difference derivative of f along a fixed matrix direction."""
    t = np.asarray(t, dtype=np.float64)
    e = np.asarray(direction, dtype=np.float64) * step
    return float((f(t + e) - f(t - e)) / (2.0 * step))
