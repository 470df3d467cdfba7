"""Per-class dictionary learning and reconstruction residuals.

A node's split function compares, per sample, the reconstruction error of
the transformed feature vector against two class dictionaries. Dictionaries
come from K-SVD (orthogonal matching pursuit for the sparse-coding half,
rank-1 alternations for the atom updates) or from a plain truncated-SVD
basis; routing only depends on the span, so both modes are interchangeable
on exact low-rank data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ConfigError, DimensionMismatch, NumericError

ATOM_NORM_TOL = 1e-10


@dataclass(frozen=True)
class DictConfig:
    """Dictionary learning settings."""

    n_atoms: int = 16
    sparsity: int = 4
    ksvd_iters: int = 10
    ridge: float = 1e-8
    mode: str = "ksvd"

    def validate(self) -> None:
        if self.n_atoms < 1:
            raise ConfigError("n_atoms must be at least 1")
        if self.sparsity < 1:
            raise ConfigError("sparsity must be at least 1")
        if self.sparsity > self.n_atoms:
            raise ConfigError("sparsity cannot exceed n_atoms")
        if self.ksvd_iters < 1:
            raise ConfigError("ksvd_iters must be at least 1")
        if not np.isfinite(self.ridge) or self.ridge < 0:
            raise ConfigError("ridge must be a finite nonnegative real")
        if self.mode not in ("ksvd", "svd_basis"):
            raise ConfigError(f"unknown dictionary mode {self.mode!r}")


@dataclass(frozen=True)
class Dictionary:
    """Unit-norm atoms plus the cached projector onto their span.

    sweep_errors records the total squared representation error after each
    completed K-SVD sweep (None for dictionaries built another way).
    """

    atoms: np.ndarray
    ridge: float = 0.0
    sweep_errors: np.ndarray | None = None
    projector: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        atoms = linalg.as_matrix(self.atoms)
        if atoms.shape[1] < 1:
            raise ConfigError("a dictionary needs at least one atom")
        if atoms.shape[1] > atoms.shape[0]:
            raise ConfigError(
                f"{atoms.shape[1]} atoms exceed the feature dimension {atoms.shape[0]}"
            )
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(np.abs(norms - 1.0) > ATOM_NORM_TOL):
            raise ConfigError("every atom must have unit norm")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(
            self, "projector", linalg.least_squares_projector(atoms, self.ridge)
        )

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    @property
    def dim(self) -> int:
        return self.atoms.shape[0]


def _batch_omp(atoms: np.ndarray, x: np.ndarray, sparsity: int) -> np.ndarray:
    """Greedy sparse codes for every column of x against shared atoms.

    Selection and the running correlations work on the Gram matrix, and the
    per-step least-squares solves run batched across columns (every active
    column has the same support size, so the normal-equation systems stack
    into one call). Columns stop early once the best remaining correlation
    falls under a norm-scaled floor.
    """
    n_atoms, n_cols = atoms.shape[1], x.shape[1]
    gram = atoms.T @ atoms
    corr0 = atoms.T @ x
    floors = 1e-12 * np.maximum(1.0, np.linalg.norm(x, axis=0))

    supports = np.zeros((n_cols, sparsity), dtype=np.intp)
    lengths = np.zeros(n_cols, dtype=np.intp)
    active = np.ones(n_cols, dtype=bool)
    taken = np.zeros((n_cols, n_atoms), dtype=bool)

    def solve_group(cols: np.ndarray, k: int) -> np.ndarray:
        sup = supports[cols, :k]
        sys = gram[sup[:, :, None], sup[:, None, :]]
        rhs = corr0[sup, cols[:, None]]
        try:
            return np.linalg.solve(sys, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            out = np.empty_like(rhs)
            for row, (a, b) in enumerate(zip(sys, rhs)):
                out[row] = np.linalg.lstsq(a, b, rcond=None)[0]
            return out

    for step in range(sparsity):
        cols = np.flatnonzero(active)
        if cols.size == 0:
            break
        if step == 0:
            corr = corr0[:, cols]
        else:
            c = solve_group(cols, step)
            sup = supports[cols, :step]
            corr = corr0[:, cols] - np.einsum("ick,ck->ic", gram[:, sup], c)
        corr = np.where(taken[cols].T, 0.0, corr)
        picks = np.argmax(np.abs(corr), axis=0)
        strong = np.abs(corr[picks, np.arange(cols.size)]) > floors[cols]
        good = cols[strong]
        active[cols[~strong]] = False
        if good.size == 0:
            break
        supports[good, step] = picks[strong]
        taken[good, picks[strong]] = True
        lengths[good] = step + 1

    codes = np.zeros((n_atoms, n_cols))
    for k in np.unique(lengths):
        if k == 0:
            continue
        cols = np.flatnonzero(lengths == k)
        c = solve_group(cols, int(k))
        codes[supports[cols, :k], cols[:, None]] = c
    return codes


def omp_sparse_code(d: Dictionary, x: np.ndarray, sparsity: int) -> np.ndarray:
    """Sparse coefficients for one vector by orthogonal matching pursuit."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("expected a 1-d vector to code")
    if x.shape[0] != d.dim:
        raise DimensionMismatch(
            f"vector dimension {x.shape[0]} does not match atom dimension {d.dim}"
        )
    if not np.all(np.isfinite(x)):
        raise NumericError("vector to code contains non-finite entries")
    if not 1 <= sparsity <= d.n_atoms:
        raise ConfigError("sparsity must be between 1 and n_atoms")
    return _batch_omp(d.atoms, x[:, None], sparsity)[:, 0]


def _representation_error(x: np.ndarray, atoms: np.ndarray, codes: np.ndarray) -> float:
    return float(np.sum((x - atoms @ codes) ** 2))


def _init_atoms(x: np.ndarray, n_atoms: int, rng: np.random.Generator) -> np.ndarray:
    """Seed atoms from distinct, mutually non-parallel training columns."""
    d = x.shape[0]
    atoms = np.zeros((d, n_atoms))
    count = 0
    for j in rng.permutation(x.shape[1]):
        col = x[:, j]
        norm = np.linalg.norm(col)
        if norm <= 0:
            continue
        cand = col / norm
        if count and np.max(np.abs(atoms[:, :count].T @ cand)) > 1.0 - 1e-12:
            continue
        atoms[:, count] = cand
        count += 1
        if count == n_atoms:
            break
    while count < n_atoms:
        cand = rng.standard_normal(d)
        atoms[:, count] = cand / np.linalg.norm(cand)
        count += 1
    return atoms


def ksvd_learn(x: np.ndarray, config: DictConfig, rng: np.random.Generator) -> Dictionary:
    """Fit a dictionary to the columns of x by K-SVD sweeps.

    Each sweep sparse-codes every column, then revises each atom (with its
    code row) by one rank-1 alternation on the restricted error matrix;
    unused atoms are replaced by the worst-represented column. A sweep that
    fails to improve the total squared error is rolled back and iteration
    stops, so the recorded per-sweep errors are nonincreasing.
    """
    config.validate()
    x = linalg.as_matrix(x)
    if not np.any(x):
        raise NumericError("training matrix is all zero: no subspace to model")
    n_atoms = min(config.n_atoms, x.shape[0], x.shape[1])
    sparsity = min(config.sparsity, n_atoms)

    atoms = _init_atoms(x, n_atoms, rng)
    errors = []
    prev_atoms = atoms.copy()
    for _ in range(config.ksvd_iters):
        codes = _batch_omp(atoms, x, sparsity)
        for k in range(n_atoms):
            used = np.flatnonzero(codes[k])
            if used.size == 0:
                per_col = np.linalg.norm(x - atoms @ codes, axis=0)
                worst = int(np.argmax(per_col))
                col = x[:, worst]
                norm = np.linalg.norm(col)
                if norm > 0:
                    atoms[:, k] = col / norm
                continue
            err_k = x[:, used] - atoms @ codes[:, used] + np.outer(atoms[:, k], codes[k, used])
            direction = err_k @ codes[k, used]
            norm = np.linalg.norm(direction)
            if norm <= 0:
                continue
            atoms[:, k] = direction / norm
            codes[k, used] = err_k.T @ atoms[:, k]
        err = _representation_error(x, atoms, codes)
        if errors and err > errors[-1]:
            atoms = prev_atoms
            break
        errors.append(err)
        prev_atoms = atoms.copy()

    return Dictionary(atoms=atoms, ridge=config.ridge, sweep_errors=np.array(errors))


def svd_basis_learn(x: np.ndarray, n_atoms: int) -> Dictionary:
    """Dictionary whose atoms are the top left singular vectors of x."""
    x = linalg.as_matrix(x)
    if n_atoms < 1:
        raise ConfigError("n_atoms must be at least 1")
    if n_atoms > min(x.shape):
        raise ConfigError(
            f"n_atoms {n_atoms} exceeds min dimension {min(x.shape)} of the data"
        )
    if not np.any(x):
        raise NumericError("training matrix is all zero: no subspace to model")
    res = linalg.svd(x)
    return Dictionary(atoms=res.left_vectors[:, :n_atoms], ridge=0.0)


def learn(x: np.ndarray, config: DictConfig, rng: np.random.Generator) -> Dictionary:
    """Dispatch to the configured learning mode with n_atoms clamped."""
    config.validate()
    if config.mode == "svd_basis":
        x = linalg.as_matrix(x)
        return svd_basis_learn(x, min(config.n_atoms, x.shape[0], x.shape[1]))
    return ksvd_learn(x, config, rng)


def projection_residual(d: Dictionary, x: np.ndarray) -> float:
    """Norm of the part of x that the dictionary's span cannot represent."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != d.dim:
        raise DimensionMismatch("vector dimension does not match atom dimension")
    return float(np.linalg.norm(x - d.projector @ x))


def projection_residuals(d: Dictionary, x: np.ndarray) -> np.ndarray:
    """Per-column residual norms for a batch of vectors."""
    x = linalg.as_matrix(x, allow_empty_cols=True)
    if x.shape[0] != d.dim:
        raise DimensionMismatch("column dimension does not match atom dimension")
    return np.linalg.norm(x - d.projector @ x, axis=0)
