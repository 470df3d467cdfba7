"""Learning a transformation that pulls two classes toward orthogonal subspaces.

The objective for a transformation T and class data matrices Yp, Ym is

    nuclear_norm(T Yp) + nuclear_norm(T Ym) - nuclear_norm(T [Yp, Ym])

subject to spectral_norm(T) = 1. The value is nonnegative for every T and
reaches 0 exactly when the transformed class column spaces are orthogonal,
so minimizing it drives the classes apart. Minimization is projected
subgradient descent: identity start, backtracking line search, and
renormalization to the unit spectral sphere after each step.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigError, DimensionMismatch, NumericError

# line-search guards: a step is accepted only if it lowers the objective by
# at least MIN_DECREASE, after at most MAX_BACKTRACKS halvings
MAX_BACKTRACKS = 40
MIN_DECREASE = 1e-12


@dataclass(frozen=True)
class LearnConfig:
    """Settings for learn_transform.

    output_rows selects a rectangular r x d transformation (dimension
    reduction); None keeps r = d. init_mode is "identity" or "given";
    the latter requires init_transform.
    """

    max_iters: int = 200
    initial_step: float = 0.1
    step_shrink: float = 0.5
    rel_tol: float = 1e-6
    rank_tol: float = 1e-8
    output_rows: int | None = None
    init_mode: str = "identity"
    init_transform: np.ndarray | None = None

    def validate(self) -> None:
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.initial_step <= 0:
            raise ConfigError(f"initial_step must be positive, got {self.initial_step}")
        if not 0.0 < self.step_shrink < 1.0:
            raise ConfigError(f"step_shrink must lie in (0, 1), got {self.step_shrink}")
        if self.rel_tol <= 0:
            raise ConfigError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.rank_tol <= 0:
            raise ConfigError(f"rank_tol must be positive, got {self.rank_tol}")
        if self.output_rows is not None and self.output_rows < 1:
            raise ConfigError(f"output_rows must be >= 1, got {self.output_rows}")
        if self.init_mode not in ("identity", "given"):
            raise ConfigError(f"unknown init_mode {self.init_mode!r}")
        if self.init_mode == "given" and self.init_transform is None:
            raise ConfigError("init_mode 'given' requires init_transform")


@dataclass(frozen=True)
class LearnTrace:
    """objectives holds the value at the start and after each accepted step."""

    objectives: np.ndarray
    iterations_run: int
    termination_reason: str  # converged | max_iters | no_descent_direction


def _check_dims(t: np.ndarray, y_pos: np.ndarray, y_neg: np.ndarray) -> None:
    if y_pos.shape[0] != y_neg.shape[0]:
        raise DimensionMismatch(
            f"class data row counts differ: {y_pos.shape[0]} vs {y_neg.shape[0]}"
        )
    if t.shape[1] != y_pos.shape[0]:
        raise DimensionMismatch(
            f"transformation has {t.shape[1]} columns but data has "
            f"{y_pos.shape[0]} rows"
        )


def objective(t, y_pos, y_neg) -> float:
    """Nuclear-norm separation objective; >= 0 up to roundoff."""
    t = linalg.as_matrix(t)
    y_pos = linalg.as_matrix(y_pos)
    y_neg = linalg.as_matrix(y_neg)
    _check_dims(t, y_pos, y_neg)
    both = linalg.concat_columns(y_pos, y_neg)
    return (
        linalg.nuclear_norm(t @ y_pos)
        + linalg.nuclear_norm(t @ y_neg)
        - linalg.nuclear_norm(t @ both)
    )


def _nuclear_subgradient(t: np.ndarray, x: np.ndarray, rank_tol: float) -> np.ndarray:
    """A subgradient of T -> nuclear_norm(T X): U V' X' from the SVD of T X."""
    res = linalg.svd(t @ x)
    s = res.singular_values
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros_like(t)
    keep = s > rank_tol * s[0]
    u = res.left_vectors[:, keep]
    v = res.right_vectors[:, keep]
    return u @ v.T @ x.T


def objective_subgradient(t, y_pos, y_neg, rank_tol: float = linalg.DEFAULT_RANK_TOL) -> np.ndarray:
    """One valid subgradient of the objective at t."""
    if rank_tol <= 0:
        raise ConfigError(f"rank_tol must be positive, got {rank_tol}")
    t = linalg.as_matrix(t)
    y_pos = linalg.as_matrix(y_pos)
    y_neg = linalg.as_matrix(y_neg)
    _check_dims(t, y_pos, y_neg)
    both = linalg.concat_columns(y_pos, y_neg)
    return (
        _nuclear_subgradient(t, y_pos, rank_tol)
        + _nuclear_subgradient(t, y_neg, rank_tol)
        - _nuclear_subgradient(t, both, rank_tol)
    )


def compress_columns(y) -> np.ndarray:
    """Replace Y by Z with at most d columns and Z Z' = Y Y' exactly.

    The objective and its subgradient depend on the data only through
    Y Y' (the left factors and singular values of T Y are those of T Z),
    so wide matrices can be shrunk once before iterating. Z is U diag(s)
    from the thin SVD of Y; returned unchanged when Y is already narrow.
    """
    y = linalg.as_matrix(y)
    d, n = y.shape
    if n <= d:
        return y
    res = linalg.svd(y)
    return res.left_vectors * res.singular_values


def _unit_spectral(t: np.ndarray) -> np.ndarray:
    norm = linalg.spectral_norm(t)
    if norm <= 0.0:
        raise NumericError("cannot normalize a zero transformation")
    return t / norm


def class_structure_init(y_pos, y_neg) -> np.ndarray:
    """Starting transformation built from the leading direction of each class.

    The objective has near-tied minimizers that differ in whether
    same-class subspaces collapse together; identity-started descent
    settles in whichever it meets first, usually without the collapse.
    Starting from the rank-2 projector onto the two class directions
    (second orthogonalized against the first) descends into the
    intra-collapsing, inter-orthogonal solution instead. Falls back to
    the identity when the class directions coincide.
    """
    y_pos = linalg.as_matrix(y_pos)
    y_neg = linalg.as_matrix(y_neg)
    if y_pos.shape[0] != y_neg.shape[0]:
        raise DimensionMismatch(
            f"class data row counts differ: {y_pos.shape[0]} vs {y_neg.shape[0]}"
        )
    up = linalg.svd(y_pos).left_vectors[:, 0]
    um = linalg.svd(y_neg).left_vectors[:, 0]
    um = um - (um @ up) * up
    norm = np.linalg.norm(um)
    if norm < 1e-8:
        return np.eye(y_pos.shape[0])
    um = um / norm
    return np.outer(up, up) + np.outer(um, um)


def class_pca_init(y_pos, y_neg, rows: int | None = None) -> np.ndarray:
    """Starting transformation spanning both classes' principal directions.

    A truncated identity start eye(rows, d) keeps only the first few
    coordinates; when those are zero on every sample (border pixels of
    digit images, say) it annihilates both classes, which is already a
    global minimizer of the objective and descent stops there uselessly.
    Rows built from the leading left singular vectors of each class keep
    both transformed matrices at full strength. Directions are interleaved
    pos/neg so any row budget covers both classes, then orthonormalized;
    the result may have fewer than `rows` rows when the combined class
    rank is smaller.
    """
    y_pos = linalg.as_matrix(y_pos)
    y_neg = linalg.as_matrix(y_neg)
    if y_pos.shape[0] != y_neg.shape[0]:
        raise DimensionMismatch(
            f"class data row counts differ: {y_pos.shape[0]} vs {y_neg.shape[0]}"
        )
    d = y_pos.shape[0]
    if rows is None:
        rows = d
    if rows < 1:
        raise ConfigError(f"transformation row count must be positive, got {rows}")
    per_class = []
    for y in (y_pos, y_neg):
        if y.shape[1] == 0 or not np.any(y):
            per_class.append(np.empty((d, 0)))
            continue
        result = linalg.svd(y)
        keep = result.singular_values > 1e-10 * result.singular_values[0]
        per_class.append(result.left_vectors[:, keep])
    if per_class[0].shape[1] == 0 and per_class[1].shape[1] == 0:
        raise NumericError(
            "both class matrices are zero: no directions to build a start from"
        )
    candidates = []
    for k in range(max(m.shape[1] for m in per_class)):
        for m in per_class:
            if k < m.shape[1]:
                candidates.append(m[:, k])
    basis: list[np.ndarray] = []
    for v in candidates:
        w = v.astype(float, copy=True)
        # two orthogonalization passes for stability near dependence
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        norm_w = np.linalg.norm(w)
        if norm_w < 1e-8:
            continue
        basis.append(w / norm_w)
        if len(basis) == rows:
            break
    return np.asarray(basis)


def learn_transform(y_pos, y_neg, config: LearnConfig | None = None):
    """Minimize the separation objective; returns (transformation, trace).

    The returned matrix has unit spectral norm and an objective no worse
    than the normalized starting point; the trace objective sequence is
    nonincreasing by construction of the acceptance rule.
    """
    config = config if config is not None else LearnConfig()
    config.validate()
    y_pos = linalg.as_matrix(y_pos)
    y_neg = linalg.as_matrix(y_neg)
    if y_pos.shape[0] != y_neg.shape[0]:
        raise DimensionMismatch(
            f"class data row counts differ: {y_pos.shape[0]} vs {y_neg.shape[0]}"
        )
    d = y_pos.shape[0]

    if config.init_mode == "given":
        t = linalg.as_matrix(config.init_transform)
        if t.shape[1] != d:
            raise DimensionMismatch(
                f"init_transform has {t.shape[1]} columns, data has {d} rows"
            )
        if config.output_rows is not None and config.output_rows != t.shape[0]:
            raise ConfigError(
                f"output_rows={config.output_rows} disagrees with "
                f"init_transform rows {t.shape[0]}"
            )
    else:
        rows = d if config.output_rows is None else config.output_rows
        if rows > d:
            raise ConfigError(f"output_rows={rows} exceeds data dimension {d}")
        t = np.eye(rows, d)
    t = _unit_spectral(t)

    # wide data enters every objective evaluation only through its Gram
    # matrix, so shrink it once; the concatenated term compresses too
    zp = compress_columns(y_pos)
    zm = compress_columns(y_neg)
    zc = compress_columns(linalg.concat_columns(zp, zm))

    def f(tt: np.ndarray) -> float:
        return (
            linalg.nuclear_norm(tt @ zp)
            + linalg.nuclear_norm(tt @ zm)
            - linalg.nuclear_norm(tt @ zc)
        )

    objectives = [f(t)]
    reason = "max_iters"
    iterations = 0
    for _ in range(config.max_iters):
        iterations += 1
        g = (
            _nuclear_subgradient(t, zp, config.rank_tol)
            + _nuclear_subgradient(t, zm, config.rank_tol)
            - _nuclear_subgradient(t, zc, config.rank_tol)
        )
        # Step along the tangential component of g. The objective is
        # 1-homogeneous in t, so the renormalization after each step scales
        # the objective by 1/spectral_norm(t - step*g); the radial part of g
        # (along the spectral-norm gradient u1 v1') cancels against that
        # rescaling and stepping along raw g can stall at non-stationary
        # points. Along -direction the post-projection slope is exactly
        # -||direction||^2, so descent continues until constrained
        # stationarity.
        res_t = linalg.svd(t)
        radial = np.outer(res_t.left_vectors[:, 0], res_t.right_vectors[:, 0])
        direction = g - objectives[-1] * radial
        step = config.initial_step
        accepted = None
        for _ in range(MAX_BACKTRACKS + 1):
            cand = t - step * direction
            norm = linalg.spectral_norm(cand)
            if norm > 0.0:
                cand = cand / norm
                f_cand = f(cand)
                if f_cand <= objectives[-1] - MIN_DECREASE:
                    accepted = (cand, f_cand)
                    break
            step *= config.step_shrink
        if accepted is None:
            reason = "no_descent_direction"
            break
        t, f_new = accepted
        decrease = objectives[-1] - f_new
        objectives.append(f_new)
        if decrease <= config.rel_tol * max(1.0, abs(objectives[-2])):
            reason = "converged"
            break

    trace = LearnTrace(
        objectives=np.asarray(objectives),
        iterations_run=iterations,
        termination_reason=reason,
    )
    return t, trace
