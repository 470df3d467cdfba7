"""Dataset ingestion, image resizing, splitting, and synthetic subspace data.

Datasets hold samples as columns of a dense feature matrix. Loaders parse
the big-endian IDX image/label format (optionally gzipped) and numeric
CSV; the synthetic generator places low-dimensional subspaces at
prescribed pairwise angles and samples noisy points from them.
"""

import csv
import gzip
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

from . import linalg
from .errors import ConfigError, DimensionMismatch, IoError, ParseError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass
class DenseDataset:
    """Feature matrix (d x N, samples as columns) with integer labels in [0, C)."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    image_shape: tuple[int, int] | None = None

    def __post_init__(self):
        self.features = linalg.as_matrix(self.features)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise DimensionMismatch("labels must be a flat integer sequence")
        if self.labels.shape[0] != self.features.shape[1]:
            raise DimensionMismatch(
                f"{self.features.shape[1]} samples but {self.labels.shape[0]} labels"
            )
        if self.class_count < 1:
            raise ConfigError("class_count must be >= 1")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ConfigError(
                f"labels must lie in [0, {self.class_count}), "
                f"got range [{self.labels.min()}, {self.labels.max()}]"
            )

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    def class_columns(self, label: int) -> np.ndarray:
        return self.features[:, self.labels == label]

    def subset(self, indices) -> "DenseDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return DenseDataset(
            self.features[:, idx], self.labels[idx], self.class_count, self.image_shape
        )

    def select_classes(self, keep: list[int]) -> "DenseDataset":
        """Keep only the listed classes, relabeled 0..len(keep)-1 in list order."""
        if len(set(keep)) != len(keep):
            raise ConfigError(f"duplicate class in {keep}")
        remap = {c: i for i, c in enumerate(keep)}
        mask = np.isin(self.labels, keep)
        if not mask.any():
            raise ConfigError(f"no samples with labels in {keep}")
        labels = np.array([remap[c] for c in self.labels[mask]], dtype=np.int64)
        return DenseDataset(self.features[:, mask], labels, len(keep), self.image_shape)


def _read_file(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except OSError as exc:
            raise ParseError(f"bad gzip stream in {path}: {exc}") from exc
    return raw


def load_idx(images_path, labels_path) -> DenseDataset:
    """Parse an IDX image/label file pair into a dataset with pixels in [0, 1].

    Both files may be gzip-compressed; the magic bytes decide. Pixel
    columns are row-major flattened images scaled by 1/255.
    """
    img_raw = _read_file(images_path)
    if len(img_raw) < 16:
        raise ParseError(f"{images_path}: truncated header")
    magic, n, rows, cols = struct.unpack(">IIII", img_raw[:16])
    if magic != IMAGE_MAGIC:
        raise ParseError(
            f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"
        )
    want = 16 + n * rows * cols
    if len(img_raw) != want:
        raise ParseError(
            f"{images_path}: truncated payload, expected {want} bytes, got {len(img_raw)}"
        )
    pixels = np.frombuffer(img_raw, dtype=np.uint8, offset=16).reshape(n, rows * cols)

    lab_raw = _read_file(labels_path)
    if len(lab_raw) < 8:
        raise ParseError(f"{labels_path}: truncated header")
    lmagic, ln = struct.unpack(">II", lab_raw[:8])
    if lmagic != LABEL_MAGIC:
        raise ParseError(
            f"{labels_path}: bad magic 0x{lmagic:08x}, expected 0x{LABEL_MAGIC:08x}"
        )
    if len(lab_raw) != 8 + ln:
        raise ParseError(
            f"{labels_path}: truncated payload, expected {8 + ln} bytes, got {len(lab_raw)}"
        )
    if ln != n:
        raise ParseError(f"count mismatch: {n} images but {ln} labels")
    labels = np.frombuffer(lab_raw, dtype=np.uint8, offset=8).astype(np.int64)

    features = pixels.T.astype(np.float64) / 255.0
    return DenseDataset(features, labels, int(labels.max()) + 1, (rows, cols))


def _axis_coords(n_in: int, n_out: int) -> np.ndarray:
    # output grid spans the input corners; a single output sample takes the center
    if n_out == 1:
        return np.array([(n_in - 1) / 2.0])
    return np.linspace(0.0, n_in - 1, n_out)


def _bilinear_weights(in_shape, out_shape):
    """Flat gather indices and weights mapping an image to its resized form."""
    in_rows, in_cols = in_shape
    out_rows, out_cols = out_shape
    r = _axis_coords(in_rows, out_rows)
    c = _axis_coords(in_cols, out_cols)
    r0 = np.floor(r).astype(np.int64)
    c0 = np.floor(c).astype(np.int64)
    r1 = np.minimum(r0 + 1, in_rows - 1)
    c1 = np.minimum(c0 + 1, in_cols - 1)
    wr = r - r0
    wc = c - c0
    # outer-product the per-axis pieces onto the flat output grid
    idx = []
    wgt = []
    for rr, fr in ((r0, 1.0 - wr), (r1, wr)):
        for cc, fc in ((c0, 1.0 - wc), (c1, wc)):
            idx.append((rr[:, None] * in_cols + cc[None, :]).ravel())
            wgt.append((fr[:, None] * fc[None, :]).ravel())
    return idx, wgt


def resize_images(features: np.ndarray, in_shape, out_shape) -> np.ndarray:
    """Bilinear-resize every column (a row-major image) of a d x N matrix."""
    features = linalg.as_matrix(features)
    in_rows, in_cols = in_shape
    out_rows, out_cols = out_shape
    if min(in_rows, in_cols, out_rows, out_cols) < 1:
        raise ConfigError(f"image dimensions must be positive, got {in_shape} -> {out_shape}")
    if features.shape[0] != in_rows * in_cols:
        raise DimensionMismatch(
            f"feature dim {features.shape[0]} != {in_rows}x{in_cols}"
        )
    idx, wgt = _bilinear_weights(in_shape, out_shape)
    out = np.zeros((out_rows * out_cols, features.shape[1]))
    for i, w in zip(idx, wgt):
        out += w[:, None] * features[i, :]
    return out


def resize_image(pixels, out_rows: int, out_cols: int) -> np.ndarray:
    """Bilinear-resize one 2-D image; returns the row-major flattened result."""
    pixels = linalg.as_matrix(pixels)
    col = pixels.reshape(-1, 1)
    return resize_images(col, pixels.shape, (out_rows, out_cols))[:, 0]


def resize_dataset(ds: DenseDataset, out_rows: int, out_cols: int) -> DenseDataset:
    if ds.image_shape is None:
        raise ConfigError("dataset has no image shape; cannot resize")
    feats = resize_images(ds.features, ds.image_shape, (out_rows, out_cols))
    return DenseDataset(feats, ds.labels, ds.class_count, (out_rows, out_cols))


def _parse_cell(text: str, path, row: int):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{path}: non-numeric cell {text!r} in row {row}") from None


def load_csv(path, label_column="label") -> DenseDataset:
    """Read a rectangular numeric CSV; samples are rows, one column holds labels.

    A header row is detected by a non-numeric first cell; label_column is
    then a column name, otherwise an integer index.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise ParseError(f"{path}: empty file")

    header = None
    first = rows[0][0].strip()
    try:
        float(first)
    except ValueError:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: header but no data rows")

    if header is not None:
        if label_column not in header:
            raise ParseError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
    else:
        try:
            label_idx = int(label_column)
        except (TypeError, ValueError):
            raise ParseError(
                f"{path}: headerless file needs an integer label column, got {label_column!r}"
            ) from None
        if not 0 <= label_idx < len(rows[0]):
            raise ParseError(f"{path}: label column {label_idx} out of range")

    width = len(rows[0])
    if width < 2:
        raise ParseError(f"{path}: need at least one feature column besides labels")
    samples = []
    labels = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: ragged row {i} has {len(row)} cells, expected {width}")
        vals = [_parse_cell(c, path, i) for c in row]
        lab = vals.pop(label_idx)
        if lab != int(lab):
            raise ParseError(f"{path}: non-integer label {lab} in row {i}")
        labels.append(int(lab))
        samples.append(vals)

    features = np.array(samples, dtype=np.float64).T
    labels = np.array(labels, dtype=np.int64)
    if labels.min() < 0:
        raise ParseError(f"{path}: negative label {labels.min()}")
    return DenseDataset(features, labels, int(labels.max()) + 1)


def save_csv(ds: DenseDataset, path) -> None:
    """Write samples as rows with a trailing integer `label` column."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"f{i}" for i in range(ds.dim)] + ["label"])
            for j in range(ds.n_samples):
                row = ["%.17g" % v for v in ds.features[:, j]]
                row.append(str(int(ds.labels[j])))
                writer.writerow(row)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def stratified_split(ds: DenseDataset, test_fraction: float, rng) -> tuple[DenseDataset, DenseDataset]:
    """Split per class in proportion test_fraction; test totals round(N * fraction).

    Per-class test counts come from largest-remainder apportionment of the
    exact quotas (ties broken by class index), so the overall test size is
    hit exactly. Deterministic for a given rng state.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    counts = np.bincount(ds.labels, minlength=ds.class_count)
    for c, n_c in enumerate(counts):
        if 0 < n_c < 2:
            raise ConfigError(f"class {c} has {n_c} sample(s); need >= 2 to stratify")

    total_test = int(round(ds.n_samples * test_fraction))
    total_test = min(max(total_test, 1), ds.n_samples - 1)
    quotas = counts * test_fraction
    base = np.floor(quotas).astype(np.int64)
    base = np.minimum(base, np.maximum(counts - 1, 0))
    remainder = total_test - int(base.sum())
    if remainder > 0:
        frac = quotas - np.floor(quotas)
        frac[base >= counts - 1] = -1.0  # keep one train sample per class
        order = np.argsort(-frac, kind="stable")
        for c in order[:remainder]:
            base[c] += 1
    elif remainder < 0:
        frac = quotas - np.floor(quotas)
        order = np.argsort(frac, kind="stable")
        gave = 0
        for c in order:
            if gave == -remainder:
                break
            if base[c] > 0:
                base[c] -= 1
                gave += 1

    test_idx = []
    train_idx = []
    for c in range(ds.class_count):
        members = np.flatnonzero(ds.labels == c)
        if members.size == 0:
            continue
        perm = rng.permutation(members)
        k = int(base[c])
        test_idx.append(perm[:k])
        train_idx.append(perm[k:])
    test_idx = np.sort(np.concatenate(test_idx))
    train_idx = np.sort(np.concatenate(train_idx))
    return ds.subset(train_idx), ds.subset(test_idx)


@dataclass(frozen=True)
class SubspaceSpec:
    """Recipe for sampling points from low-dimensional subspaces.

    pairwise_angle_targets, when given, prescribes the smallest principal
    angle for each subspace pair in lexicographic order (0,1), (0,2), ...
    and is only supported for 1-dimensional subspaces. class_assignment
    maps each subspace to its class label.
    """

    ambient_dim: int
    subspace_dims: tuple
    points_per_subspace: int = 100
    noise_sigma: float = 0.01
    pairwise_angle_targets: tuple | None = None
    class_assignment: tuple | None = None

    def n_subspaces(self) -> int:
        return len(self.subspace_dims)

    def validate(self) -> None:
        k = self.n_subspaces()
        if self.ambient_dim < 1 or k < 1:
            raise ConfigError("need ambient_dim >= 1 and at least one subspace")
        if any(s < 1 or s > self.ambient_dim for s in self.subspace_dims):
            raise ConfigError(
                f"subspace dims {self.subspace_dims} must lie in [1, {self.ambient_dim}]"
            )
        if self.points_per_subspace < 1:
            raise ConfigError("points_per_subspace must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.pairwise_angle_targets is not None:
            want = k * (k - 1) // 2
            if len(self.pairwise_angle_targets) != want:
                raise ConfigError(
                    f"{k} subspaces need {want} angle targets, "
                    f"got {len(self.pairwise_angle_targets)}"
                )
            if any(not 0.0 < t <= np.pi / 2 + 1e-12 for t in self.pairwise_angle_targets):
                raise ConfigError("angle targets must lie in (0, pi/2]")
            if any(s != 1 for s in self.subspace_dims):
                raise ConfigError("angle targets are only supported for 1-dim subspaces")
            if self.ambient_dim < 2:
                raise ConfigError("angle placement needs ambient_dim >= 2")
        if self.class_assignment is not None:
            if len(self.class_assignment) != k:
                raise ConfigError(f"class_assignment must list all {k} subspaces")
            classes = sorted(set(self.class_assignment))
            if classes != list(range(len(classes))):
                raise ConfigError("classes must be consecutive integers from 0")

    def classes(self) -> tuple:
        if self.class_assignment is not None:
            return tuple(self.class_assignment)
        return tuple(range(self.n_subspaces()))


def _pair_index(i: int, j: int, k: int) -> int:
    # position of (i, j), i < j, in lexicographic pair order
    return i * k - i * (i + 1) // 2 + (j - i - 1)


def _place_lines(targets: np.ndarray, k: int, dim: int, rng, starts: int = 32) -> np.ndarray:
    """Unit direction per line (rows) hitting prescribed pairwise angles.

    Line 0 is the first axis and line 1 sits in the span of the first two
    axes; the line-1 angle and all further lines are solved by nonlinear
    least squares on angle residuals from several random starts, then the
    best solution gets a minimax polish so over-determined target sets
    spread their inconsistency evenly instead of dumping it on one pair.
    Raises when even the best placement misses badly.
    """
    lines = np.zeros((k, dim))
    lines[0, 0] = 1.0
    if k == 1:
        return lines
    t01 = targets[_pair_index(0, 1, k)]
    lines[1, 0] = np.cos(t01)
    lines[1, 1] = np.sin(t01)
    if k == 2:
        return lines

    free = k - 2
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    wanted = np.array([targets[_pair_index(i, j, k)] for i, j in pairs])

    def unpack(x):
        out = np.zeros((k, dim))
        out[0, 0] = 1.0
        out[1, 0] = np.cos(x[0])
        out[1, 1] = np.sin(x[0])
        vs = x[1:].reshape(free, dim)
        out[2:] = vs / np.linalg.norm(vs, axis=1, keepdims=True)
        return out

    def residuals(x):
        vs = unpack(x)
        cosines = np.abs([vs[i] @ vs[j] for i, j in pairs])
        return np.arccos(np.clip(cosines, 0.0, 1.0)) - wanted

    best_x = None
    best_cost = np.inf
    for _ in range(starts):
        x0 = np.concatenate([[t01], rng.standard_normal(free * dim)])
        sol = least_squares(residuals, x0, xtol=1e-14, ftol=1e-14, gtol=1e-14)
        if sol.cost < best_cost:
            best_cost = sol.cost
            best_x = sol.x

    worst = np.abs(residuals(best_x)).max()
    if worst > 1e-6:
        polish = minimize(
            lambda x: np.abs(residuals(x)).max(), best_x, method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20_000, "maxfev": 20_000},
        )
        if polish.fun < worst:
            best_x = polish.x
            worst = polish.fun

    if worst > 1e-2:
        raise ConfigError(
            f"angle targets infeasible: best placement misses by {worst:.4f} rad"
        )
    return unpack(best_x)


def synth_subspaces(spec: SubspaceSpec, rng) -> tuple[DenseDataset, list]:
    """Sample noisy points from generated subspaces; returns (dataset, bases).

    Bases are orthonormal d x dim_i matrices. With angle targets, line
    directions are placed to match the prescribed pairwise angles;
    otherwise bases are drawn at random. Points are basis times standard
    normal coefficients plus isotropic noise of scale noise_sigma.
    """
    spec.validate()
    k = spec.n_subspaces()
    d = spec.ambient_dim

    if spec.pairwise_angle_targets is not None:
        lines = _place_lines(np.asarray(spec.pairwise_angle_targets, dtype=np.float64), k, d, rng)
        bases = [lines[i].reshape(d, 1) for i in range(k)]
    else:
        bases = []
        for dim_i in spec.subspace_dims:
            g = rng.standard_normal((d, dim_i))
            q = linalg.orthonormal_basis(g)
            if q.shape[1] != dim_i:
                raise ConfigError(f"could not draw a rank-{dim_i} basis")
            bases.append(q)

    blocks = []
    labels = []
    classes = spec.classes()
    for i, basis in enumerate(bases):
        coeff = rng.standard_normal((basis.shape[1], spec.points_per_subspace))
        pts = basis @ coeff
        if spec.noise_sigma > 0:
            pts = pts + spec.noise_sigma * rng.standard_normal(pts.shape)
        blocks.append(pts)
        labels.extend([classes[i]] * spec.points_per_subspace)

    features = np.hstack(blocks)
    ds = DenseDataset(features, np.array(labels), max(classes) + 1)
    return ds, bases


def class_bases(
    ds_or_features,
    labels=None,
    class_count=None,
    tol: float = linalg.DEFAULT_RANK_TOL,
    max_rank: int | None = None,
) -> list:
    """Orthonormal basis of each class's column span, indexed by class.

    max_rank, when given, keeps exactly that many leading directions per
    class instead of the tol-determined numerical rank; sampled noisy data
    needs this to recover the intended subspace dimension.
    """
    if isinstance(ds_or_features, DenseDataset):
        feats, labs, count = ds_or_features.features, ds_or_features.labels, ds_or_features.class_count
    else:
        feats = linalg.as_matrix(ds_or_features)
        labs = np.asarray(labels, dtype=np.int64)
        count = int(class_count)
    out = []
    for c in range(count):
        cols = feats[:, labs == c]
        if cols.shape[1] == 0:
            raise ConfigError(f"class {c} has no samples")
        if max_rank is None:
            out.append(linalg.orthonormal_basis(cols, tol=tol))
            continue
        if cols.shape[1] < max_rank:
            raise ConfigError(
                f"class {c} has {cols.shape[1]} samples, fewer than basis rank {max_rank}"
            )
        res = linalg.svd(cols)
        if res.singular_values[max_rank - 1] <= 0.0:
            raise ConfigError(f"class {c} data has rank below {max_rank}")
        out.append(res.left_vectors[:, :max_rank].copy())
    return out


def pairwise_angles(bases: list) -> np.ndarray:
    """Symmetric matrix of smallest principal angles between listed bases."""
    k = len(bases)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            ang = linalg.smallest_principal_angle(bases[i], bases[j])
            out[i, j] = out[j, i] = ang
    return out
