"""Transformation trees and forests.

Each internal node owns a learned transformation plus one dictionary per
class group; a sample routes toward the dictionary that reconstructs its
transformed feature vector better. Leaves store smoothed class histograms
and prediction averages them across trees.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dictionary as dict_mod
from . import linalg, transform
from .data import DenseDataset
from .dictionary import DictConfig, Dictionary
from .errors import ConfigError, DimensionMismatch, NumericError
from .transform import LearnConfig

SPECTRAL_NORM_TOL = 1e-8


@dataclass(frozen=True)
class SplitLearner:
    """Per-node routing tuple: transformation and the two class dictionaries."""

    transform: np.ndarray
    dict_pos: Dictionary
    dict_neg: Dictionary

    def __post_init__(self) -> None:
        t = linalg.as_matrix(self.transform)
        object.__setattr__(self, "transform", t)
        if self.dict_pos.dim != t.shape[0] or self.dict_neg.dim != t.shape[0]:
            raise DimensionMismatch(
                "dictionaries must live in the transform's output space"
            )
        if abs(linalg.spectral_norm(t) - 1.0) > SPECTRAL_NORM_TOL:
            raise ConfigError("split transform must have unit spectral norm")

    @property
    def in_dim(self) -> int:
        return self.transform.shape[1]


@dataclass(frozen=True)
class Leaf:
    posterior: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        p = np.asarray(self.posterior, dtype=np.float64)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError("leaf posterior must be a probability vector")
        object.__setattr__(self, "posterior", p)


@dataclass(frozen=True)
class Split:
    learner: SplitLearner
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Leaf | Split


@dataclass(frozen=True)
class Tree:
    root: TreeNode
    class_count: int
    feature_dim: int
    cascade: bool = False


@dataclass(frozen=True)
class Forest:
    trees: tuple[Tree, ...]
    class_count: int
    feature_dim: int
    train_config_echo: object = None

    def __post_init__(self) -> None:
        if len(self.trees) < 1:
            raise ConfigError("a forest needs at least one tree")
        for t in self.trees:
            if t.class_count != self.class_count or t.feature_dim != self.feature_dim:
                raise ConfigError("all trees must share class_count and feature_dim")

    @property
    def n_trees(self) -> int:
        return len(self.trees)


@dataclass(frozen=True)
class TrainConfig:
    """Forest training settings."""

    n_trees: int = 1
    max_depth: int = 9
    min_node_samples: int = 8
    sample_fraction: float = 1.0
    learn: LearnConfig = field(default_factory=LearnConfig)
    dict: DictConfig = field(default_factory=DictConfig)
    seed: int = 0
    laplace_alpha: float = 1.0
    learner_mode: str = "transform"
    cascade_features: bool = False

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ConfigError("n_trees must be at least 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be at least 1")
        if self.min_node_samples < 1:
            raise ConfigError("min_node_samples must be at least 1")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ConfigError("sample_fraction must be in (0, 1]")
        if not np.isfinite(self.laplace_alpha) or self.laplace_alpha < 0:
            raise ConfigError("laplace_alpha must be a finite nonnegative real")
        if self.learner_mode not in ("transform", "identity"):
            raise ConfigError(f"unknown learner_mode {self.learner_mode!r}")
        self.learn.validate()
        self.dict.validate()


def identity_learner_mode(config: TrainConfig) -> TrainConfig:
    """Copy of the config that replaces learned transforms with the identity."""
    return replace(config, learner_mode="identity")


def random_class_bipartition(classes_present, rng) -> tuple[set, set]:
    """Uniform nonempty unordered bipartition of the present classes.

    The smallest class label is pinned to the positive side, which makes
    each unordered bipartition correspond to exactly one drawable code.
    """
    classes = sorted(classes_present)
    n = len(classes)
    if n < 2:
        raise ConfigError("need at least 2 classes to bipartition")
    if n - 1 <= 62:
        code = int(rng.integers(1, 1 << (n - 1)))
        bits = [(code >> i) & 1 for i in range(n - 1)]
    else:
        bits = [0] * (n - 1)
        while not any(bits):
            bits = [int(b) for b in rng.integers(0, 2, size=n - 1)]
    pos = {classes[0]}
    neg = set()
    for cls, bit in zip(classes[1:], bits):
        (neg if bit else pos).add(cls)
    return pos, neg


def _leaf(labels: np.ndarray, class_count: int, alpha: float) -> Leaf:
    counts = np.bincount(labels, minlength=class_count).astype(np.float64)
    posterior = (counts + alpha) / (labels.size + alpha * class_count)
    posterior /= posterior.sum()
    return Leaf(posterior=posterior, sample_count=int(labels.size))


def split_evaluate(learner: SplitLearner, y: np.ndarray) -> str:
    """Route one sample: "left" when the positive dictionary fits at least as well."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != learner.in_dim:
        raise DimensionMismatch(
            f"sample dimension {y.shape} does not match learner input {learner.in_dim}"
        )
    z = learner.transform @ y
    res_pos = dict_mod.projection_residual(learner.dict_pos, z)
    res_neg = dict_mod.projection_residual(learner.dict_neg, z)
    return "left" if res_pos <= res_neg else "right"


def split_evaluate_batch(learner: SplitLearner, features: np.ndarray) -> np.ndarray:
    """Boolean go-left mask for every column of features."""
    features = linalg.as_matrix(features, allow_empty_cols=True)
    if features.shape[0] != learner.in_dim:
        raise DimensionMismatch("feature dimension does not match learner input")
    z = learner.transform @ features
    res_pos = dict_mod.projection_residuals(learner.dict_pos, z)
    res_neg = dict_mod.projection_residuals(learner.dict_neg, z)
    return res_pos <= res_neg


def _node_transform(y_pos: np.ndarray, y_neg: np.ndarray, config: TrainConfig) -> np.ndarray:
    d = y_pos.shape[0]
    rows = config.learn.output_rows or d
    if config.learner_mode == "identity":
        # the rectangular identity already has unit spectral norm
        return np.eye(rows, d)
    # start from rows spanning both classes' principal directions; a
    # truncated identity can annihilate image data whose leading pixels
    # are black, freezing descent at a worthless zero of the objective
    init = transform.class_pca_init(y_pos, y_neg, rows)
    local = replace(
        config.learn,
        init_mode="given",
        init_transform=init,
        output_rows=init.shape[0],
    )
    t, _ = transform.learn_transform(y_pos, y_neg, local)
    return t


def train_node(
    samples: np.ndarray,
    labels: np.ndarray,
    depth: int,
    config: TrainConfig,
    rng: np.random.Generator,
    class_count: int,
) -> TreeNode:
    """Recursively grow one subtree from the samples arriving at this node."""
    samples = linalg.as_matrix(samples)
    labels = np.asarray(labels)
    n = samples.shape[1]
    if n == 0:
        raise ConfigError("cannot train a node on zero samples")
    present = np.unique(labels)
    if depth >= config.max_depth or present.size == 1 or n < config.min_node_samples:
        return _leaf(labels, class_count, config.laplace_alpha)

    pos_set, neg_set = random_class_bipartition(present, rng)
    pos_mask = np.isin(labels, sorted(pos_set))
    y_pos = samples[:, pos_mask]
    y_neg = samples[:, ~pos_mask]

    try:
        t = _node_transform(y_pos, y_neg, config)
        z_pos = t @ y_pos
        z_neg = t @ y_neg
        d_pos = dict_mod.learn(z_pos, config.dict, rng)
        d_neg = dict_mod.learn(z_neg, config.dict, rng)
    except NumericError:
        # all-zero class data: nothing to transform or model at this node
        return _leaf(labels, class_count, config.laplace_alpha)
    learner = SplitLearner(transform=t, dict_pos=d_pos, dict_neg=d_neg)

    go_left = split_evaluate_batch(learner, samples)
    if go_left.all() or not go_left.any():
        return _leaf(labels, class_count, config.laplace_alpha)

    child_feats = t @ samples if config.cascade_features else samples
    left = train_node(
        child_feats[:, go_left], labels[go_left], depth + 1, config, rng, class_count
    )
    right = train_node(
        child_feats[:, ~go_left], labels[~go_left], depth + 1, config, rng, class_count
    )
    return Split(learner=learner, left=left, right=right)


def _train_tree(ds: DenseDataset, config: TrainConfig, seed_seq: np.random.SeedSequence) -> Tree:
    rng = np.random.default_rng(seed_seq)
    n = ds.n_samples
    k = max(1, min(n, int(np.ceil(config.sample_fraction * n))))
    picks = rng.choice(n, size=k, replace=False) if k < n else np.arange(n)
    root = train_node(
        ds.features[:, picks], ds.labels[picks], 0, config, rng, ds.class_count
    )
    return Tree(
        root=root,
        class_count=ds.class_count,
        feature_dim=ds.dim,
        cascade=config.cascade_features,
    )


def _thread_cap(n_tasks: int) -> int:
    raw = os.environ.get("TRANSFOREST_THREADS", "").strip()
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"TRANSFOREST_THREADS must be an integer, got {raw!r}")
        if cap < 1:
            raise ConfigError("TRANSFOREST_THREADS must be at least 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def forest_train(ds: DenseDataset, config: TrainConfig) -> Forest:
    """Train n_trees independent trees, each on its own sample subset.

    Per-tree randomness comes from spawned child streams of the config
    seed, so results are identical no matter how many worker threads run.
    """
    config.validate()
    if ds.n_samples == 0:
        raise ConfigError("cannot train on an empty dataset")
    if np.unique(ds.labels).size < 2:
        raise ConfigError("training needs at least 2 distinct classes")

    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    workers = _thread_cap(config.n_trees)
    if workers == 1:
        trees = [_train_tree(ds, config, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(lambda s: _train_tree(ds, config, s), seeds))
    return Forest(
        trees=tuple(trees),
        class_count=ds.class_count,
        feature_dim=ds.dim,
        train_config_echo=config,
    )


def tree_predict(tree: Tree, y: np.ndarray) -> np.ndarray:
    """Posterior of the leaf that the sample descends to."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != tree.feature_dim:
        raise DimensionMismatch("sample dimension does not match tree feature_dim")
    node = tree.root
    while isinstance(node, Split):
        side = split_evaluate(node.learner, y)
        if tree.cascade:
            y = node.learner.transform @ y
        node = node.left if side == "left" else node.right
    return node.posterior


def tree_predict_batch(tree: Tree, features: np.ndarray) -> np.ndarray:
    """Leaf posteriors for every column, as a (class_count, n) matrix."""
    features = linalg.as_matrix(features, allow_empty_cols=True)
    if features.shape[0] != tree.feature_dim:
        raise DimensionMismatch("feature dimension does not match tree feature_dim")
    out = np.zeros((tree.class_count, features.shape[1]))

    def descend(node: TreeNode, feats: np.ndarray, idx: np.ndarray) -> None:
        if isinstance(node, Leaf):
            out[:, idx] = node.posterior[:, None]
            return
        go_left = split_evaluate_batch(node.learner, feats)
        child = node.learner.transform @ feats if tree.cascade else feats
        if go_left.any():
            descend(node.left, child[:, go_left], idx[go_left])
        if not go_left.all():
            descend(node.right, child[:, ~go_left], idx[~go_left])

    descend(tree.root, features, np.arange(features.shape[1]))
    return out


def forest_predict(forest: Forest, y: np.ndarray) -> tuple[np.ndarray, int]:
    """Average of tree posteriors and the argmax class (lowest index wins ties)."""
    posterior = np.mean([tree_predict(t, y) for t in forest.trees], axis=0)
    return posterior, int(np.argmax(posterior))


def _forest_posterior_stack(forest: Forest, features: np.ndarray) -> np.ndarray:
    return np.stack([tree_predict_batch(t, features) for t in forest.trees])


def evaluate_accuracy(forest: Forest, test: DenseDataset) -> float:
    """Fraction of test samples whose averaged-posterior argmax matches the label."""
    if test.n_samples == 0:
        raise ConfigError("cannot evaluate on an empty dataset")
    if test.dim != forest.feature_dim:
        raise DimensionMismatch("test feature dimension does not match the forest")
    stack = _forest_posterior_stack(forest, test.features)
    predicted = np.argmax(stack.mean(axis=0), axis=0)
    return float(np.mean(predicted == test.labels))


def prefix_accuracy_curve(forest: Forest, test: DenseDataset) -> np.ndarray:
    """Accuracy of the ensemble restricted to the first k trees, k = 1..n."""
    if test.n_samples == 0:
        raise ConfigError("cannot evaluate on an empty dataset")
    if test.dim != forest.feature_dim:
        raise DimensionMismatch("test feature dimension does not match the forest")
    stack = _forest_posterior_stack(forest, test.features)
    running = np.cumsum(stack, axis=0)
    curve = np.empty(forest.n_trees)
    for k in range(forest.n_trees):
        predicted = np.argmax(running[k], axis=0)
        curve[k] = np.mean(predicted == test.labels)
    return curve


def confusion_matrix(forest: Forest, test: DenseDataset) -> np.ndarray:
    """Counts[i, j] = test samples of class i predicted as class j."""
    stack = _forest_posterior_stack(forest, test.features)
    predicted = np.argmax(stack.mean(axis=0), axis=0)
    counts = np.zeros((forest.class_count, forest.class_count), dtype=np.int64)
    np.add.at(counts, (test.labels, predicted), 1)
    return counts
