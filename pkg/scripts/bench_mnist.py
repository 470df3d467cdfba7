"""Timing and accuracy report for the bundled digit tasks.

Not part of the test suite; runs the frozen two-class and ten-class
configurations (the same ones tests/test_acceptance.py asserts) plus
the identity-learner baseline, printing accuracy and wall time.
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from transforest import data, forest
from transforest.dictionary import DictConfig
from transforest.forest import TrainConfig
from transforest.transform import LearnConfig

DATA_DIR = Path(__file__).parent.parent / "data"

TWO_CLASS = TrainConfig(
    n_trees=1, max_depth=4, min_node_samples=8,
    learn=LearnConfig(max_iters=50, output_rows=64),
    dict=DictConfig(n_atoms=32, sparsity=4, ksvd_iters=10),
    seed=0,
)

TEN_CLASS = TrainConfig(
    n_trees=5, max_depth=9, min_node_samples=8, sample_fraction=1.0,
    learn=LearnConfig(max_iters=30, output_rows=32),
    dict=DictConfig(n_atoms=16, sparsity=4, ksvd_iters=5),
    seed=0,
)


def load_tasks():
    raw = data.load_idx(
        DATA_DIR / "digits-images-idx3-ubyte.gz",
        DATA_DIR / "digits-labels-idx1-ubyte.gz",
    )

    def stratified_task(ds, n_train, n_test, rng):
        rest, test = data.stratified_split(ds, n_test / ds.n_samples, rng)
        if rest.n_samples > n_train:
            _, train = data.stratified_split(rest, n_train / rest.n_samples, rng)
        else:
            train = rest
        return train, test

    pair = data.resize_dataset(raw.select_classes([3, 8]), 16, 16)
    two = stratified_task(pair, 1000, 500, np.random.default_rng(20))
    small = data.resize_dataset(raw, 16, 16)
    ten = stratified_task(small, 5000, 1000, np.random.default_rng(21))
    return two, ten


def run(tag, train, test, cfg):
    t0 = time.perf_counter()
    f = forest.forest_train(train, cfg)
    t1 = time.perf_counter()
    acc = forest.evaluate_accuracy(f, test)
    curve = forest.prefix_accuracy_curve(f, test)
    t2 = time.perf_counter()
    print(
        f"{tag}: acc={acc:.4f} curve={np.round(curve, 4).tolist()}"
        f" train={t1 - t0:.1f}s eval={t2 - t1:.1f}s",
        flush=True,
    )
    return acc, t1 - t0


if __name__ == "__main__":
    (two_train, two_test), (ten_train, ten_test) = load_tasks()
    print(f"two-class: train {two_train.n_samples}, test {two_test.n_samples}")
    print(f"ten-class: train {ten_train.n_samples}, test {ten_test.n_samples}")

    which = sys.argv[1] if len(sys.argv) > 1 else "both"
    if which in ("both", "two"):
        run("two-class learned", two_train, two_test, TWO_CLASS)
        run(
            "two-class identity",
            two_train, two_test, forest.identity_learner_mode(TWO_CLASS),
        )
    if which in ("both", "ten"):
        run("ten-class forest", ten_train, ten_test, TEN_CLASS)
