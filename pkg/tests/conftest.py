"""Shared fixtures: the bundled digit dataset and stratified task splits."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from transforest import data

DATA_DIR = Path(__file__).parent.parent / "data"

# one line per acceptance criterion, echoed after the test summary so the
# pass/fail verdicts survive pytest's output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def digits_raw():
    """All 10,000 bundled 28x28 digit images."""
    return data.load_idx(
        DATA_DIR / "digits-images-idx3-ubyte.gz",
        DATA_DIR / "digits-labels-idx1-ubyte.gz",
    )


def stratified_task(ds, n_train, n_test, rng):
    """Deterministic stratified train/test subsets of the requested sizes."""
    rest, test = data.stratified_split(ds, n_test / ds.n_samples, rng)
    if rest.n_samples > n_train:
        _, train = data.stratified_split(rest, n_train / rest.n_samples, rng)
    else:
        train = rest
    return train, test


@pytest.fixture(scope="session")
def digits_two_class(digits_raw):
    """3-vs-8 task: 1000 train / 500 test at 16x16."""
    pair = digits_raw.select_classes([3, 8])
    small = data.resize_dataset(pair, 16, 16)
    return stratified_task(small, 1000, 500, np.random.default_rng(20))


@pytest.fixture(scope="session")
def digits_ten_class(digits_raw):
    """10-class task: 5000 train / 1000 test at 16x16."""
    small = data.resize_dataset(digits_raw, 16, 16)
    return stratified_task(small, 5000, 1000, np.random.default_rng(21))
