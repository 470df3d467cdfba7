"""Randomized property suites runnable from the CLI.

Each suite draws trials from per-trial seeded streams and records the
trial indices that violate the property, so a failure is reproducible
from the printed seed. The nuclear norm used by the norm suites is
injectable so a deliberately broken implementation can be shown to fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg, transform


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    failing_seeds: tuple[int, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.failing_seeds


@dataclass(frozen=True)
class SelfcheckReport:
    seed: int
    results: tuple[SuiteResult, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        out = []
        for r in self.results:
            if r.passed:
                out.append(f"{r.name}: pass ({r.trials} trials)")
            else:
                shown = ", ".join(str(s) for s in r.failing_seeds[:5])
                out.append(
                    f"{r.name}: FAIL ({len(r.failing_seeds)}/{r.trials} trials,"
                    f" failing trial seeds: {shown})"
                )
        out.append(f"selfcheck seed {self.seed}: " + ("PASS" if self.passed else "FAIL"))
        return out


def _trial_rng(seed: int, suite: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, suite, trial)))


def _random_pair(rng) -> tuple[np.ndarray, np.ndarray]:
    m = int(rng.integers(1, 9))
    a = rng.standard_normal((m, int(rng.integers(1, 13))))
    b = rng.standard_normal((m, int(rng.integers(1, 13))))
    return a, b


def _orthogonal_pair(rng) -> tuple[np.ndarray, np.ndarray]:
    m = int(rng.integers(4, 9))
    r1 = int(rng.integers(1, m // 2 + 1))
    r2 = int(rng.integers(1, m - r1 + 1))
    q = np.linalg.qr(rng.standard_normal((m, r1 + r2)))[0]
    a = q[:, :r1] @ rng.standard_normal((r1, int(rng.integers(1, 13))))
    b = q[:, r1:] @ rng.standard_normal((r2, int(rng.integers(1, 13))))
    return a, b


def _suite_subadditivity(trials: int, seed: int, nuclear) -> SuiteResult:
    bad = []
    for t in range(trials):
        rng = _trial_rng(seed, 1, t)
        a, b = _random_pair(rng)
        whole = nuclear(linalg.concat_columns(a, b))
        parts = nuclear(a) + nuclear(b)
        if whole > parts + 1e-9 * max(1.0, parts):
            bad.append(t)
    return SuiteResult("nuclear_subadditivity", trials, tuple(bad))


def _suite_orthogonal_equality(trials: int, seed: int, nuclear) -> SuiteResult:
    bad = []
    for t in range(trials):
        rng = _trial_rng(seed, 2, t)
        a, b = _orthogonal_pair(rng)
        whole = nuclear(linalg.concat_columns(a, b))
        parts = nuclear(a) + nuclear(b)
        if abs(whole - parts) > 1e-8 * max(1.0, parts):
            bad.append(t)
    return SuiteResult("orthogonal_equality", trials, tuple(bad))


def _suite_zero_block_equality(trials: int, seed: int, nuclear) -> SuiteResult:
    bad = []
    for t in range(trials):
        rng = _trial_rng(seed, 3, t)
        a, _ = _random_pair(rng)
        whole = nuclear(linalg.concat_columns(a, np.zeros((a.shape[0], 2))))
        if abs(whole - nuclear(a)) > 1e-12 * max(1.0, nuclear(a)):
            bad.append(t)
    return SuiteResult("zero_block_equality", trials, tuple(bad))


def _random_problem(rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = int(rng.integers(2, 7))
    t = rng.standard_normal((d, d))
    t /= linalg.spectral_norm(t)
    y_pos = rng.standard_normal((d, int(rng.integers(1, 9))))
    y_neg = rng.standard_normal((d, int(rng.integers(1, 9))))
    return t, y_pos, y_neg


def _suite_objective_nonnegative(trials: int, seed: int) -> SuiteResult:
    bad = []
    for t in range(trials):
        rng = _trial_rng(seed, 4, t)
        mat, y_pos, y_neg = _random_problem(rng)
        value = transform.objective(mat, y_pos, y_neg)
        scale = linalg.nuclear_norm(mat @ linalg.concat_columns(y_pos, y_neg))
        if value < -1e-9 * max(1.0, scale):
            bad.append(t)
    return SuiteResult("objective_nonnegative", trials, tuple(bad))


def _smooth_problem(rng, attempts: int = 200):
    """Draw a problem where all three involved SVDs have separated spectra."""
    for _ in range(attempts):
        mat, y_pos, y_neg = _random_problem(rng)
        ok = True
        for x in (y_pos, y_neg, linalg.concat_columns(y_pos, y_neg)):
            s = linalg.singular_values(mat @ x)
            if s[-1] < 1e-3 or (s.size > 1 and np.min(np.abs(np.diff(s))) < 1e-3):
                ok = False
                break
        if ok:
            return mat, y_pos, y_neg
    return None


def _suite_subgradient_fd(trials: int, seed: int) -> SuiteResult:
    bad = []
    for t in range(trials):
        rng = _trial_rng(seed, 5, t)
        problem = _smooth_problem(rng)
        if problem is None:
            continue
        mat, y_pos, y_neg = problem
        grad = transform.objective_subgradient(mat, y_pos, y_neg)
        step = 1e-6
        fd = np.zeros_like(grad)
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                bump = np.zeros_like(mat)
                bump[i, j] = step
                fd[i, j] = (
                    transform.objective(mat + bump, y_pos, y_neg)
                    - transform.objective(mat - bump, y_pos, y_neg)
                ) / (2 * step)
        rel = np.linalg.norm(grad - fd) / max(1.0, np.linalg.norm(fd))
        if rel > 1e-4:
            bad.append(t)
    return SuiteResult("subgradient_vs_finite_differences", trials, tuple(bad))


def run_selfcheck(trials: int = 200, seed: int = 0, nuclear_norm_fn=None) -> SelfcheckReport:
    nuclear = nuclear_norm_fn or linalg.nuclear_norm
    fd_trials = max(3, trials // 20)
    results = (
        _suite_subadditivity(trials, seed, nuclear),
        _suite_orthogonal_equality(trials, seed, nuclear),
        _suite_zero_block_equality(trials, seed, nuclear),
        _suite_objective_nonnegative(trials, seed),
        _suite_subgradient_fd(fd_trials, seed),
    )
    return SelfcheckReport(seed=seed, results=results)
