"""Tests for sparse coding, dictionary learning, and projection residuals."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from transforest import dictionary, linalg
from transforest.dictionary import DictConfig, Dictionary
from transforest.errors import ConfigError, DimensionMismatch, NumericError

from oracles import best_subset_code, least_squares_residual_ref


def random_dictionary(rng, dim, n_atoms, ridge=0.0):
    atoms = rng.standard_normal((dim, n_atoms))
    atoms /= np.linalg.norm(atoms, axis=0)
    return Dictionary(atoms=atoms, ridge=ridge)


# ----------------------------------------------------------------- types


def test_dictionary_rejects_non_unit_atoms():
    with pytest.raises(ConfigError, match="unit norm"):
        Dictionary(atoms=np.array([[2.0], [0.0]]))


def test_dictionary_rejects_too_many_atoms():
    atoms = np.eye(2)
    wide = np.hstack([atoms, np.array([[1.0], [0.0]])])
    with pytest.raises(ConfigError, match="exceed"):
        Dictionary(atoms=wide)


def test_projector_symmetric_idempotent_at_zero_ridge():
    d = random_dictionary(np.random.default_rng(0), 8, 3)
    p = d.projector
    assert np.abs(p - p.T).max() <= 1e-8
    assert np.abs(p @ p - p).max() <= 1e-6


def test_config_validation():
    with pytest.raises(ConfigError):
        DictConfig(sparsity=5, n_atoms=4).validate()
    with pytest.raises(ConfigError):
        DictConfig(ksvd_iters=0).validate()
    with pytest.raises(ConfigError):
        DictConfig(ridge=-1e-3).validate()
    with pytest.raises(ConfigError):
        DictConfig(mode="pca").validate()
    DictConfig().validate()


# ------------------------------------------------------------------- omp


def test_omp_recovers_single_atom():
    d = random_dictionary(np.random.default_rng(1), 6, 4)
    code = dictionary.omp_sparse_code(d, d.atoms[:, 2], 1)
    want = np.zeros(4)
    want[2] = 1.0
    assert_allclose(code, want, atol=1e-10)


def test_omp_orthogonal_input_keeps_full_residual():
    atoms = np.eye(5)[:, :3]
    d = Dictionary(atoms=atoms)
    x = np.array([0.0, 0.0, 0.0, 1.0, 2.0])
    for k in (1, 2, 3):
        code = dictionary.omp_sparse_code(d, x, k)
        assert_allclose(code, 0.0, atol=1e-12)
        assert_allclose(np.linalg.norm(x - atoms @ code), np.linalg.norm(x))


def test_omp_zero_vector_gives_zero_code():
    d = random_dictionary(np.random.default_rng(2), 4, 3)
    code = dictionary.omp_sparse_code(d, np.zeros(4), 2)
    assert_allclose(code, 0.0)


def test_omp_residual_orthogonal_to_support():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = random_dictionary(rng, 9, 6)
        x = rng.standard_normal(9)
        code = dictionary.omp_sparse_code(d, x, 3)
        support = np.flatnonzero(code)
        r = x - d.atoms @ code
        assert np.abs(d.atoms[:, support].T @ r).max() <= 1e-8


def test_omp_residual_nonincreasing_in_sparsity():
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = random_dictionary(rng, 8, 6)
        x = rng.standard_normal(8)
        last = np.inf
        for k in range(1, 7):
            code = dictionary.omp_sparse_code(d, x, k)
            res = np.linalg.norm(x - d.atoms @ code)
            assert res <= last + 1e-12
            last = res


def test_omp_against_exhaustive_subset_oracle():
    rng = np.random.default_rng(5)
    matched = 0
    for _ in range(40):
        n_atoms = int(rng.integers(3, 9))
        dim = int(rng.integers(n_atoms, 12))
        d = random_dictionary(rng, dim, n_atoms)
        x = rng.standard_normal(dim)
        code = dictionary.omp_sparse_code(d, x, 2)
        omp_res = np.linalg.norm(x - d.atoms @ code)
        best_res, best_code = best_subset_code(d.atoms, x, 2)
        # greedy can never beat the exhaustive optimum
        assert omp_res >= best_res - 1e-10
        assert omp_res <= np.linalg.norm(x) + 1e-12
        if set(np.flatnonzero(code)) == set(np.flatnonzero(best_code)):
            assert_allclose(omp_res, best_res, atol=1e-9)
            matched += 1
    # the greedy choice agrees with the optimum on most random instances
    assert matched >= 20


def test_omp_batch_matches_single_vector_path():
    rng = np.random.default_rng(6)
    d = random_dictionary(rng, 10, 7)
    x = rng.standard_normal((10, 15))
    codes = dictionary._batch_omp(d.atoms, x, 3)
    for j in range(15):
        single = dictionary.omp_sparse_code(d, x[:, j], 3)
        assert_allclose(codes[:, j], single, atol=1e-10)


def test_omp_input_validation():
    d = random_dictionary(np.random.default_rng(7), 4, 3)
    with pytest.raises(DimensionMismatch):
        dictionary.omp_sparse_code(d, np.zeros(5), 1)
    with pytest.raises(ConfigError):
        dictionary.omp_sparse_code(d, np.zeros(4), 0)
    with pytest.raises(ConfigError):
        dictionary.omp_sparse_code(d, np.zeros(4), 4)


# ------------------------------------------------------------------ ksvd


def test_ksvd_rank_one_data_single_atom():
    v = np.array([1.0, 2.0, 2.0]) / 3.0
    x = np.outer(v, [1.0, -2.0, 0.5, 3.0])
    cfg = DictConfig(n_atoms=1, sparsity=1, ksvd_iters=3)
    d = dictionary.ksvd_learn(x, cfg, np.random.default_rng(0))
    assert d.n_atoms == 1
    assert abs(abs(d.atoms[:, 0] @ v) - 1.0) <= 1e-10
    assert d.sweep_errors[-1] <= 1e-16


def test_ksvd_exact_two_dim_subspace():
    rng = np.random.default_rng(8)
    basis = np.linalg.qr(rng.standard_normal((6, 2)))[0]
    x = basis @ rng.standard_normal((2, 30))
    cfg = DictConfig(n_atoms=2, sparsity=2, ksvd_iters=5)
    d = dictionary.ksvd_learn(x, cfg, np.random.default_rng(1))
    codes = dictionary._batch_omp(d.atoms, x, 2)
    err = np.linalg.norm(x - d.atoms @ codes)
    assert err <= 1e-8 * np.linalg.norm(x)


def test_ksvd_noisy_rank_three_near_svd_optimum():
    rng = np.random.default_rng(9)
    basis = np.linalg.qr(rng.standard_normal((10, 3)))[0]
    x = basis @ rng.standard_normal((3, 200)) + 0.01 * rng.standard_normal((10, 200))
    cfg = DictConfig(n_atoms=3, sparsity=3, ksvd_iters=10)
    d = dictionary.ksvd_learn(x, cfg, np.random.default_rng(2))
    codes = dictionary._batch_omp(d.atoms, x, 3)
    got = np.sum((x - d.atoms @ codes) ** 2)
    s = np.linalg.svd(x, compute_uv=False)
    optimal = np.sum(s[3:] ** 2)
    assert got <= 2.0 * optimal


def test_ksvd_sweep_errors_nonincreasing():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((8, 60))
    cfg = DictConfig(n_atoms=5, sparsity=2, ksvd_iters=12)
    d = dictionary.ksvd_learn(x, cfg, np.random.default_rng(3))
    assert len(d.sweep_errors) >= 1
    assert np.all(np.diff(d.sweep_errors) <= 1e-10)


def test_ksvd_clamps_atom_count():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((4, 3))
    cfg = DictConfig(n_atoms=16, sparsity=4, ksvd_iters=2)
    d = dictionary.ksvd_learn(x, cfg, np.random.default_rng(4))
    assert d.n_atoms == 3


def test_ksvd_degenerate_repeated_column():
    # every column identical: extra atoms go unused and get replaced, and
    # the dictionary must still satisfy its invariants
    x = np.outer([0.6, 0.8], np.ones(10))
    cfg = DictConfig(n_atoms=2, sparsity=1, ksvd_iters=4)
    d = dictionary.ksvd_learn(x, cfg, np.random.default_rng(5))
    assert_allclose(np.linalg.norm(d.atoms, axis=0), 1.0, atol=1e-10)
    assert d.sweep_errors[-1] <= 1e-16


def test_ksvd_rejects_zero_matrix():
    cfg = DictConfig(n_atoms=2, sparsity=1)
    with pytest.raises(NumericError, match="all zero"):
        dictionary.ksvd_learn(np.zeros((4, 6)), cfg, np.random.default_rng(0))


def test_ksvd_deterministic_given_seed():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((6, 40))
    cfg = DictConfig(n_atoms=4, sparsity=2, ksvd_iters=5)
    a = dictionary.ksvd_learn(x, cfg, np.random.default_rng(7))
    b = dictionary.ksvd_learn(x, cfg, np.random.default_rng(7))
    assert_allclose(a.atoms, b.atoms, rtol=0, atol=0)


# ------------------------------------------------------------- svd basis


def test_svd_basis_identity_columns():
    x = np.eye(4)
    d = dictionary.svd_basis_learn(x, 4)
    overlap = np.abs(d.atoms.T @ np.eye(4))
    # permutation of signed standard basis vectors
    assert_allclose(np.sort(overlap.max(axis=0)), 1.0, atol=1e-10)
    assert_allclose(overlap.sum(), 4.0, atol=1e-8)


def test_svd_basis_rank_one():
    rng = np.random.default_rng(13)
    u = rng.standard_normal(5)
    u /= np.linalg.norm(u)
    x = np.outer(u, rng.standard_normal(7))
    d = dictionary.svd_basis_learn(x, 1)
    assert abs(abs(d.atoms[:, 0] @ u) - 1.0) <= 1e-10


def test_svd_basis_beats_random_competitors():
    rng = np.random.default_rng(14)
    x = rng.standard_normal((8, 40))
    k = 3
    d = dictionary.svd_basis_learn(x, k)
    best = np.sum(dictionary.projection_residuals(d, x) ** 2)
    for _ in range(25):
        q = np.linalg.qr(rng.standard_normal((8, k)))[0]
        other = Dictionary(atoms=q)
        competitor = np.sum(dictionary.projection_residuals(other, x) ** 2)
        assert best <= competitor + 1e-9


def test_svd_basis_validates_atom_count():
    x = np.random.default_rng(15).standard_normal((4, 3))
    with pytest.raises(ConfigError):
        dictionary.svd_basis_learn(x, 4)


def test_learn_dispatch_clamps_for_svd_mode():
    rng = np.random.default_rng(16)
    x = rng.standard_normal((5, 3))
    cfg = DictConfig(n_atoms=16, mode="svd_basis")
    d = dictionary.learn(x, cfg, np.random.default_rng(0))
    assert d.n_atoms == 3
    assert d.ridge == 0.0


# ------------------------------------------------------------- residuals


def test_residual_zero_in_span():
    rng = np.random.default_rng(17)
    d = random_dictionary(rng, 7, 3)
    x = d.atoms @ rng.standard_normal(3)
    assert dictionary.projection_residual(d, x) <= 1e-9


def test_residual_orthogonal_complement():
    d = Dictionary(atoms=np.array([[1.0], [0.0]]))
    assert dictionary.projection_residual(d, np.array([0.0, 1.0])) == pytest.approx(1.0)


def test_residual_matches_least_squares_oracle():
    rng = np.random.default_rng(18)
    for _ in range(30):
        d = random_dictionary(rng, 9, 4)
        x = rng.standard_normal(9)
        want = least_squares_residual_ref(d.atoms, x)
        assert dictionary.projection_residual(d, x) == pytest.approx(want, abs=1e-9)


def test_residual_contraction_even_with_ridge():
    rng = np.random.default_rng(19)
    for ridge in (0.0, 1e-8, 1e-2):
        d = random_dictionary(rng, 6, 3, ridge=ridge)
        for _ in range(20):
            x = rng.standard_normal(6)
            assert dictionary.projection_residual(d, x) <= np.linalg.norm(x) + 1e-12


def test_residual_batch_matches_single():
    rng = np.random.default_rng(20)
    d = random_dictionary(rng, 6, 2)
    x = rng.standard_normal((6, 9))
    batch = dictionary.projection_residuals(d, x)
    for j in range(9):
        assert batch[j] == pytest.approx(dictionary.projection_residual(d, x[:, j]))


def test_modes_agree_on_exact_subspace_data():
    rng = np.random.default_rng(21)
    basis_a = np.linalg.qr(rng.standard_normal((8, 2)))[0]
    basis_b = np.linalg.qr(rng.standard_normal((8, 2)))[0]
    xa = basis_a @ rng.standard_normal((2, 40))
    xb = basis_b @ rng.standard_normal((2, 40))
    # ridge 0 so the comparison sees pure span projection; the default
    # 1e-8 ridge shrinks residuals by up to ridge/eigmin(gram), which can
    # exceed the 1e-8 agreement bound for correlated atoms
    cfg_k = DictConfig(n_atoms=2, sparsity=2, ksvd_iters=6, ridge=0.0, mode="ksvd")
    cfg_s = DictConfig(n_atoms=2, sparsity=2, ksvd_iters=6, ridge=0.0, mode="svd_basis")
    pair_k = [dictionary.learn(x, cfg_k, np.random.default_rng(9)) for x in (xa, xb)]
    pair_s = [dictionary.learn(x, cfg_s, np.random.default_rng(9)) for x in (xa, xb)]
    queries = np.hstack([xa[:, :10], xb[:, :10]])
    res_k = [dictionary.projection_residuals(d, queries) for d in pair_k]
    res_s = [dictionary.projection_residuals(d, queries) for d in pair_s]
    assert np.abs(res_k[0] - res_s[0]).max() <= 1e-8
    assert np.abs(res_k[1] - res_s[1]).max() <= 1e-8
    decisions_k = res_k[0] <= res_k[1]
    decisions_s = res_s[0] <= res_s[1]
    assert np.array_equal(decisions_k, decisions_s)
