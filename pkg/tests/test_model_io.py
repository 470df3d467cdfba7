"""Tests for model serialization round-trips and format gating."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from transforest import forest, model_io
from transforest.data import SubspaceSpec, synth_subspaces
from transforest.dictionary import DictConfig
from transforest.errors import IoError, ParseError
from transforest.forest import TrainConfig
from transforest.transform import LearnConfig


def trained_forest(n_trees=2, classes=3, seed=0):
    spec = SubspaceSpec(
        ambient_dim=4,
        subspace_dims=(1,) * classes,
        points_per_subspace=30,
        noise_sigma=0.02,
    )
    ds, _ = synth_subspaces(spec, np.random.default_rng(seed))
    cfg = TrainConfig(
        n_trees=n_trees,
        max_depth=3,
        min_node_samples=4,
        sample_fraction=0.9 if n_trees > 1 else 1.0,
        learn=LearnConfig(max_iters=40),
        dict=DictConfig(n_atoms=2, sparsity=2, ksvd_iters=3),
        seed=seed,
    )
    return forest.forest_train(ds, cfg), ds


def test_round_trip_bit_identical_predictions(tmp_path):
    f, ds = trained_forest()
    path = tmp_path / "model.json"
    model_io.save_forest(f, path)
    g = model_io.load_forest(path)
    rng = np.random.default_rng(1)
    for _ in range(40):
        y = rng.standard_normal(ds.dim)
        pa, ca = forest.forest_predict(f, y)
        pb, cb = forest.forest_predict(g, y)
        assert_allclose(pa, pb, rtol=0, atol=0)
        assert ca == cb
    assert_allclose(
        forest._forest_posterior_stack(f, ds.features),
        forest._forest_posterior_stack(g, ds.features),
        rtol=0, atol=0,
    )


def test_save_is_byte_deterministic(tmp_path):
    f, _ = trained_forest()
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    model_io.save_forest(f, a)
    model_io.save_forest(f, b)
    assert a.read_bytes() == b.read_bytes()


def test_seventeen_digit_floats_round_trip(tmp_path):
    f, _ = trained_forest(n_trees=1)
    path = tmp_path / "model.json"
    model_io.save_forest(f, path)
    g = model_io.load_forest(path)

    def transforms(node, out):
        if isinstance(node, forest.Split):
            out.append(node.learner.transform)
            transforms(node.left, out)
            transforms(node.right, out)

    orig, loaded = [], []
    transforms(f.trees[0].root, orig)
    transforms(g.trees[0].root, loaded)
    assert orig and len(orig) == len(loaded)
    for a, b in zip(orig, loaded):
        assert np.array_equal(a, b)


def test_unknown_format_version_rejected(tmp_path):
    f, _ = trained_forest(n_trees=1)
    path = tmp_path / "model.json"
    model_io.save_forest(f, path)
    payload = json.loads(path.read_text())
    payload["format_version"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises(ParseError, match="format_version"):
        model_io.load_forest(path)


def test_corrupt_payload_rejected(tmp_path):
    f, _ = trained_forest(n_trees=1)
    path = tmp_path / "model.json"
    model_io.save_forest(f, path)
    payload = json.loads(path.read_text())

    def first_split(node):
        return node if node["kind"] == "split" else None

    node = first_split(payload["trees"][0]["root"])
    if node is not None:
        node["transform"]["data"] = node["transform"]["data"][:-1]
        path.write_text(json.dumps(payload))
        with pytest.raises(ParseError, match="shape"):
            model_io.load_forest(path)


def test_not_json_rejected(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("this is not json")
    with pytest.raises(ParseError, match="JSON"):
        model_io.load_forest(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        model_io.load_forest(tmp_path / "missing.json")


def test_empty_tree_list_rejected(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({
        "format_version": 1, "class_count": 2, "feature_dim": 3,
        "train_config_echo": None, "trees": [],
    }))
    with pytest.raises(ParseError, match="no trees"):
        model_io.load_forest(path)


def test_config_echo_survives(tmp_path):
    f, _ = trained_forest(n_trees=1)
    path = tmp_path / "model.json"
    model_io.save_forest(f, path)
    g = model_io.load_forest(path)
    echo = g.train_config_echo
    assert echo["n_trees"] == 1
    assert echo["max_depth"] == 3
    assert echo["dict"]["n_atoms"] == 2
    assert echo["learn"]["max_iters"] == 40
