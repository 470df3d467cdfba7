"""Forest serialization.

Models are JSON with every matrix stored as rows/cols plus a row-major
number array. Floats are printed with 17 significant digits, which
round-trips every finite double exactly, so a saved model reproduces
bit-identical predictions. Dictionary projectors are not stored; they are
recomputed from the atoms at load time, which yields the same bits because
the atoms themselves round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .dictionary import Dictionary
from .errors import IoError, ParseError
from .forest import Forest, Leaf, Split, SplitLearner, Tree, TreeNode

FORMAT_VERSION = 1


# ----------------------------------------------------------- JSON writing


def _emit(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format(float(obj), ".17g"))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _emit(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(",")
            _emit(value, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dumps(obj) -> str:
    out: list = []
    _emit(obj, out)
    return "".join(out)


def _matrix_payload(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=np.float64)
    return {"rows": m.shape[0], "cols": m.shape[1], "data": m.ravel().tolist()}


def _vector_payload(v: np.ndarray) -> list:
    return np.asarray(v, dtype=np.float64).tolist()


def _config_payload(config) -> object:
    if is_dataclass(config) and not isinstance(config, type):
        config = asdict(config)
    if isinstance(config, dict):
        return {k: _config_payload(v) for k, v in config.items()}
    if isinstance(config, np.ndarray):
        return _matrix_payload(config) if config.ndim == 2 else _vector_payload(config)
    if isinstance(config, (list, tuple)):
        return [_config_payload(v) for v in config]
    return config


def _node_payload(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {
            "kind": "leaf",
            "posterior": _vector_payload(node.posterior),
            "sample_count": node.sample_count,
        }
    return {
        "kind": "split",
        "transform": _matrix_payload(node.learner.transform),
        "dict_pos": {
            "atoms": _matrix_payload(node.learner.dict_pos.atoms),
            "ridge": float(node.learner.dict_pos.ridge),
        },
        "dict_neg": {
            "atoms": _matrix_payload(node.learner.dict_neg.atoms),
            "ridge": float(node.learner.dict_neg.ridge),
        },
        "left": _node_payload(node.left),
        "right": _node_payload(node.right),
    }


def forest_payload(forest: Forest) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "class_count": forest.class_count,
        "feature_dim": forest.feature_dim,
        "train_config_echo": _config_payload(forest.train_config_echo),
        "trees": [
            {"cascade": bool(t.cascade), "root": _node_payload(t.root)}
            for t in forest.trees
        ],
    }


def save_forest(forest: Forest, path) -> None:
    text = _dumps(forest_payload(forest))
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write model file {path}: {exc}") from exc


# ----------------------------------------------------------- JSON reading


def _want(payload: dict, key: str, kinds, where: str):
    if not isinstance(payload, dict) or key not in payload:
        raise ParseError(f"model file missing {key!r} in {where}")
    value = payload[key]
    if not isinstance(value, kinds):
        raise ParseError(f"model file field {key!r} in {where} has the wrong type")
    return value


def _parse_matrix(payload, where: str) -> np.ndarray:
    rows = _want(payload, "rows", int, where)
    cols = _want(payload, "cols", int, where)
    data = _want(payload, "data", list, where)
    if rows < 0 or cols < 0 or len(data) != rows * cols:
        raise ParseError(f"matrix shape mismatch in {where}")
    try:
        m = np.array(data, dtype=np.float64).reshape(rows, cols)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric matrix data in {where}") from exc
    return m


def _parse_node(payload, where: str) -> TreeNode:
    kind = _want(payload, "kind", str, where)
    if kind == "leaf":
        posterior = _want(payload, "posterior", list, where)
        count = _want(payload, "sample_count", int, where)
        try:
            return Leaf(posterior=np.array(posterior, dtype=np.float64), sample_count=count)
        except Exception as exc:
            raise ParseError(f"invalid leaf in {where}: {exc}") from exc
    if kind == "split":
        transform = _parse_matrix(_want(payload, "transform", dict, where), where)
        dicts = []
        for side in ("dict_pos", "dict_neg"):
            entry = _want(payload, side, dict, where)
            atoms = _parse_matrix(_want(entry, "atoms", dict, f"{where}.{side}"), f"{where}.{side}")
            ridge = _want(entry, "ridge", (int, float), f"{where}.{side}")
            try:
                dicts.append(Dictionary(atoms=atoms, ridge=float(ridge)))
            except Exception as exc:
                raise ParseError(f"invalid dictionary in {where}.{side}: {exc}") from exc
        left = _parse_node(_want(payload, "left", dict, where), where + ".left")
        right = _parse_node(_want(payload, "right", dict, where), where + ".right")
        try:
            learner = SplitLearner(transform=transform, dict_pos=dicts[0], dict_neg=dicts[1])
        except Exception as exc:
            raise ParseError(f"invalid split learner in {where}: {exc}") from exc
        return Split(learner=learner, left=left, right=right)
    raise ParseError(f"unknown node kind {kind!r} in {where}")


def load_forest(path) -> Forest:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read model file {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file is not valid JSON: {exc}") from exc

    version = _want(payload, "format_version", int, "model")
    if version != FORMAT_VERSION:
        raise ParseError(
            f"unsupported format_version {version} (this build reads {FORMAT_VERSION})"
        )
    class_count = _want(payload, "class_count", int, "model")
    feature_dim = _want(payload, "feature_dim", int, "model")
    echo = payload.get("train_config_echo")
    tree_payloads = _want(payload, "trees", list, "model")
    if not tree_payloads:
        raise ParseError("model file contains no trees")
    trees = []
    for i, entry in enumerate(tree_payloads):
        where = f"trees[{i}]"
        cascade = _want(entry, "cascade", bool, where)
        root = _parse_node(_want(entry, "root", dict, where), where)
        trees.append(
            Tree(root=root, class_count=class_count, feature_dim=feature_dim, cascade=cascade)
        )
    try:
        return Forest(
            trees=tuple(trees),
            class_count=class_count,
            feature_dim=feature_dim,
            train_config_echo=echo,
        )
    except Exception as exc:
        raise ParseError(f"inconsistent forest payload: {exc}") from exc
