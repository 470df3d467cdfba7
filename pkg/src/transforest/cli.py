"""Command-line front end: train, eval, angles, synth, selfcheck."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import data, forest, model_io, selfcheck, transform
from .dictionary import DictConfig
from .errors import ConfigError, TransforestError
from .forest import TrainConfig
from .transform import LearnConfig


class _Parser(argparse.ArgumentParser):
    """Funnel every usage problem into the config error category (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


def _add_dataset_flags(p: _Parser) -> None:
    p.add_argument("--data", required=True, help="dataset path (IDX images or CSV)")
    p.add_argument("--labels", help="IDX label path (required for --format idx)")
    p.add_argument("--format", choices=("idx", "csv"), default="csv")
    p.add_argument("--resize", metavar="ROWSxCOLS",
                   help="bilinear-resize images, e.g. 16x16 (IDX data only)")


def _load_dataset(args) -> data.DenseDataset:
    if args.format == "idx":
        if not args.labels:
            raise ConfigError("--format idx requires --labels")
        ds = data.load_idx(args.data, args.labels)
    else:
        ds = data.load_csv(args.data)
    if args.resize:
        parts = args.resize.lower().split("x")
        if len(parts) != 2:
            raise ConfigError("--resize expects ROWSxCOLS, e.g. 16x16")
        try:
            rows, cols = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError("--resize expects integer ROWSxCOLS")
        ds = data.resize_dataset(ds, rows, cols)
    return ds


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"{flag} expects a comma-separated integer list")


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"{flag} expects a comma-separated number list")


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _metrics_payload(f, ds, seed, train_seconds, eval_seconds) -> dict:
    curve = forest.prefix_accuracy_curve(f, ds)
    matrix = forest.confusion_matrix(f, ds)
    return {
        "accuracy": float(curve[-1]),
        "accuracy_by_tree_count": [float(x) for x in curve],
        "confusion_matrix": matrix.tolist(),
        "train_seconds": train_seconds,
        "eval_seconds": eval_seconds,
        "seed": seed,
        "config_echo": model_io._config_payload(f.train_config_echo),
    }


# ----------------------------------------------------------------- train


def cmd_train(args) -> int:
    ds = _load_dataset(args)
    config = TrainConfig(
        n_trees=args.trees,
        max_depth=args.depth,
        min_node_samples=args.min_node,
        sample_fraction=args.sample_fraction,
        learn=LearnConfig(max_iters=args.learn_iters, output_rows=args.output_rows),
        dict=DictConfig(n_atoms=args.atoms, sparsity=args.sparsity, mode=args.dict_mode),
        seed=args.seed,
        learner_mode=args.learner,
    )
    t0 = time.perf_counter()
    f = forest.forest_train(ds, config)
    train_seconds = time.perf_counter() - t0

    model_io.save_forest(f, args.out)
    t1 = time.perf_counter()
    metrics = _metrics_payload(f, ds, args.seed, train_seconds, None)
    metrics["eval_seconds"] = time.perf_counter() - t1
    metrics["evaluated_on"] = "training set"
    metrics_path = args.metrics_out or (str(args.out) + ".metrics.json")
    _write_json(metrics_path, metrics)
    print(f"trained {f.n_trees} tree(s) in {train_seconds:.2f}s,"
          f" training accuracy {metrics['accuracy']:.4f}")
    print(f"model written to {args.out}")
    print(f"metrics written to {metrics_path}")
    return 0


# ------------------------------------------------------------------ eval


def cmd_eval(args) -> int:
    f = model_io.load_forest(args.model)
    ds = _load_dataset(args)
    t0 = time.perf_counter()
    metrics = _metrics_payload(f, ds, None, None, None)
    metrics["eval_seconds"] = time.perf_counter() - t0
    if args.out:
        _write_json(args.out, metrics)
    if args.curve_out:
        lines = ["trees,accuracy"]
        lines += [
            f"{k + 1},{acc:.17g}"
            for k, acc in enumerate(metrics["accuracy_by_tree_count"])
        ]
        Path(args.curve_out).write_text("\n".join(lines) + "\n")
    print(f"accuracy {metrics['accuracy']:.4f} over {ds.n_samples} samples"
          f" with {f.n_trees} tree(s)")
    return 0


# ---------------------------------------------------------------- angles


def _angle_rows(bases) -> list[tuple[int, int, float]]:
    mat = data.pairwise_angles(bases)
    k = len(bases)
    return [(i, j, float(mat[i, j])) for i in range(k) for j in range(i + 1, k)]


def cmd_angles(args) -> int:
    ds = _load_dataset(args)
    bases = data.class_bases(ds, max_rank=args.basis_rank)
    before = _angle_rows(bases)

    after = None
    if args.pos_classes:
        pos = set(_parse_int_list(args.pos_classes, "--pos-classes"))
        unknown = pos - set(range(ds.class_count))
        if unknown:
            raise ConfigError(f"--pos-classes names absent classes {sorted(unknown)}")
        if not pos or pos == set(range(ds.class_count)):
            raise ConfigError("--pos-classes must name a proper nonempty class subset")
        mask = np.isin(ds.labels, sorted(pos))
        y_pos = ds.features[:, mask]
        y_neg = ds.features[:, ~mask]
        cfg = LearnConfig(
            max_iters=args.learn_iters,
            init_mode="given",
            init_transform=transform.class_structure_init(y_pos, y_neg),
        )
        t, _ = transform.learn_transform(y_pos, y_neg, cfg)
        moved = data.DenseDataset(
            t @ ds.features, ds.labels, ds.class_count
        )
        after = _angle_rows(data.class_bases(moved, max_rank=args.basis_rank))

    header = "class_a,class_b,angle_before" + (",angle_after" if after else "")
    lines = [header]
    for idx, (i, j, theta) in enumerate(before):
        row = f"{i},{j},{theta:.6f}"
        if after:
            row += f",{after[idx][2]:.6f}"
        lines.append(row)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"angle report written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    dims = _parse_int_list(args.subspace_dims, "--subspace-dims")
    targets = (
        tuple(_parse_float_list(args.angles, "--angles")) if args.angles else None
    )
    assignment = (
        tuple(_parse_int_list(args.classes, "--classes")) if args.classes else None
    )
    spec = data.SubspaceSpec(
        ambient_dim=args.dim,
        subspace_dims=tuple(dims),
        points_per_subspace=args.points,
        noise_sigma=args.noise,
        pairwise_angle_targets=targets,
        class_assignment=assignment,
    )
    ds, _ = data.synth_subspaces(spec, np.random.default_rng(args.seed))
    data.save_csv(ds, args.out)
    echo = {
        "ambient_dim": spec.ambient_dim,
        "subspace_dims": list(spec.subspace_dims),
        "points_per_subspace": spec.points_per_subspace,
        "noise_sigma": spec.noise_sigma,
        "pairwise_angle_targets": list(targets) if targets else None,
        "class_assignment": list(assignment) if assignment else None,
        "seed": args.seed,
        "n_samples": ds.n_samples,
        "class_count": ds.class_count,
    }
    echo_path = args.echo_out or (str(args.out) + ".synth.json")
    _write_json(echo_path, echo)
    print(f"dataset written to {args.out} ({ds.n_samples} samples,"
          f" {ds.class_count} classes)")
    return 0


# ------------------------------------------------------------- selfcheck


def cmd_selfcheck(args) -> int:
    report = selfcheck.run_selfcheck(trials=args.trials, seed=args.seed)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 3


# ------------------------------------------------------------------ main


def build_parser() -> _Parser:
    parser = _Parser(prog="transforest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forest and write model + metrics")
    _add_dataset_flags(p)
    p.add_argument("--trees", type=int, default=1)
    p.add_argument("--depth", type=int, default=9)
    p.add_argument("--min-node", type=int, default=8)
    p.add_argument("--sample-fraction", type=float, default=1.0)
    p.add_argument("--atoms", type=int, default=16)
    p.add_argument("--sparsity", type=int, default=4)
    p.add_argument("--dict-mode", choices=("ksvd", "svd_basis"), default="ksvd")
    p.add_argument("--learner", choices=("transform", "identity"), default="transform")
    p.add_argument("--learn-iters", type=int, default=50,
                   help="max iterations for per-node transform learning")
    p.add_argument("--output-rows", type=int, default=None,
                   help="rows of each learned transform (default: feature dim)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--metrics-out", help="metrics JSON path (default <out>.metrics.json)")
    p.set_defaults(run=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a dataset")
    _add_dataset_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="metrics JSON path")
    p.add_argument("--curve-out", help="accuracy-vs-trees CSV path")
    p.set_defaults(run=cmd_eval)

    p = sub.add_parser("angles", help="pairwise class-subspace angles, before/after learning")
    _add_dataset_flags(p)
    p.add_argument("--basis-rank", type=int, default=1,
                   help="leading directions per class subspace")
    p.add_argument("--pos-classes",
                   help="comma list; learns a transform separating these classes from the rest")
    p.add_argument("--learn-iters", type=int, default=200)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(run=cmd_angles)

    p = sub.add_parser("synth", help="generate a synthetic subspace dataset as CSV")
    p.add_argument("--dim", type=int, required=True, help="ambient dimension")
    p.add_argument("--subspace-dims", required=True, help="comma list, e.g. 1,1,1")
    p.add_argument("--points", type=int, default=100, help="points per subspace")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--angles", help="pairwise angle targets, row-major upper triangle")
    p.add_argument("--classes", help="class label per subspace, e.g. 0,0,1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV dataset path")
    p.add_argument("--echo-out", help="generator settings JSON path (default <out>.synth.json)")
    p.set_defaults(run=cmd_synth)

    p = sub.add_parser("selfcheck", help="run randomized property suites")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=cmd_selfcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.run(args)
    except TransforestError as exc:
        print(f"error ({exc.category}): {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
