"""Entry point for the capls-da experiment CLI."""

import argparse
import logging
import os
import platform
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pydantic
import scipy

from capls_da import __version__
from capls_da.capls import run_source_only, run_uda
from capls_da.config import (
    DEFAULT_ITERATIONS,
    DEFAULT_KNOWN_CLASSES,
    DEFAULT_SPLIT_SEEDS,
    DEFAULT_SUBSPACE_DIM,
    SolverConfig,
    load_solver_config_from_env,
)
from capls_da.data import (
    ExperimentReport,
    SynthConfig,
    generate_synthetic,
    load_feature_matrix,
    load_features,
    load_labels,
    load_split,
    save_features,
    save_report,
)
from capls_da.errors import CaplsError, ConfigError, LengthMismatch
from capls_da.eval import run_baseline_1nn
from capls_da.metrics import per_class_accuracy, per_image_accuracy
from capls_da.preprocess import Domain, FeatureMatrix
from capls_da.slpp import LabeledDataset
from capls_da.zsl import ZslSplit, aggregate_metrics, fit_zsl, gzsl_metrics, make_split, split_target

logger = logging.getLogger("capls_da")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _versions() -> dict[str, str]:
    return {
        "capls_da": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "python": platform.python_version(),
    }


def _default_log_level() -> str:
    level = os.getenv("CAPLS_LOG_LEVEL", "WARNING").strip().upper()
    return level if level in LOG_LEVELS else "WARNING"


def _solver_from_args(args: argparse.Namespace) -> SolverConfig:
    return load_solver_config_from_env().with_overrides(ridge=args.ridge, temperature=args.temperature)


def _parse_seeds(raw: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"--split-seeds must be a comma-separated integer list, got {raw!r}.") from None
    if not seeds:
        raise ConfigError("--split-seeds must name at least one seed.")
    return seeds


def cmd_uda(args: argparse.Namespace) -> int:
    solver = _solver_from_args(args)
    source = load_features(args.source_features, args.source_labels, Domain.SOURCE)
    target = load_feature_matrix(args.target_features, Domain.TARGET)
    truth = load_labels(args.target_labels) if args.target_labels else None
    if truth is not None and truth.shape[0] != target.rows:
        raise LengthMismatch(f"{args.target_labels} has {truth.shape[0]} labels but the target has {target.rows} rows.")

    result = run_uda(
        source,
        target,
        args.dim,
        args.iters,
        projection=args.projection,
        selection=args.selection,
        solver=solver,
        zscore=args.zscore,
        target_truth=truth,
    )

    metrics: dict[str, Any] = {
        "subspace_dim": result.subspace_dim,
        "preprocessing_hash": result.fingerprint,
        "final_accuracy": None,
    }
    if truth is not None:
        metrics["final_accuracy"] = per_image_accuracy(result.predicted, truth)
        metrics["per_class_accuracy"] = {str(k): v for k, v in per_class_accuracy(result.predicted, truth).items()}
        if args.with_baselines:
            source_only = run_source_only(source, target, args.dim, projection=args.projection, solver=solver, zscore=args.zscore)
            metrics["baselines"] = {
                "source_only": per_image_accuracy(source_only.predicted, truth),
                "source_only_preprocessing_hash": source_only.fingerprint,
            }

    config = {
        "command": "uda",
        "source_features": args.source_features,
        "source_labels": args.source_labels,
        "target_features": args.target_features,
        "target_labels": args.target_labels,
        "dim": args.dim,
        "iters": args.iters,
        "seed": args.seed,
        "projection": args.projection,
        "selection": args.selection,
        "zscore": args.zscore,
        "with_baselines": args.with_baselines,
        "solver": solver.to_dict(),
        "preprocessing": result.preprocessing,
    }
    report = ExperimentReport(
        config=config,
        trace=[record.to_dict() for record in result.trace],
        metrics=metrics,
        versions=_versions(),
    )
    save_report(report, args.out)
    if metrics["final_accuracy"] is not None:
        print(f"accuracy={metrics['final_accuracy']:.4f}")
    return 0


def _zsl_splits(args: argparse.Namespace, target: LabeledDataset) -> list[ZslSplit]:
    if args.split_file:
        return [load_split(args.split_file)]
    return [make_split(target.labels, args.known_classes, seed) for seed in _parse_seeds(args.split_seeds)]


def _load_zsl_target(args: argparse.Namespace) -> tuple[LabeledDataset | None, list[tuple[ZslSplit, LabeledDataset | None, LabeledDataset]]]:
    explicit = args.target_train_features or args.target_test_features
    if not explicit:
        if not (args.target_features and args.target_labels):
            raise ConfigError("Provide --target-features/--target-labels or the explicit --target-train-*/--target-test-* files.")
        target = load_features(args.target_features, args.target_labels, Domain.TARGET)
        return target, [(split, *split_target(target, split)) for split in _zsl_splits(args, target)]

    required = (args.target_train_features, args.target_train_labels, args.target_test_features, args.target_test_labels)
    if not all(required):
        raise ConfigError("Explicit target files need --target-train-features/labels and --target-test-features/labels.")
    test = load_features(args.target_test_features, args.target_test_labels, Domain.TARGET)
    train = load_features(args.target_train_features, args.target_train_labels, Domain.TARGET)
    known = tuple(train.classes().tolist())
    unseen = tuple(sorted(set(test.classes().tolist()) - set(known)))
    split = ZslSplit(known_classes=known, unseen_classes=unseen, target_train_rows=(), target_test_rows=tuple(range(test.rows)))
    return None, [(split, train, test)]


def cmd_zsl(args: argparse.Namespace) -> int:
    solver = _solver_from_args(args)
    source = load_features(args.source_features, args.source_labels, Domain.SOURCE)
    _, runs = _load_zsl_target(args)

    per_split: list[dict[str, Any]] = []
    results = []
    for split, target_train, target_test in runs:
        fitted = fit_zsl(source, target_train, args.dim, projection=args.projection, solver=solver, zscore=args.zscore)
        test_features = FeatureMatrix(target_test.x, Domain.TARGET)
        predicted = fitted.predict(test_features, temperature=solver.temperature).predicted
        scores = gzsl_metrics(predicted, target_test.labels, split)
        results.append(scores)
        entry: dict[str, Any] = {
            "seed": split.seed,
            "known_classes": list(split.known_classes),
            "unseen_classes": list(split.unseen_classes),
            "subspace_dim": fitted.subspace_dim,
            "preprocessing_hash": fitted.fingerprint,
            **scores.to_dict(),
        }
        if args.with_baselines:
            pre = fitted.preprocessor
            baseline = run_baseline_1nn(
                source.with_features(pre.apply(source.features)),
                target_train.with_features(pre.apply(target_train.features)) if target_train is not None else None,
                pre.apply(test_features),
            )
            entry["baseline_1nn"] = gzsl_metrics(baseline, target_test.labels, split).to_dict()
        per_split.append(entry)
        logger.info("zsl split seed=%s harmonic=%.4f", split.seed, scores.harmonic)

    summary = aggregate_metrics(results)
    config = {
        "command": "zsl",
        "source_features": args.source_features,
        "source_labels": args.source_labels,
        "target_features": args.target_features,
        "target_labels": args.target_labels,
        "target_train_features": args.target_train_features,
        "target_train_labels": args.target_train_labels,
        "target_test_features": args.target_test_features,
        "target_test_labels": args.target_test_labels,
        "known_classes": args.known_classes,
        "split_file": args.split_file,
        "split_seeds": args.split_seeds,
        "dim": args.dim,
        "projection": args.projection,
        "zscore": args.zscore,
        "with_baselines": args.with_baselines,
        "solver": solver.to_dict(),
    }
    report = ExperimentReport(
        config=config,
        trace=per_split,
        metrics={"splits": [{k: entry[k] for k in ("seed", "acc_known", "acc_unseen", "harmonic")} for entry in per_split], "aggregate": summary},
        versions=_versions(),
    )
    save_report(report, args.out)
    harmonic = summary["harmonic"]
    print(f"harmonic={harmonic['mean']:.4f}±{harmonic['sem']:.4f}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig(
        n_classes=args.classes,
        n_per_class_source=args.per_class_source,
        n_per_class_target=args.per_class_target,
        dim=args.dim,
        class_sep=args.class_sep,
        rotation=args.rotation,
        translation=args.translation,
        offset=args.offset,
        noise=args.noise,
        seed=args.seed,
    )
    bundle = generate_synthetic(cfg)
    out_dir = Path(args.out_dir)
    suffix = ".bin" if args.format == "bin" else ".csv"
    for name, dataset in bundle.domains.items():
        features_path = out_dir / f"{name}_features{suffix}"
        labels_path = out_dir / f"{name}_labels.txt"
        save_features(dataset, features_path, labels_path)
        print(features_path)
        print(labels_path)
    return 0


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dim", type=int, default=DEFAULT_SUBSPACE_DIM)
    parser.add_argument("--projection", choices=("slpp", "lda"), default="slpp")
    parser.add_argument("--zscore", action="store_true")
    parser.add_argument("--ridge", type=float, default=None)
    parser.add_argument("--temperature", type=float, default=None)
    parser.add_argument("--with-baselines", action="store_true")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Joint-subspace domain adaptation experiments")
    parser.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS, default=_default_log_level())
    subparsers = parser.add_subparsers(dest="command")

    uda_parser = subparsers.add_parser("uda", help="Unsupervised domain adaptation with pseudo-label selection")
    uda_parser.add_argument("--source-features", required=True)
    uda_parser.add_argument("--source-labels", required=True)
    uda_parser.add_argument("--target-features", required=True)
    uda_parser.add_argument("--target-labels", default=None, help="ground truth, used for evaluation only")
    uda_parser.add_argument("--iters", type=int, default=DEFAULT_ITERATIONS)
    uda_parser.add_argument("--seed", type=int, default=0)
    uda_parser.add_argument("--selection", choices=("capls", "all"), default="capls")
    uda_parser.add_argument("--out", default="capls-uda-report.json")
    _add_solver_flags(uda_parser)

    zsl_parser = subparsers.add_parser("zsl", help="Generalized zero-shot condition over known/unseen class splits")
    zsl_parser.add_argument("--source-features", required=True)
    zsl_parser.add_argument("--source-labels", required=True)
    zsl_parser.add_argument("--target-features", default=None)
    zsl_parser.add_argument("--target-labels", default=None)
    zsl_parser.add_argument("--target-train-features", default=None)
    zsl_parser.add_argument("--target-train-labels", default=None)
    zsl_parser.add_argument("--target-test-features", default=None)
    zsl_parser.add_argument("--target-test-labels", default=None)
    zsl_parser.add_argument("--known-classes", type=int, default=DEFAULT_KNOWN_CLASSES)
    zsl_parser.add_argument("--split-file", default=None)
    zsl_parser.add_argument("--split-seeds", default=",".join(str(seed) for seed in DEFAULT_SPLIT_SEEDS))
    zsl_parser.add_argument("--out", default="capls-zsl-report.json")
    _add_solver_flags(zsl_parser)

    synth_parser = subparsers.add_parser("synth", help="Write a synthetic source/target bundle")
    defaults = SynthConfig()
    synth_parser.add_argument("--classes", type=int, default=defaults.n_classes)
    synth_parser.add_argument("--per-class-source", type=int, default=defaults.n_per_class_source)
    synth_parser.add_argument("--per-class-target", type=int, default=defaults.n_per_class_target)
    synth_parser.add_argument("--dim", type=int, default=defaults.dim)
    synth_parser.add_argument("--class-sep", type=float, default=defaults.class_sep)
    synth_parser.add_argument("--rotation", type=float, default=defaults.rotation)
    synth_parser.add_argument("--translation", type=float, default=defaults.translation)
    synth_parser.add_argument("--offset", type=float, default=defaults.offset, help="norm of the feature offset shared by all classes")
    synth_parser.add_argument("--noise", type=float, default=defaults.noise)
    synth_parser.add_argument("--seed", type=int, default=defaults.seed)
    synth_parser.add_argument("--format", choices=("csv", "bin"), default="csv")
    synth_parser.add_argument("--out-dir", default=".")

    return parser


COMMANDS = {"uda": cmd_uda, "zsl": cmd_zsl, "synth": cmd_synth}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(list(argv) if argv is not None else None)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    if args.command is None:
        parser.error("A command is required: uda, zsl or synth.")

    try:
        return COMMANDS[args.command](args)
    except CaplsError as error:
        logger.debug("command failed", exc_info=True)
        print(f"error: {error}", file=sys.stderr)
        return error.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
