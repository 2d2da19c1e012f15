"""Command-line interface and end-to-end pipeline orchestration.

Subcommands mirror the pipeline stages (synth, ingest, features, screen,
train, evaluate, permtest, report) plus ``run``, which drives the whole
protocol from a JSON config: per (variety, algorithm) cell it balances,
splits, scales, tunes by successive halving, fits, bootstraps the test
set, runs the permutation test, and extracts tree importances.

Every seed used anywhere derives from the master seed and the cell's
coordinates, so a run is reproducible byte-for-byte. Exit codes: 0 ok,
2 configuration error, 3 data error, 4 convergence error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    ALL_VARIETIES,
    FeatureTable,
    SplitIndices,
    apply_scaler,
    downsample_balance,
    filter_by_variety,
    fit_standard_scaler,
    table_from_csv,
    table_to_csv,
    train_test_split,
)
from .errors import ConfigurationError, InputError, ToolkitError
from .evaluation import (
    METRIC_NAMES,
    bootstrap_evaluate,
    distribution_summary,
    distribution_to_csv,
    impurity_importance,
    importance_to_csv,
    load_distribution_csv,
    permutation_test,
)
from .geodata import (
    REQUIRED_BANDS,
    extract_labeled_pixels,
    LabeledPixel,
    load_band_rasters,
    load_blocks,
)
from .indices import build_feature_matrix, make_role_map
from .learners.base import ALGORITHMS, fit_model, load_model
from .screening import screen_table, screen_to_csv
from .seeds import derive_seed
from .synth import generate_synthetic_scene, table1_config
from .tuning import (
    HalvingConfig,
    audit_to_csv,
    default_grid,
    halving_grid_search,
)

logger = logging.getLogger(__name__)

_LABEL_NAMES = {1: "Positive", 0: "Negative"}


def _atomic_write(path: Path, writer_fn) -> None:
    """Write through a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    os.close(fd)
    try:
        writer_fn(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunConfig:
    """Validated parameters of one end-to-end run."""

    output_dir: Path
    seed: int = 20220227
    varieties: list = field(default_factory=lambda: [ALL_VARIETIES])
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    k: int = 10
    test_fraction: float = 0.2
    alpha: float = 0.05
    bootstrap_samples: int = 5000
    permutation_rounds: int = 1000
    grids: dict = field(default_factory=dict)
    halving_eta: int = 3
    halving_min_resource: int | None = None
    scale: float = 1e-4
    band_manifest: Path | None = None
    blocks: Path | None = None
    role_overrides: dict = field(default_factory=dict)
    synthetic: dict | None = None

    def validate(self) -> None:
        if not self.varieties:
            raise ConfigurationError("varieties list is empty")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigurationError(f"unknown algorithms {sorted(unknown)}")
        if not self.algorithms:
            raise ConfigurationError("algorithms list is empty")
        if self.k < 2:
            raise ConfigurationError(f"k must be >= 2, got {self.k}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError(f"test_fraction must be in (0,1), got {self.test_fraction}")
        if self.bootstrap_samples < 1:
            raise ConfigurationError("bootstrap_samples must be >= 1")
        if self.permutation_rounds < 1:
            raise ConfigurationError("permutation_rounds must be >= 1")
        for algo in self.grids:
            if algo not in ALGORITHMS:
                raise ConfigurationError(f"grid for unknown algorithm {algo!r}")
        HalvingConfig(eta=self.halving_eta, min_resource=self.halving_min_resource)
        make_role_map(self.role_overrides)
        if self.synthetic is None:
            if self.band_manifest is None or self.blocks is None:
                raise ConfigurationError(
                    "config needs either a synthetic block or band_manifest + blocks paths"
                )
            for name, p in (("band_manifest", self.band_manifest), ("blocks", self.blocks)):
                if not Path(p).exists():
                    raise ConfigurationError(f"{name} path does not exist: {p}")


def load_run_config(path, overrides: dict | None = None) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"unreadable config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON in config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: config must be a JSON object")
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {
        "output_dir",
        "seed",
        "varieties",
        "algorithms",
        "k",
        "test_fraction",
        "alpha",
        "bootstrap_samples",
        "permutation_rounds",
        "grids",
        "halving_eta",
        "halving_min_resource",
        "scale",
        "band_manifest",
        "blocks",
        "role_overrides",
        "synthetic",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"{path}: unknown config keys {sorted(unknown)}")
    if "output_dir" not in doc:
        raise ConfigurationError(f"{path}: output_dir is required")
    kwargs = dict(doc)
    kwargs["output_dir"] = Path(doc["output_dir"])
    for key in ("band_manifest", "blocks"):
        if kwargs.get(key) is not None:
            kwargs[key] = Path(kwargs[key])
    config = RunConfig(**kwargs)
    config.validate()
    return config


def _load_input_table(config: RunConfig) -> FeatureTable:
    if config.synthetic is not None:
        synth_args = dict(config.synthetic)
        unknown = set(synth_args) - {"seed", "separation", "nodata_rate"}
        if unknown:
            raise ConfigurationError(f"unknown synthetic keys {sorted(unknown)}")
        scene = generate_synthetic_scene(
            table1_config(
                seed=synth_args.get("seed", config.seed),
                separation=synth_args.get("separation", 1.0),
                nodata_rate=synth_args.get("nodata_rate", 0.0),
            )
        )
        return scene.table
    rasters = load_band_rasters(config.band_manifest, scale=config.scale)
    blocks = load_blocks(config.blocks)
    pixels = extract_labeled_pixels(rasters, blocks)
    table, n_dropped = build_feature_matrix(pixels, make_role_map(config.role_overrides))
    if n_dropped:
        logger.info("feature stage dropped %d pixels", n_dropped)
    return table


def _prepare_variety(table: FeatureTable, variety: str, config: RunConfig):
    """Balance, split, and scale one variety's rows."""
    vt = filter_by_variety(table, variety)
    balanced = downsample_balance(vt, derive_seed(config.seed, "balance", variety))
    split = train_test_split(
        balanced, config.test_fraction, derive_seed(config.seed, "split", variety)
    )
    scaler = fit_standard_scaler(balanced, split.train)
    scaled = apply_scaler(scaler, balanced)
    return scaled, split, scaler


def run_pipeline(config: RunConfig) -> Path:
    """Execute the full protocol; returns the run directory.

    A failing stage aborts only its (variety, algorithm) cell; the failure
    is recorded in run_manifest.json and the other cells proceed.
    """
    config.validate()
    table = _load_input_table(config)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "distributions").mkdir(exist_ok=True)
    (out / "importance").mkdir(exist_ok=True)

    screen_results = screen_table(table, varieties=config.varieties, alpha=config.alpha)
    _atomic_write(out / "screen.csv", lambda p: screen_to_csv(screen_results, p))

    manifest = {
        "toolkit_version": __version__,
        "master_seed": config.seed,
        "varieties": config.varieties,
        "algorithms": config.algorithms,
        "k": config.k,
        "test_fraction": config.test_fraction,
        "alpha": config.alpha,
        "bootstrap_samples": config.bootstrap_samples,
        "permutation_rounds": config.permutation_rounds,
        "halving": {"eta": config.halving_eta, "min_resource": config.halving_min_resource},
        "defaults": {
            "scaler": "population-std standardization fit on training rows",
            "balance": "majority class downsampled without replacement",
            "split": "stratified, round(N*fraction) test rows",
            "rf_tie_break": "negative class",
            "permutation": "training labels shuffled, test labels intact",
            "bootstrap": "test predictions resampled, model fixed",
            "p_value": "plus-one convention",
        },
        "grids": {},
        "cells": {},
    }

    audit_rows = []  # (variety, algorithm, AuditRow)
    metrics_rows = []
    hyper_rows = []

    for variety in config.varieties:
        try:
            scaled, split, _ = _prepare_variety(table, variety, config)
            X_train = scaled.features[split.train]
            y_train = scaled.labels[split.train]
            X_test = scaled.features[split.test]
            y_test = scaled.labels[split.test]
        except ToolkitError as exc:
            for algo in config.algorithms:
                manifest["cells"][f"{algo}:{variety}"] = {
                    "status": "error",
                    "stage": "prepare",
                    "error": type(exc).__name__,
                    "message": str(exc),
                }
            logger.warning("variety %s preparation failed: %s", variety, exc)
            continue
        for algo in config.algorithms:
            cell_key = f"{algo}:{variety}"
            try:
                grid = config.grids.get(algo) or default_grid(algo)
                manifest["grids"][algo] = grid
                tune_result = halving_grid_search(
                    algo,
                    grid,
                    X_train,
                    y_train,
                    k=config.k,
                    config=HalvingConfig(
                        eta=config.halving_eta, min_resource=config.halving_min_resource
                    ),
                    seed=derive_seed(config.seed, "tune", variety, algo),
                )
                for row in tune_result.audit:
                    audit_rows.append((variety, algo, row))
                model = fit_model(
                    tune_result.best_spec,
                    X_train,
                    y_train,
                    seed=derive_seed(config.seed, "fit", variety, algo),
                )
                boot = bootstrap_evaluate(
                    model,
                    X_test,
                    y_test,
                    b=config.bootstrap_samples,
                    seed=derive_seed(config.seed, "bootstrap", variety, algo),
                )
                perm = permutation_test(
                    tune_result.best_spec,
                    X_train,
                    y_train,
                    X_test,
                    y_test,
                    b=config.permutation_rounds,
                    seed=derive_seed(config.seed, "permutation", variety, algo),
                    observed=boot.medians,
                )
                tag = f"{algo}_{variety}"
                _atomic_write(
                    out / "distributions" / f"{tag}_bootstrap.csv",
                    lambda p, d=boot: distribution_to_csv(d, p),
                )
                _atomic_write(
                    out / "distributions" / f"{tag}_null.csv",
                    lambda p, d=perm.null: distribution_to_csv(d, p),
                )
                if algo in ("RF", "GB"):
                    report = impurity_importance(model, feature_names=scaled.feature_names)
                    _atomic_write(
                        out / "importance" / f"{tag}.csv",
                        lambda p, r=report: importance_to_csv(r, p),
                    )
                for cls in ("Positive", "Negative"):
                    suffix = "positive" if cls == "Positive" else "negative"
                    metrics_rows.append(
                        [
                            algo,
                            variety,
                            cls,
                            f"{boot.medians[f'precision_{suffix}']:.6f}",
                            f"{boot.medians[f'recall_{suffix}']:.6f}",
                            f"{boot.medians['accuracy']:.6f}",
                        ]
                    )
                hyper_rows.append(
                    [
                        algo,
                        variety,
                        json.dumps(tune_result.best_spec.hyperparameters, sort_keys=True),
                        f"{tune_result.best_score:.6f}",
                    ]
                )
                manifest["cells"][cell_key] = {
                    "status": "ok",
                    "best_hyperparameters": tune_result.best_spec.hyperparameters,
                    "cv_accuracy": tune_result.best_score,
                    "n_train": int(len(y_train)),
                    "n_test": int(len(y_test)),
                    "p_values": perm.p_values,
                    "seeds": {
                        stage: derive_seed(config.seed, stage, variety, algo)
                        for stage in ("tune", "fit", "bootstrap", "permutation")
                    },
                }
                logger.info(
                    "cell %s done: median accuracy %.3f", cell_key, boot.medians["accuracy"]
                )
            except ToolkitError as exc:
                manifest["cells"][cell_key] = {
                    "status": "error",
                    "stage": "model",
                    "error": type(exc).__name__,
                    "message": str(exc),
                }
                logger.warning("cell %s failed: %s", cell_key, exc)

    def write_audit(p: Path):
        with p.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["variety", "algorithm", "round", "params", "budget", "fold_scores", "mean"]
            )
            for variety, algo, row in audit_rows:
                writer.writerow(
                    [
                        variety,
                        algo,
                        row.round,
                        json.dumps(row.spec.hyperparameters, sort_keys=True),
                        row.budget,
                        json.dumps([round(s, 9) for s in row.fold_scores]),
                        f"{row.mean_score:.9f}",
                    ]
                )

    def write_metrics(p: Path):
        with p.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "variety", "class", "precision", "recall", "accuracy"])
            writer.writerows(metrics_rows)

    def write_hyper(p: Path):
        with p.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "variety", "hyperparameters", "cv_accuracy"])
            writer.writerows(hyper_rows)

    _atomic_write(out / "tuning_audit.csv", write_audit)
    _atomic_write(out / "metrics_table.csv", write_metrics)
    _atomic_write(out / "hyperparams_table.csv", write_hyper)
    _atomic_write(
        out / "run_manifest.json",
        lambda p: p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n"),
    )
    return out


def emit_report(run_dir) -> tuple[Path, Path]:
    """Consolidate a run directory into summary.csv and summary.json.

    Cells whose failure was recorded in the manifest are reported as
    failed; cells expected by the manifest but absent from disk make the
    run incomplete and raise.
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / "run_manifest.json"
    if not manifest_path.exists():
        raise InputError(f"{run_dir} has no run_manifest.json")
    manifest = json.loads(manifest_path.read_text())
    expected = [
        (algo, variety)
        for variety in manifest["varieties"]
        for algo in manifest["algorithms"]
    ]
    missing = []
    rows = []
    summary: dict = {"cells": {}, "failed": {}}
    for algo, variety in expected:
        cell = manifest["cells"].get(f"{algo}:{variety}")
        if cell is None:
            missing.append(f"{algo}:{variety}")
            continue
        if cell["status"] != "ok":
            summary["failed"][f"{algo}:{variety}"] = {
                "error": cell.get("error"),
                "message": cell.get("message"),
            }
            continue
        tag = f"{algo}_{variety}"
        boot_path = run_dir / "distributions" / f"{tag}_bootstrap.csv"
        null_path = run_dir / "distributions" / f"{tag}_null.csv"
        if not boot_path.exists() or not null_path.exists():
            missing.append(f"{algo}:{variety}")
            continue
        boot = load_distribution_csv(boot_path)
        null = load_distribution_csv(null_path)
        p_values = cell["p_values"]
        acc_idx = METRIC_NAMES.index("accuracy")
        overlap = bool(
            null.samples[:, acc_idx].max() >= boot.samples[:, acc_idx].min()
        )
        cell_summary = {
            "metrics": distribution_summary(boot, p_values=p_values),
            "null_overlap": overlap,
            "hyperparameters": cell["best_hyperparameters"],
            "cv_accuracy": cell["cv_accuracy"],
        }
        summary["cells"][f"{algo}:{variety}"] = cell_summary
        for name in METRIC_NAMES:
            entry = cell_summary["metrics"][name]
            rows.append(
                [
                    algo,
                    variety,
                    name,
                    f"{entry['median']:.6f}",
                    f"{entry['p2.5']:.6f}",
                    f"{entry['p97.5']:.6f}",
                    f"{entry['p_value']:.6f}",
                    str(overlap).lower(),
                ]
            )
    if missing:
        raise InputError(f"run is incomplete; missing cells: {', '.join(sorted(missing))}")

    csv_path = run_dir / "summary.csv"
    json_path = run_dir / "summary.json"

    def write_csv(p: Path):
        with p.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "model",
                    "variety",
                    "metric",
                    "median",
                    "p2.5",
                    "p97.5",
                    "p_value",
                    "null_overlap",
                ]
            )
            writer.writerows(rows)

    _atomic_write(csv_path, write_csv)
    _atomic_write(
        json_path,
        lambda p: p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n"),
    )
    return csv_path, json_path


def _pixels_to_csv(pixels, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block_id", "variety", "label", "x", "y"] + list(REQUIRED_BANDS))
        for px in pixels:
            writer.writerow(
                [px.block_id, px.variety, _LABEL_NAMES[px.label], repr(px.x), repr(px.y)]
                + [repr(px.reflectances[b]) for b in REQUIRED_BANDS]
            )


def _pixels_from_csv(path) -> list:
    try:
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise InputError(f"unreadable pixels file {path}: {exc}") from exc
    expected = ["block_id", "variety", "label", "x", "y"] + list(REQUIRED_BANDS)
    if header != expected:
        raise InputError(f"{path}: unexpected pixel CSV header")
    pixels = []
    for r, row in enumerate(rows):
        if len(row) != len(expected):
            raise InputError(f"{path}: row {r} has {len(row)} cells")
        if row[2] not in ("Positive", "Negative"):
            raise InputError(f"{path}: row {r} has unknown label {row[2]!r}")
        pixels.append(
            LabeledPixel(
                block_id=row[0],
                variety=row[1],
                label=1 if row[2] == "Positive" else 0,
                x=float(row[3]),
                y=float(row[4]),
                reflectances={b: float(row[5 + i]) for i, b in enumerate(REQUIRED_BANDS)},
            )
        )
    return pixels


def _cmd_synth(args) -> int:
    config = table1_config(
        seed=args.seed, separation=args.separation, nodata_rate=args.nodata_rate
    )
    result = generate_synthetic_scene(config, out_dir=args.out)
    counts = result.class_counts()
    print(f"scene written to {args.out}")
    for variety in sorted(counts):
        pos, neg = counts[variety]
        print(f"  {variety}: {pos} positive / {neg} negative pixels")
    return 0


def _cmd_ingest(args) -> int:
    rasters = load_band_rasters(args.manifest, scale=args.scale)
    blocks = load_blocks(args.blocks)
    pixels = extract_labeled_pixels(rasters, blocks)
    _atomic_write(Path(args.out), lambda p: _pixels_to_csv(pixels, p))
    print(f"{len(pixels)} labeled pixels -> {args.out}")
    return 0


def _cmd_features(args) -> int:
    pixels = _pixels_from_csv(args.pixels)
    overrides = {}
    for item in args.role or []:
        if "=" not in item:
            raise ConfigurationError(f"--role expects ROLE=BAND, got {item!r}")
        role, band = item.split("=", 1)
        overrides[role] = band
    table, n_dropped = build_feature_matrix(pixels, make_role_map(overrides))
    _atomic_write(Path(args.out), lambda p: table_to_csv(table, p))
    print(f"{table.n_rows} feature rows ({n_dropped} dropped) -> {args.out}")
    return 0


def _cmd_screen(args) -> int:
    table, _ = table_from_csv(args.features)
    varieties = args.variety or None
    results = screen_table(table, varieties=varieties, alpha=args.alpha)
    _atomic_write(Path(args.out), lambda p: screen_to_csv(results, p))
    n_sig = sum(r.significant for r in results)
    print(f"{len(results)} tests, {n_sig} significant at alpha={args.alpha} -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    table, _ = table_from_csv(args.features)
    balanced = downsample_balance(
        filter_by_variety(table, args.variety),
        derive_seed(args.seed, "balance", args.variety),
    )
    grid = json.loads(args.grid) if args.grid else default_grid(args.algorithm)
    halving = HalvingConfig(eta=args.eta, min_resource=args.min_resource)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if args.full:
        scaler = fit_standard_scaler(balanced)
        scaled = apply_scaler(scaler, balanced)
        X, y = scaled.features, scaled.labels
        split = None
    else:
        split = train_test_split(
            balanced, args.test_fraction, derive_seed(args.seed, "split", args.variety)
        )
        scaler = fit_standard_scaler(balanced, split.train)
        scaled = apply_scaler(scaler, balanced)
        X, y = scaled.features[split.train], scaled.labels[split.train]

    tune_result = halving_grid_search(
        args.algorithm,
        grid,
        X,
        y,
        k=args.k,
        config=halving,
        seed=derive_seed(args.seed, "tune", args.variety, args.algorithm),
    )
    model = fit_model(
        tune_result.best_spec,
        X,
        y,
        seed=derive_seed(args.seed, "fit", args.variety, args.algorithm),
    )
    model.meta.update(
        {
            "variety": args.variety,
            "feature_names": scaled.feature_names,
            "scaler_mean": scaler.mean.tolist(),
            "scaler_std": scaler.std.tolist(),
            "trained_on": "full" if args.full else "train-split",
        }
    )
    _atomic_write(out / "model.json", lambda p: model.save(p))
    _atomic_write(out / "tuning_audit.csv", lambda p: audit_to_csv(tune_result, p))
    _atomic_write(out / "data.csv", lambda p: table_to_csv(scaled, p, split=split))
    if args.full:

        def write_hyper(p: Path):
            with p.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["model", "variety", "hyperparameters", "cv_accuracy"])
                writer.writerow(
                    [
                        args.algorithm,
                        args.variety,
                        json.dumps(tune_result.best_spec.hyperparameters, sort_keys=True),
                        f"{tune_result.best_score:.6f}",
                    ]
                )

        _atomic_write(out / "hyperparams_table.csv", write_hyper)
    print(
        f"{args.algorithm} on {args.variety}: best "
        f"{tune_result.best_spec.hyperparameters} "
        f"(cv accuracy {tune_result.best_score:.4f}) -> {out}"
    )
    return 0


def _split_from_data(path):
    table, split = table_from_csv(path)
    if split is None:
        raise InputError(f"{path} has no split column; run train without --full first")
    return table, split


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    table, split = _split_from_data(args.data)
    X_test = table.features[split.test]
    y_test = table.labels[split.test]
    dist = bootstrap_evaluate(model, X_test, y_test, b=args.bootstrap, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "bootstrap.csv", lambda p: distribution_to_csv(dist, p))
    _atomic_write(
        out / "bootstrap_summary.json",
        lambda p: p.write_text(
            json.dumps(distribution_summary(dist), indent=2, sort_keys=True) + "\n"
        ),
    )
    print(f"median accuracy {dist.medians['accuracy']:.4f} over {dist.b} resamples -> {out}")
    return 0


def _cmd_permtest(args) -> int:
    model = load_model(args.model)
    table, split = _split_from_data(args.data)
    result = permutation_test(
        model.spec,
        table.features[split.train],
        table.labels[split.train],
        table.features[split.test],
        table.labels[split.test],
        b=args.rounds,
        seed=args.seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "null.csv", lambda p: distribution_to_csv(result.null, p))
    _atomic_write(
        out / "permutation_summary.json",
        lambda p: p.write_text(
            json.dumps(
                {"observed": result.observed, "p_values": result.p_values},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        ),
    )
    print(f"p(accuracy) = {result.p_values['accuracy']:.6f} -> {out}")
    return 0


def _cmd_report(args) -> int:
    csv_path, json_path = emit_report(args.run_dir)
    print(f"summary -> {csv_path}, {json_path}")
    return 0


def _cmd_run(args) -> int:
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = load_run_config(args.config, overrides)
    run_dir = run_pipeline(config)
    emit_report(run_dir)
    print(f"run complete -> {run_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsdkit",
        description="Sugarcane disease detection from multispectral pixels",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled scene")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--nodata-rate", type=float, default=0.0)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("ingest", help="extract labeled pixels from rasters + blocks")
    p.add_argument("--manifest", required=True, help="band manifest JSON")
    p.add_argument("--blocks", required=True, help="blocks GeoJSON")
    p.add_argument("--out", required=True, help="output pixels CSV")
    p.add_argument("--scale", type=float, default=1e-4)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("features", help="compute the 28-column feature table")
    p.add_argument("--pixels", required=True, help="pixels CSV from ingest")
    p.add_argument("--out", required=True, help="output features CSV")
    p.add_argument("--role", action="append", help="role override ROLE=BAND (repeatable)")
    p.set_defaults(fn=_cmd_features)

    p = sub.add_parser("screen", help="Welch-t band screening with Bonferroni correction")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--variety", action="append", help="variety to screen (repeatable)")
    p.set_defaults(fn=_cmd_screen)

    p = sub.add_parser("train", help="balance, split, tune, and fit one model")
    p.add_argument("--features", required=True)
    p.add_argument("--variety", required=True)
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=20220227)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--grid", help="JSON parameter grid override")
    p.add_argument("--eta", type=int, default=3)
    p.add_argument("--min-resource", type=int, default=None)
    p.add_argument(
        "--full",
        action="store_true",
        help="tune and fit on the entire balanced dataset (no held-out split)",
    )
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("evaluate", help="bootstrap the held-out test predictions")
    p.add_argument("--model", required=True, help="model.json from train")
    p.add_argument("--data", required=True, help="data.csv from train (with split)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bootstrap", type=int, default=5000)
    p.add_argument("--seed", type=int, default=20220227)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("permtest", help="label-permutation null distribution")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--seed", type=int, default=20220227)
    p.set_defaults(fn=_cmd_permtest)

    p = sub.add_parser("report", help="consolidate a run directory")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("run", help="end-to-end pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--seed", type=int, help="override master seed")
    p.set_defaults(fn=_cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
