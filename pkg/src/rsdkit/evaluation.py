"""Metrics, bootstrap distributions, permutation nulls, and importances.

Bootstrapping resamples the fixed test-set predictions by index (the
model is never refit); the permutation null refits the supplied spec on
shuffled training labels and scores the intact test set. Reported
summaries are medians with 2.5/97.5 percentile intervals, and permutation
p values use the plus-one convention so they never reach zero.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CapabilityError, ConfigurationError, InputError
from .learners.base import ModelSpec, TrainedModel, fit_model
from .seeds import derive_seed, rng_for

METRIC_NAMES = (
    "accuracy",
    "precision_positive",
    "recall_positive",
    "precision_negative",
    "recall_negative",
)


@dataclass
class MetricSample:
    """The five headline metrics from one confusion matrix."""

    accuracy: float
    precision_positive: float
    recall_positive: float
    precision_negative: float
    recall_negative: float
    degenerate: bool = False

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.accuracy,
                self.precision_positive,
                self.recall_positive,
                self.precision_negative,
                self.recall_negative,
            ]
        )

    def as_dict(self) -> dict:
        return dict(zip(METRIC_NAMES, self.as_array().tolist()))


def classification_metrics(y_true, y_pred) -> MetricSample:
    """Accuracy plus per-class precision/recall from binary labels.

    A class with no predicted (or no actual) instances gets precision
    (recall) 0 and sets the degeneracy flag instead of dividing by zero.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise InputError(
            f"label vectors must match in length, got {y_true.shape} and {y_pred.shape}"
        )
    if y_true.size < 1:
        raise InputError("empty label vectors")
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    tn = int(((y_true == 0) & (y_pred == 0)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    n = y_true.size
    degenerate = False

    def ratio(num: int, den: int) -> float:
        nonlocal degenerate
        if den == 0:
            degenerate = True
            return 0.0
        return num / den

    return MetricSample(
        accuracy=(tp + tn) / n,
        precision_positive=ratio(tp, tp + fp),
        recall_positive=ratio(tp, tp + fn),
        precision_negative=ratio(tn, tn + fn),
        recall_negative=ratio(tn, tn + fp),
        degenerate=degenerate,
    )


@dataclass
class MetricDistribution:
    """B metric samples with medians and 2.5/97.5 percentile intervals."""

    samples: np.ndarray  # (B, 5) in METRIC_NAMES order
    degenerate: np.ndarray  # (B,) bool
    seed: int
    medians: dict = field(default_factory=dict)
    intervals: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[1] != len(METRIC_NAMES):
            raise InputError("samples must be (B, 5)")
        med = np.median(self.samples, axis=0)
        lo = np.percentile(self.samples, 2.5, axis=0)
        hi = np.percentile(self.samples, 97.5, axis=0)
        self.medians = {name: float(med[i]) for i, name in enumerate(METRIC_NAMES)}
        self.intervals = {
            name: (float(lo[i]), float(hi[i])) for i, name in enumerate(METRIC_NAMES)
        }

    @property
    def b(self) -> int:
        return self.samples.shape[0]


def _metric_matrix(y_true: np.ndarray, y_pred: np.ndarray, idx: np.ndarray):
    """Vectorized metrics over B index resamples (rows of idx)."""
    t = y_true[idx]
    p = y_pred[idx]
    tp = ((t == 1) & (p == 1)).sum(axis=1).astype(np.float64)
    tn = ((t == 0) & (p == 0)).sum(axis=1).astype(np.float64)
    fp = ((t == 0) & (p == 1)).sum(axis=1).astype(np.float64)
    fn = ((t == 1) & (p == 0)).sum(axis=1).astype(np.float64)
    n = idx.shape[1]
    dens = (tp + fp, tp + fn, tn + fn, tn + fp)
    degenerate = np.zeros(idx.shape[0], dtype=bool)
    for den in dens:
        degenerate |= den == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        cols = [
            (tp + tn) / n,
            np.where(dens[0] > 0, tp / dens[0], 0.0),
            np.where(dens[1] > 0, tp / dens[1], 0.0),
            np.where(dens[2] > 0, tn / dens[2], 0.0),
            np.where(dens[3] > 0, tn / dens[3], 0.0),
        ]
    return np.column_stack(cols), degenerate


def bootstrap_evaluate(
    model: TrainedModel, X_test, y_test, b: int = 5000, seed: int = 0
) -> MetricDistribution:
    """B index-resamples of the fixed test predictions; model is not refit."""
    if b < 1:
        raise ConfigurationError(f"bootstrap sample count must be >= 1, got {b}")
    X_test = np.asarray(X_test, dtype=np.float64)
    y_test = np.asarray(y_test, dtype=np.int64)
    if X_test.shape[0] < 1:
        raise InputError("empty test set")
    pred, _ = model.predict(X_test)
    n = len(y_test)
    rng = rng_for(seed, "bootstrap")
    idx = rng.integers(0, n, size=(b, n))
    samples, degenerate = _metric_matrix(y_test, pred, idx)
    return MetricDistribution(samples=samples, degenerate=degenerate, seed=seed)


@dataclass
class PermutationResult:
    null: MetricDistribution
    observed: dict  # metric -> the observed value compared against the null
    p_values: dict  # metric -> plus-one p value


def permutation_test(
    spec: ModelSpec,
    X_train,
    y_train,
    X_test,
    y_test,
    b: int = 1000,
    seed: int = 0,
    observed: dict | None = None,
) -> PermutationResult:
    """Null distribution from refits on shuffled training labels.

    Hyperparameters stay fixed (no re-tuning inside the loop). The
    observed reference defaults to the real model's point metrics on the
    test set; pass bootstrap medians to compare against those instead.
    p = (1 + #{null >= observed}) / (b + 1) per metric.
    """
    if b < 1:
        raise ConfigurationError(f"permutation rounds must be >= 1, got {b}")
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    X_test = np.asarray(X_test, dtype=np.float64)
    y_test = np.asarray(y_test, dtype=np.int64)

    if observed is None:
        model = fit_model(spec, X_train, y_train, seed=derive_seed(seed, "observed"))
        pred, _ = model.predict(X_test)
        observed = classification_metrics(y_test, pred).as_dict()
    else:
        missing = set(METRIC_NAMES) - set(observed)
        if missing:
            raise InputError(f"observed reference missing metrics: {sorted(missing)}")

    samples = np.zeros((b, len(METRIC_NAMES)))
    degenerate = np.zeros(b, dtype=bool)
    for r in range(b):
        shuffled = rng_for(seed, "shuffle", r).permutation(y_train)
        null_model = fit_model(spec, X_train, shuffled, seed=derive_seed(seed, "refit", r))
        pred, _ = null_model.predict(X_test)
        sample = classification_metrics(y_test, pred)
        samples[r] = sample.as_array()
        degenerate[r] = sample.degenerate
    null = MetricDistribution(samples=samples, degenerate=degenerate, seed=seed)
    p_values = {
        name: float((1 + (samples[:, i] >= observed[name]).sum()) / (b + 1))
        for i, name in enumerate(METRIC_NAMES)
    }
    return PermutationResult(null=null, observed=dict(observed), p_values=p_values)


@dataclass
class ImportanceReport:
    feature_names: list
    importances: np.ndarray  # normalized to sum 1 when any split occurred

    def ranked(self) -> list:
        order = np.argsort(-self.importances, kind="stable")
        return [(self.feature_names[i], float(self.importances[i])) for i in order]

    def top(self, k: int = 10) -> list:
        return self.ranked()[:k]


def impurity_importance(
    model: TrainedModel, feature_names: Sequence[str] | None = None
) -> ImportanceReport:
    """Normalized impurity-decrease importance for RF and GB models."""
    if model.spec.algorithm not in ("RF", "GB"):
        raise CapabilityError(
            f"impurity importance requires a tree model, got {model.spec.algorithm}"
        )
    raw = np.asarray(model.payload.importance_raw, dtype=np.float64)
    if feature_names is None:
        feature_names = model.meta.get("feature_names") or [
            f"f{i}" for i in range(len(raw))
        ]
    if len(feature_names) != len(raw):
        raise InputError(
            f"{len(feature_names)} feature names for {len(raw)} importance entries"
        )
    total = raw.sum()
    values = raw / total if total > 0 else raw
    return ImportanceReport(feature_names=list(feature_names), importances=values)


def distribution_to_csv(dist: MetricDistribution, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round"] + list(METRIC_NAMES) + ["degenerate"])
        for r in range(dist.b):
            writer.writerow(
                [r]
                + [f"{v:.9f}" for v in dist.samples[r]]
                + [str(bool(dist.degenerate[r])).lower()]
            )


def distribution_summary(dist: MetricDistribution, p_values: dict | None = None) -> dict:
    out = {}
    for name in METRIC_NAMES:
        lo, hi = dist.intervals[name]
        entry = {"median": dist.medians[name], "p2.5": lo, "p97.5": hi}
        if p_values is not None:
            entry["p_value"] = p_values[name]
        out[name] = entry
    return out


def importance_to_csv(report: ImportanceReport, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "importance"])
        for name, value in report.ranked():
            writer.writerow([name, f"{value:.9f}"])


def load_distribution_csv(path) -> MetricDistribution:
    """Read a distribution CSV back; used by report consolidation."""
    try:
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise InputError(f"unreadable distribution file {path}: {exc}") from exc
    expected = ["round"] + list(METRIC_NAMES) + ["degenerate"]
    if header != expected:
        raise InputError(f"{path}: unexpected distribution header {header}")
    samples = np.array([[float(v) for v in row[1:6]] for row in rows])
    degenerate = np.array([row[6] == "true" for row in rows], dtype=bool)
    return MetricDistribution(samples=samples, degenerate=degenerate, seed=-1)
