"""Feature tables and the dataset operations on them.

Covers variety filtering, majority-class downsampling to exact balance,
stratified train/test splitting and standardization, plus CSV round-trips
so every pipeline stage can run from files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BalanceError, EmptySelectionError, InputError, SplitError
from .seeds import rng_for

ALL_VARIETIES = "ALL"

_LABEL_NAMES = {1: "Positive", 0: "Negative"}
_LABEL_CODES = {"Positive": 1, "Negative": 0}


@dataclass
class FeatureTable:
    """A design matrix with per-row labels and provenance columns.

    ``features`` is (N, D) float64; ``labels`` holds 1 (Positive) and 0
    (Negative); ``varieties`` and ``block_ids`` are parallel string arrays
    used for filtering and reporting, never as model inputs.
    """

    features: np.ndarray
    labels: np.ndarray
    varieties: np.ndarray
    block_ids: np.ndarray
    feature_names: list

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.varieties = np.asarray(self.varieties, dtype=object)
        self.block_ids = np.asarray(self.block_ids, dtype=object)
        self.feature_names = list(self.feature_names)
        if self.features.ndim != 2:
            raise InputError("features must be a 2-D matrix")
        n, d = self.features.shape
        if n == 0 or d == 0:
            raise InputError("feature table must have at least one row and one column")
        if d != len(self.feature_names):
            raise InputError(
                f"{d} feature columns but {len(self.feature_names)} feature names"
            )
        for name, arr in (
            ("labels", self.labels),
            ("varieties", self.varieties),
            ("block_ids", self.block_ids),
        ):
            if len(arr) != n:
                raise InputError(f"{name} length {len(arr)} does not match {n} rows")
        bad = set(np.unique(self.labels)) - {0, 1}
        if bad:
            raise InputError(f"labels must be 0 or 1, got {sorted(bad)}")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        """(positive, negative) row counts."""
        pos = int((self.labels == 1).sum())
        return pos, self.n_rows - pos

    def select(self, rows) -> "FeatureTable":
        rows = np.asarray(rows)
        if rows.size == 0:
            raise EmptySelectionError("row selection is empty")
        return FeatureTable(
            features=self.features[rows],
            labels=self.labels[rows],
            varieties=self.varieties[rows],
            block_ids=self.block_ids[rows],
            feature_names=self.feature_names,
        )


def filter_by_variety(table: FeatureTable, variety: str) -> FeatureTable:
    """Rows of one variety, or all rows for the ``ALL`` sentinel."""
    if variety == ALL_VARIETIES:
        return table
    mask = table.varieties == variety
    if not mask.any():
        raise EmptySelectionError(f"no rows for variety {variety!r}")
    return table.select(np.nonzero(mask)[0])


def downsample_balance(table: FeatureTable, seed: int) -> FeatureTable:
    """Downsample the majority class, without replacement, to exact balance.

    Row order within each class is preserved; classes keep their original
    interleaving among the surviving rows.
    """
    pos_rows = np.nonzero(table.labels == 1)[0]
    neg_rows = np.nonzero(table.labels == 0)[0]
    if len(pos_rows) == 0 or len(neg_rows) == 0:
        raise BalanceError(
            f"both classes required for balancing, got {len(pos_rows)} positive "
            f"and {len(neg_rows)} negative rows"
        )
    n = min(len(pos_rows), len(neg_rows))
    rng = rng_for(seed, "balance")
    if len(pos_rows) > n:
        pos_rows = np.sort(rng.choice(pos_rows, size=n, replace=False))
    if len(neg_rows) > n:
        neg_rows = np.sort(rng.choice(neg_rows, size=n, replace=False))
    keep = np.sort(np.concatenate([pos_rows, neg_rows]))
    return table.select(keep)


@dataclass
class SplitIndices:
    """Row indices of a stratified train/test partition."""

    train: np.ndarray
    test: np.ndarray


def train_test_split(table: FeatureTable, test_fraction: float, seed: int) -> SplitIndices:
    """Stratified split with round(N * fraction) test rows overall.

    Per-class test counts are apportioned by largest remainder so the
    realized class balance tracks the table's.
    """
    if not 0.0 < test_fraction < 1.0:
        raise SplitError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = table.n_rows
    n_test = int(np.floor(n * test_fraction + 0.5))
    if n_test < 1 or n - n_test < 1:
        raise SplitError(
            f"test_fraction {test_fraction} leaves an empty side for {n} rows"
        )
    classes = [np.nonzero(table.labels == c)[0] for c in (1, 0)]
    quotas = [len(rows) * test_fraction for rows in classes]
    counts = [int(np.floor(q)) for q in quotas]
    remainders = sorted(
        range(len(classes)), key=lambda i: (quotas[i] - counts[i], i), reverse=True
    )
    short = n_test - sum(counts)
    for i in remainders[:short]:
        counts[i] += 1
    rng = rng_for(seed, "split")
    test_parts = []
    for rows, take in zip(classes, counts):
        if take > len(rows):
            raise SplitError("test quota exceeds class size; lower test_fraction")
        if take:
            test_parts.append(np.sort(rng.choice(rows, size=take, replace=False)))
    test = np.sort(np.concatenate(test_parts)) if test_parts else np.array([], dtype=np.int64)
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    train = np.nonzero(mask)[0]
    if len(train) == 0 or len(test) == 0:
        raise SplitError("split produced an empty side")
    return SplitIndices(train=train, test=test)


@dataclass
class ScalerParams:
    """Per-feature centering/scaling constants fit on training rows only."""

    mean: np.ndarray
    std: np.ndarray
    feature_names: list = field(default_factory=list)


def fit_standard_scaler(table: FeatureTable, rows=None) -> ScalerParams:
    """Fit mean and population standard deviation on the given rows.

    Zero-variance features get std 1 so they are centered but not scaled.
    """
    X = table.features if rows is None else table.features[np.asarray(rows)]
    if X.shape[0] == 0:
        raise EmptySelectionError("cannot fit a scaler on zero rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population (1/N) convention
    std = np.where(std == 0.0, 1.0, std)
    return ScalerParams(mean=mean, std=std, feature_names=list(table.feature_names))


def apply_scaler(params: ScalerParams, table: FeatureTable) -> FeatureTable:
    if params.feature_names and params.feature_names != table.feature_names:
        raise InputError("scaler was fit on different feature columns")
    return FeatureTable(
        features=(table.features - params.mean) / params.std,
        labels=table.labels,
        varieties=table.varieties,
        block_ids=table.block_ids,
        feature_names=table.feature_names,
    )


def scale_matrix(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - params.mean) / params.std


def table_to_csv(table: FeatureTable, path, split: SplitIndices | None = None) -> None:
    """Write the table as CSV; with a split, adds a train/test column."""
    split_col = None
    if split is not None:
        split_col = np.empty(table.n_rows, dtype=object)
        split_col[split.train] = "train"
        split_col[split.test] = "test"
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["block_id", "variety", "label"] + table.feature_names
        if split_col is not None:
            header.append("split")
        writer.writerow(header)
        for i in range(table.n_rows):
            row = [
                table.block_ids[i],
                table.varieties[i],
                _LABEL_NAMES[int(table.labels[i])],
            ]
            row.extend(repr(float(v)) for v in table.features[i])
            if split_col is not None:
                row.append(split_col[i])
            writer.writerow(row)


def table_from_csv(path) -> tuple[FeatureTable, SplitIndices | None]:
    """Read a table written by :func:`table_to_csv`; recovers any split."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise InputError(f"unreadable table file {path}: {exc}") from exc
    if header is None:
        raise InputError(f"{path}: empty CSV")
    for col in ("block_id", "variety", "label"):
        if col not in header:
            raise InputError(f"{path}: missing column {col!r}")
    has_split = header[-1] == "split"
    meta_cols = {name: header.index(name) for name in ("block_id", "variety", "label")}
    feat_start = max(meta_cols.values()) + 1
    feat_end = len(header) - 1 if has_split else len(header)
    feature_names = header[feat_start:feat_end]
    if not feature_names:
        raise InputError(f"{path}: no feature columns")
    block_ids, varieties, labels, feats, split_tags = [], [], [], [], []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise InputError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        lbl = row[meta_cols["label"]]
        if lbl not in _LABEL_CODES:
            raise InputError(f"{path}: row {r} has unknown label {lbl!r}")
        block_ids.append(row[meta_cols["block_id"]])
        varieties.append(row[meta_cols["variety"]])
        labels.append(_LABEL_CODES[lbl])
        try:
            feats.append([float(v) for v in row[feat_start:feat_end]])
        except ValueError as exc:
            raise InputError(f"{path}: non-numeric feature in row {r}") from exc
        if has_split:
            split_tags.append(row[-1])
    table = FeatureTable(
        features=np.array(feats, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
        varieties=np.array(varieties, dtype=object),
        block_ids=np.array(block_ids, dtype=object),
        feature_names=feature_names,
    )
    split = None
    if has_split:
        tags = np.array(split_tags, dtype=object)
        unknown = set(tags) - {"train", "test"}
        if unknown:
            raise InputError(f"{path}: unknown split tags {sorted(unknown)}")
        split = SplitIndices(
            train=np.nonzero(tags == "train")[0], test=np.nonzero(tags == "test")[0]
        )
    return table, split
