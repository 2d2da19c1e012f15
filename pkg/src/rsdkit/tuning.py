"""Stratified k-fold cross-validation and successive-halving grid search.

The halving resource is the number of training rows: round 0 scores every
candidate by k-fold CV on a stratified subsample of r0 rows, each round
keeps the top ceil(m/eta) by mean accuracy and multiplies the budget by
eta (capped at the full dataset), and the final pick is made at full
budget. Scaling is re-fit inside every fold, so no statistics leak from
held-out rows.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, FoldError, InputError
from .learners.base import ModelSpec, fit_model
from .seeds import derive_seed, rng_for

DEFAULT_K = 10

DEFAULT_GRIDS = {
    "LR": {"C": [0.01, 0.1, 1.0, 10.0, 100.0]},
    "QDA": {"reg_eps": [1e-6]},
    "RF": {"max_depth": [None, 20, 30], "n_estimators": [200, 1000]},
    "GB": {
        "learning_rate": [0.1, 0.2, 0.3],
        "max_depth": [3, 5],
        "n_estimators": [200, 500, 1000, 1500],
    },
    "SVM_RBF": {"C": [1.0, 10.0, 100.0, 1000.0], "gamma": [0.001, 0.01, 0.1, 1.0]},
}


def default_grid(algorithm: str) -> dict:
    if algorithm not in DEFAULT_GRIDS:
        raise ConfigurationError(f"no default grid for algorithm {algorithm!r}")
    return {name: list(values) for name, values in DEFAULT_GRIDS[algorithm].items()}


def enumerate_candidates(grid: Mapping[str, Sequence]) -> list:
    """Cartesian product of per-parameter candidate lists, as dicts."""
    if not grid:
        raise ConfigurationError("empty parameter grid")
    names = sorted(grid)
    for name in names:
        if len(grid[name]) == 0:
            raise ConfigurationError(f"parameter {name!r} has no candidates")
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


def kfold_indices(n: int, k: int, seed: int, labels=None) -> list:
    """k shuffled folds with sizes differing by at most 1.

    With labels, folds are stratified: each class spreads across folds as
    evenly as possible, and per-class remainders rotate through the folds
    so overall sizes stay within 1 of each other.
    """
    if k < 2:
        raise InputError(f"k must be >= 2, got {k}")
    if k > n:
        raise InputError(f"k={k} exceeds n={n}")
    rng = rng_for(seed, "kfold")
    folds: list[list] = [[] for _ in range(k)]
    if labels is None:
        perm = rng.permutation(n)
        sizes = [n // k + (1 if f < n % k else 0) for f in range(k)]
        start = 0
        for f, size in enumerate(sizes):
            folds[f] = perm[start : start + size].tolist()
            start += size
    else:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise InputError("labels length must equal n")
        pointer = 0
        for value in sorted(set(labels.tolist())):
            rows = np.nonzero(labels == value)[0]
            rows = rng.permutation(rows)
            base, extra = divmod(len(rows), k)
            start = 0
            for f in range(k):
                size = base + (1 if (f - pointer) % k < extra else 0)
                folds[f].extend(rows[start : start + size].tolist())
                start += size
            pointer = (pointer + extra) % k
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


@dataclass
class CVResult:
    spec: ModelSpec
    fold_scores: list
    mean_score: float


def cross_validate(spec: ModelSpec, X, y, k: int = DEFAULT_K, seed: int = 0) -> CVResult:
    """Accuracy by stratified k-fold CV with per-fold standardization."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    folds = kfold_indices(n, k, seed, labels=y)
    scores = []
    for f, held_out in enumerate(folds):
        if held_out.size == 0:
            raise FoldError(f"fold {f} is empty")
        mask = np.ones(n, dtype=bool)
        mask[held_out] = False
        train = np.nonzero(mask)[0]
        if len(set(y[train].tolist())) < 2:
            raise FoldError(f"fold {f}: training part lost a class")
        mean = X[train].mean(axis=0)
        std = X[train].std(axis=0)
        std = np.where(std == 0.0, 1.0, std)
        model = fit_model(
            spec, (X[train] - mean) / std, y[train], seed=derive_seed(seed, "fit", f)
        )
        pred, _ = model.predict((X[held_out] - mean) / std)
        scores.append(float((pred == y[held_out]).mean()))
    return CVResult(spec=spec, fold_scores=scores, mean_score=float(np.mean(scores)))


@dataclass
class HalvingConfig:
    eta: int = 3
    min_resource: int | None = None

    def __post_init__(self):
        if self.eta < 2:
            raise ConfigurationError(f"halving eta must be >= 2, got {self.eta}")
        if self.min_resource is not None and self.min_resource < 2:
            raise ConfigurationError("min_resource must be >= 2")


@dataclass
class AuditRow:
    round: int
    spec: ModelSpec
    budget: int
    fold_scores: list
    mean_score: float


@dataclass
class HalvingResult:
    best_spec: ModelSpec
    best_score: float
    audit: list = field(default_factory=list)

    def round_sizes(self) -> list:
        sizes: dict = {}
        for row in self.audit:
            sizes[row.round] = sizes.get(row.round, 0) + 1
        return [sizes[r] for r in sorted(sizes)]


def _stratified_subsample(y: np.ndarray, budget: int, seed: int, rnd: int) -> np.ndarray:
    n = len(y)
    if budget >= n:
        return np.arange(n)
    rng = rng_for(seed, "subsample", rnd)
    classes = sorted(set(y.tolist()))
    quotas = {c: (y == c).sum() * budget / n for c in classes}
    counts = {c: int(math.floor(q)) for c, q in quotas.items()}
    short = budget - sum(counts.values())
    for c in sorted(classes, key=lambda c: (quotas[c] - counts[c], c), reverse=True)[:short]:
        counts[c] += 1
    picks = []
    for c in classes:
        rows = np.nonzero(y == c)[0]
        picks.append(rng.choice(rows, size=counts[c], replace=False))
    return np.sort(np.concatenate(picks))


def halving_grid_search(
    algorithm: str,
    grid: Mapping[str, Sequence],
    X,
    y,
    k: int = DEFAULT_K,
    config: HalvingConfig | None = None,
    seed: int = 0,
) -> HalvingResult:
    """Successive halving over the grid; returns the pick plus a full audit.

    Ties at any elimination break to the lexicographically smallest
    hyperparameter tuple (None sorts last), so the search is deterministic
    for a fixed seed. Per-candidate CV streams derive from
    (seed, original candidate index, round).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    config = config or HalvingConfig()
    candidates = [ModelSpec(algorithm, params) for params in enumerate_candidates(grid)]
    m = len(candidates)
    n = len(y)
    eta = config.eta

    if config.min_resource is None:
        depth = int(math.floor(math.log(m, eta))) if m > 1 else 0
        r0 = max(4 * k, math.ceil(n / eta**depth))
    else:
        r0 = config.min_resource
    r0 = min(r0, n)
    if r0 < 2 * k:
        raise ConfigurationError(
            f"minimum resource {r0} is below 2*k={2 * k}; folds would degenerate"
        )

    index_of = {id(spec): i for i, spec in enumerate(candidates)}
    survivors = list(candidates)
    budget = r0
    rnd = 0
    audit: list[AuditRow] = []
    last_round: list[AuditRow] = []
    while True:
        rows = _stratified_subsample(y, budget, seed, rnd)
        last_round = []
        for spec in survivors:
            cand_idx = index_of[id(spec)]
            cv = cross_validate(
                spec, X[rows], y[rows], k=k, seed=derive_seed(seed, cand_idx, rnd)
            )
            last_round.append(
                AuditRow(
                    round=rnd,
                    spec=spec,
                    budget=len(rows),
                    fold_scores=cv.fold_scores,
                    mean_score=cv.mean_score,
                )
            )
        audit.extend(last_round)
        full = budget >= n
        if full and (len(survivors) == 1 or len(survivors) <= eta):
            break
        if len(survivors) == 1:
            # lone survivor confirmed at full budget before the final pick
            budget = n
            rnd += 1
            continue
        ranked = sorted(last_round, key=lambda r: (-r.mean_score, r.spec.sort_key()))
        survivors = [r.spec for r in ranked[: math.ceil(len(survivors) / eta)]]
        budget = min(budget * eta, n)
        rnd += 1

    best = min(last_round, key=lambda r: (-r.mean_score, r.spec.sort_key()))
    return HalvingResult(best_spec=best.spec, best_score=best.mean_score, audit=audit)


def audit_to_csv(result: HalvingResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "algorithm", "params", "budget", "fold_scores", "mean"])
        for row in result.audit:
            writer.writerow(
                [
                    row.round,
                    row.spec.algorithm,
                    json.dumps(row.spec.hyperparameters, sort_keys=True),
                    row.budget,
                    json.dumps([round(s, 9) for s in row.fold_scores]),
                    f"{row.mean_score:.9f}",
                ]
            )
