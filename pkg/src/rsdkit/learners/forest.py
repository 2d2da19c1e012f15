"""Random forest: bagged Gini CART trees with per-node feature sampling.

Each tree trains on a bootstrap resample with ceil(sqrt(D)) candidate
features per split; prediction is the majority vote, with the positive
vote fraction as the score and exact ties breaking to Negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from ..seeds import rng_for
from .base import ModelSpec, TrainedModel, check_training_inputs
from .tree import Tree, grow_tree


@dataclass
class ForestPayload:
    trees: list
    importance_raw: np.ndarray  # mean impurity decrease per feature over trees
    score_threshold: float = 0.5

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict_value(X)
        return votes / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "trees": [t.to_dict() for t in self.trees],
            "importance_raw": self.importance_raw.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestPayload":
        return cls(
            trees=[Tree.from_dict(t) for t in doc["trees"]],
            importance_raw=np.asarray(doc["importance_raw"], dtype=np.float64),
        )


def fit_random_forest(
    X, y, n_estimators: int, max_depth: int | None = None, seed: int = 0
) -> TrainedModel:
    X, y = check_training_inputs(X, y)
    if n_estimators < 1:
        raise InputError(f"n_estimators must be >= 1, got {n_estimators}")
    if max_depth is not None and max_depth < 1:
        raise InputError(f"max_depth must be >= 1 or None, got {max_depth}")
    n, d = X.shape
    mtry = math.ceil(math.sqrt(d))
    trees = []
    importance = np.zeros(d)
    for t in range(n_estimators):
        rng = rng_for(seed, "tree", t)
        rows = rng.integers(0, n, size=n)
        tree, imp = grow_tree(
            X[rows], y[rows], criterion="gini", max_depth=max_depth, mtry=mtry, rng=rng
        )
        trees.append(tree)
        importance += imp
    payload = ForestPayload(trees=trees, importance_raw=importance / n_estimators)
    return TrainedModel(
        spec=ModelSpec("RF", {"n_estimators": n_estimators, "max_depth": max_depth}),
        payload=payload,
        meta={"seed": seed, "n": n, "d": d},
    )
