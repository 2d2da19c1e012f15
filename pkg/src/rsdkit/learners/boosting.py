"""Gradient boosting for binary log-loss with Newton leaf values.

F_0 is the prior log-odds; each stage fits a depth-bounded variance-split
regression tree to the residual y - p, replaces leaf values with the
one-step Newton estimate sum(r)/sum(p(1-p)), and adds the tree scaled by
the learning rate. The decision score is F itself (log-odds scale).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from .base import ModelSpec, TrainedModel, check_training_inputs
from .tree import Tree, grow_tree

_NEWTON_DEN_FLOOR = 1e-10


@dataclass
class BoostPayload:
    f0: float
    learning_rate: float
    trees: list
    importance_raw: np.ndarray  # impurity decreases summed over stages
    score_threshold: float = 0.0

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        score = np.full(X.shape[0], self.f0)
        for tree in self.trees:
            score += self.learning_rate * tree.predict_value(X)
        return score

    def to_dict(self) -> dict:
        return {
            "f0": self.f0,
            "learning_rate": self.learning_rate,
            "trees": [t.to_dict() for t in self.trees],
            "importance_raw": self.importance_raw.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BoostPayload":
        return cls(
            f0=float(doc["f0"]),
            learning_rate=float(doc["learning_rate"]),
            trees=[Tree.from_dict(t) for t in doc["trees"]],
            importance_raw=np.asarray(doc["importance_raw"], dtype=np.float64),
        )


def fit_gradient_boosting(
    X, y, learning_rate: float, max_depth: int, n_estimators: int, seed: int = 0
) -> TrainedModel:
    X, y = check_training_inputs(X, y)
    if learning_rate < 0:
        raise InputError(f"learning_rate must be >= 0, got {learning_rate}")
    if max_depth < 1:
        raise InputError(f"max_depth must be >= 1, got {max_depth}")
    if n_estimators < 1:
        raise InputError(f"n_estimators must be >= 1, got {n_estimators}")
    n, d = X.shape
    yf = y.astype(np.float64)
    n_pos = yf.sum()
    f0 = float(np.log(n_pos / (n - n_pos)))
    f_curr = np.full(n, f0)
    trees = []
    importance = np.zeros(d)
    loss_curve = [_log_loss(yf, f_curr)]
    for _ in range(n_estimators):
        p = _expit(f_curr)
        residual = yf - p
        tree, imp = grow_tree(X, residual, criterion="variance", max_depth=max_depth)
        leaf = tree.apply(X)
        hess = p * (1.0 - p)
        for node in np.unique(leaf):
            rows = leaf == node
            den = max(hess[rows].sum(), _NEWTON_DEN_FLOOR)
            tree.value[node] = residual[rows].sum() / den
        f_curr = f_curr + learning_rate * tree.value[leaf]
        trees.append(tree)
        importance += imp
        loss_curve.append(_log_loss(yf, f_curr))
    payload = BoostPayload(
        f0=f0, learning_rate=learning_rate, trees=trees, importance_raw=importance
    )
    return TrainedModel(
        spec=ModelSpec(
            "GB",
            {
                "learning_rate": learning_rate,
                "max_depth": max_depth,
                "n_estimators": n_estimators,
            },
        ),
        payload=payload,
        meta={"seed": seed, "n": n, "d": d, "train_loss_curve": loss_curve},
    )


def _log_loss(y: np.ndarray, f: np.ndarray) -> float:
    margins = (2.0 * y - 1.0) * f
    return float(np.logaddexp(0.0, -margins).mean())


def _expit(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
