"""Shared model-spec/trained-model contract for the five classifiers.

``ModelSpec`` names an algorithm and its hyperparameters; ``fit_model``
dispatches to the per-algorithm trainer; every trained model predicts
through one contract returning binary labels plus real-valued scores. The
positive label is 1, and a label is positive exactly when the score
exceeds the algorithm's threshold (0 for margins and log-odds, 0.5 for
vote fractions).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import ConfigurationError, InputError

MODEL_FORMAT_VERSION = 1

ALGORITHMS = ("LR", "QDA", "RF", "GB", "SVM_RBF")

# allowed hyperparameter names and (required, validator) per algorithm
_PARAM_RULES = {
    "LR": {"C": (True, lambda v: v > 0)},
    "QDA": {"reg_eps": (False, lambda v: v >= 0)},
    "RF": {
        "n_estimators": (True, lambda v: int(v) == v and v >= 1),
        "max_depth": (False, lambda v: v is None or (int(v) == v and v >= 1)),
    },
    "GB": {
        "learning_rate": (True, lambda v: v >= 0),
        "max_depth": (True, lambda v: int(v) == v and v >= 1),
        "n_estimators": (True, lambda v: int(v) == v and v >= 1),
    },
    "SVM_RBF": {
        "C": (True, lambda v: v > 0),
        "gamma": (True, lambda v: v > 0),
        "tol": (False, lambda v: v > 0),
    },
}


@dataclass(frozen=True)
class ModelSpec:
    """An algorithm tag plus the hyperparameters to fit it with."""

    algorithm: str
    hyperparameters: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        rules = _PARAM_RULES[self.algorithm]
        params = dict(self.hyperparameters)
        unknown = set(params) - set(rules)
        if unknown:
            raise ConfigurationError(
                f"{self.algorithm}: unknown hyperparameters {sorted(unknown)}"
            )
        for name, (required, ok) in rules.items():
            if name not in params:
                if required:
                    raise ConfigurationError(f"{self.algorithm}: missing hyperparameter {name!r}")
                continue
            value = params[name]
            try:
                valid = ok(value)
            except TypeError:
                valid = False
            if not valid:
                raise ConfigurationError(
                    f"{self.algorithm}: invalid value {value!r} for hyperparameter {name!r}"
                )
        object.__setattr__(self, "hyperparameters", dict(params))

    def sort_key(self) -> tuple:
        """Lexicographic tie-break key; None sorts above any number."""
        items = []
        for name in sorted(self.hyperparameters):
            value = self.hyperparameters[name]
            items.append((name, float("inf") if value is None else float(value)))
        return tuple(items)


@dataclass
class TrainedModel:
    """A fitted classifier: its spec, fitted payload, and fit metadata."""

    spec: ModelSpec
    payload: object
    meta: dict = field(default_factory=dict)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Per-row (labels, scores); label 1 iff score exceeds the threshold."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise InputError("predict expects a 2-D matrix")
        d = self.meta.get("d")
        if d is not None and X.shape[1] != d:
            raise InputError(f"model expects {d} features, got {X.shape[1]}")
        if X.shape[0] == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64)
        if not np.isfinite(X).all():
            raise InputError("non-finite feature values")
        scores = self.payload.decision_scores(X)
        labels = (scores > self.payload.score_threshold).astype(np.int64)
        return labels, scores

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "spec": {
                "algorithm": self.spec.algorithm,
                "hyperparameters": dict(self.spec.hyperparameters),
            },
            "meta": self.meta,
            "payload": self.payload.to_dict(),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")


def fit_model(spec: ModelSpec, X, y, seed: int = 0) -> TrainedModel:
    """Fit the given spec; the uniform entry used by tuning and the CLI."""
    # imported here so each algorithm module can import base freely
    from .boosting import fit_gradient_boosting
    from .forest import fit_random_forest
    from .logistic import fit_logistic_l1
    from .qda import fit_qda
    from .svm import fit_svm_rbf

    hp = dict(spec.hyperparameters)
    if spec.algorithm == "LR":
        return fit_logistic_l1(X, y, C=hp["C"], seed=seed)
    if spec.algorithm == "QDA":
        return fit_qda(X, y, reg_eps=hp.get("reg_eps", 1e-6))
    if spec.algorithm == "RF":
        return fit_random_forest(
            X, y, n_estimators=int(hp["n_estimators"]),
            max_depth=hp.get("max_depth"), seed=seed,
        )
    if spec.algorithm == "GB":
        return fit_gradient_boosting(
            X, y, learning_rate=hp["learning_rate"], max_depth=int(hp["max_depth"]),
            n_estimators=int(hp["n_estimators"]), seed=seed,
        )
    return fit_svm_rbf(
        X, y, C=hp["C"], gamma=hp["gamma"], tol=hp.get("tol", 1e-3), seed=seed
    )


def load_model(path) -> TrainedModel:
    from .boosting import BoostPayload
    from .forest import ForestPayload
    from .logistic import LogisticPayload
    from .qda import QdaPayload
    from .svm import SvmPayload

    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"unreadable model file {path}: {exc}") from exc
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise InputError(f"unsupported model format_version {version!r}")
    spec = ModelSpec(doc["spec"]["algorithm"], doc["spec"]["hyperparameters"])
    payload_cls = {
        "LR": LogisticPayload,
        "QDA": QdaPayload,
        "RF": ForestPayload,
        "GB": BoostPayload,
        "SVM_RBF": SvmPayload,
    }[spec.algorithm]
    return TrainedModel(
        spec=spec, payload=payload_cls.from_dict(doc["payload"]), meta=doc.get("meta", {})
    )


def check_training_inputs(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Common fit-time validation: finite 2-D X, binary y, both classes."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise InputError("X must be a 2-D matrix")
    if y.shape != (X.shape[0],):
        raise InputError(f"y length {y.shape} does not match {X.shape[0]} rows")
    if X.shape[0] < 2:
        raise InputError("need at least 2 training rows")
    if not np.isfinite(X).all():
        raise InputError("non-finite feature values")
    present = set(np.unique(y).tolist())
    if not present <= {0, 1}:
        raise InputError(f"labels must be 0/1, got {sorted(present)}")
    if present != {0, 1}:
        raise InputError("both classes must be present in training data")
    return X, y
