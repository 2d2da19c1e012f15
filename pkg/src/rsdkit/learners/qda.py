"""Quadratic discriminant analysis with trace-scaled ridge regularization.

Per-class Gaussian fit (sample mean, unbiased covariance) with the
covariance stabilized by reg_eps * trace(cov)/D on the diagonal; the
decision score is the log-posterior difference between the Positive and
Negative classes under empirical priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError, NumericalError
from .base import ModelSpec, TrainedModel, check_training_inputs

DEFAULT_REG_EPS = 1e-6


@dataclass
class QdaPayload:
    means: np.ndarray  # (2, D), class order Negative, Positive
    cov_reg: np.ndarray  # (2, D, D) regularized covariances
    log_priors: np.ndarray  # (2,)
    reg_eps: float
    score_threshold: float = 0.0

    def __post_init__(self):
        self._chol = []
        self._log_dets = []
        for c in (0, 1):
            try:
                chol = np.linalg.cholesky(self.cov_reg[c])
            except np.linalg.LinAlgError as exc:
                raise NumericalError(
                    f"class {c}: regularized covariance is not positive definite"
                ) from exc
            self._chol.append(chol)
            self._log_dets.append(2.0 * np.log(np.diag(chol)).sum())

    def class_log_likelihood(self, X: np.ndarray, c: int) -> np.ndarray:
        diff = X - self.means[c]
        # Mahalanobis term through the Cholesky factor
        z = np.linalg.solve(self._chol[c], diff.T)
        maha = (z * z).sum(axis=0)
        d = X.shape[1]
        return -0.5 * (maha + self._log_dets[c] + d * np.log(2.0 * np.pi))

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        pos = self.log_priors[1] + self.class_log_likelihood(X, 1)
        neg = self.log_priors[0] + self.class_log_likelihood(X, 0)
        return pos - neg

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "cov_reg": self.cov_reg.tolist(),
            "log_priors": self.log_priors.tolist(),
            "reg_eps": self.reg_eps,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QdaPayload":
        return cls(
            means=np.asarray(doc["means"], dtype=np.float64),
            cov_reg=np.asarray(doc["cov_reg"], dtype=np.float64),
            log_priors=np.asarray(doc["log_priors"], dtype=np.float64),
            reg_eps=float(doc["reg_eps"]),
        )


def fit_qda(X, y, reg_eps: float = DEFAULT_REG_EPS) -> TrainedModel:
    X, y = check_training_inputs(X, y)
    if not reg_eps >= 0:
        raise InputError(f"reg_eps must be non-negative, got {reg_eps}")
    n, d = X.shape
    means = np.zeros((2, d))
    cov_reg = np.zeros((2, d, d))
    log_priors = np.zeros(2)
    for c in (0, 1):
        rows = X[y == c]
        n_c = rows.shape[0]
        if n_c < 2:
            raise InputError(f"class {c} has {n_c} rows; need at least 2")
        if reg_eps == 0 and n_c < d + 1:
            raise InputError(
                f"class {c} has {n_c} rows < D+1={d + 1}; set reg_eps > 0"
            )
        means[c] = rows.mean(axis=0)
        cov = np.cov(rows, rowvar=False, ddof=1).reshape(d, d)
        cov_reg[c] = cov + reg_eps * (np.trace(cov) / d) * np.eye(d)
        log_priors[c] = np.log(n_c / n)
    payload = QdaPayload(
        means=means, cov_reg=cov_reg, log_priors=log_priors, reg_eps=reg_eps
    )
    return TrainedModel(
        spec=ModelSpec("QDA", {"reg_eps": reg_eps}),
        payload=payload,
        meta={"seed": 0, "n": n, "d": d},
    )
