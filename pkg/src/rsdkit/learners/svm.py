"""Soft-margin RBF-kernel SVM trained by sequential minimal optimization.

Solves the dual min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0 with
Q_st = y_s y_t K(x_s, x_t), K(x, z) = exp(-gamma ||x - z||^2). Working
pairs come from the maximal-violating-pair rule on the gradient; when the
chosen pair cannot move (degenerate curvature or box-saturated within
float precision) a seeded random sweep over violating pairs keeps the
solver from stalling. Termination: max violation m(a) - M(a) <= tol.

The decision score is sum_s a_s y_s K(x_s, x) + b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, InputError
from ..seeds import rng_for
from .base import ModelSpec, TrainedModel, check_training_inputs

_ETA_FLOOR = 1e-12
_STEP_FLOOR = 1e-14
MAX_PAIR_UPDATES = 1_000_000


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        (A * A).sum(axis=1)[:, None]
        + (B * B).sum(axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@dataclass
class SvmPayload:
    support_vectors: np.ndarray  # (S, D)
    sv_y: np.ndarray  # (S,) in {-1, +1}
    alpha: np.ndarray  # (S,) positive duals
    b: float
    gamma: float
    score_threshold: float = 0.0

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        K = rbf_kernel(X, self.support_vectors, self.gamma)
        return K @ (self.alpha * self.sv_y) + self.b

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "sv_y": self.sv_y.tolist(),
            "alpha": self.alpha.tolist(),
            "b": self.b,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SvmPayload":
        return cls(
            support_vectors=np.asarray(doc["support_vectors"], dtype=np.float64),
            sv_y=np.asarray(doc["sv_y"], dtype=np.float64),
            alpha=np.asarray(doc["alpha"], dtype=np.float64),
            b=float(doc["b"]),
            gamma=float(doc["gamma"]),
        )


def _pair_step(i, j, alpha, grad, y, K, C):
    """Optimal clipped step for the pair; returns the step size lambda.

    alpha_i moves by +y_i*lambda and alpha_j by -y_j*lambda, preserving
    the equality constraint. Curvature eta = ||phi_i - phi_j||^2; when it
    vanishes the objective is linear along the direction and the step goes
    to the box edge.
    """
    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    diff = (-y[i] * grad[i]) - (-y[j] * grad[j])
    lam = diff / eta if eta > _ETA_FLOOR else np.inf
    room_i = C - alpha[i] if y[i] > 0 else alpha[i]
    room_j = alpha[j] if y[j] > 0 else C - alpha[j]
    return min(lam, room_i, room_j)


def fit_svm_rbf(
    X,
    y,
    C: float,
    gamma: float,
    tol: float = 1e-3,
    seed: int = 0,
    max_updates: int = MAX_PAIR_UPDATES,
    record_objective: bool = False,
) -> TrainedModel:
    X, y01 = check_training_inputs(X, y)
    if not C > 0:
        raise InputError(f"C must be positive, got {C}")
    if not gamma > 0:
        raise InputError(f"gamma must be positive, got {gamma}")
    if not tol > 0:
        raise InputError(f"tol must be positive, got {tol}")
    n = X.shape[0]
    yf = (2.0 * y01 - 1.0).astype(np.float64)
    K = rbf_kernel(X, X, gamma)

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual at alpha = 0
    rng = rng_for(seed, "smo")
    objective_curve = [0.0] if record_objective else None

    n_updates = 0
    converged = False
    while True:
        yg = -yf * grad
        up = ((yf > 0) & (alpha < C)) | ((yf < 0) & (alpha > 0))
        low = ((yf < 0) & (alpha < C)) | ((yf > 0) & (alpha > 0))
        if not up.any() or not low.any():
            converged = True
            break
        up_idx = np.nonzero(up)[0]
        low_idx = np.nonzero(low)[0]
        i = up_idx[np.argmax(yg[up_idx])]
        j = low_idx[np.argmin(yg[low_idx])]
        m, M = yg[i], yg[j]
        if m - M <= tol:
            converged = True
            break

        lam = _pair_step(i, j, alpha, grad, yf, K, C)
        if lam <= _STEP_FLOOR:
            # maximal pair is numerically stuck: seeded sweep over random
            # violating pairs; give up only if none can move
            moved = False
            viol_up = up_idx[yg[up_idx] > M + tol]
            viol_low = low_idx[yg[low_idx] < m - tol]
            for _ in range(min(4 * n, 200)):
                ci = viol_up[rng.integers(len(viol_up))] if len(viol_up) else i
                cj = viol_low[rng.integers(len(viol_low))] if len(viol_low) else j
                if yg[ci] - yg[cj] <= tol:
                    continue
                clam = _pair_step(ci, cj, alpha, grad, yf, K, C)
                if clam > _STEP_FLOOR:
                    i, j, lam = ci, cj, clam
                    moved = True
                    break
            if not moved:
                converged = True  # no movable violating pair at float precision
                break

        d_ai = yf[i] * lam
        d_aj = -yf[j] * lam
        alpha[i] = min(max(alpha[i] + d_ai, 0.0), C)
        alpha[j] = min(max(alpha[j] + d_aj, 0.0), C)
        grad += yf * (K[:, i] * (yf[i] * d_ai) + K[:, j] * (yf[j] * d_aj))
        n_updates += 1
        if record_objective:
            # dual objective in maximization form: e'a - 1/2 a'Qa
            objective_curve.append(float(0.5 * (alpha.sum() - alpha @ grad)))
        if n_updates >= max_updates:
            break

    payload = _build_payload(X, yf, alpha, grad, gamma, C, tol)
    meta = {"seed": seed, "n": n, "d": X.shape[1], "n_updates": n_updates}
    if record_objective:
        meta["objective_curve"] = objective_curve
    model = TrainedModel(
        spec=ModelSpec("SVM_RBF", {"C": C, "gamma": gamma, "tol": tol}),
        payload=payload,
        meta=meta,
    )
    if not converged:
        raise ConvergenceError(
            f"SMO hit the {max_updates}-update cap before reaching tol={tol}",
            partial=model,
        )
    return model


def _build_payload(X, yf, alpha, grad, gamma, C, tol) -> SvmPayload:
    yg = -yf * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        b = float(yg[free].mean())
    else:
        up = ((yf > 0) & (alpha < C)) | ((yf < 0) & (alpha > 0))
        low = ((yf < 0) & (alpha < C)) | ((yf > 0) & (alpha > 0))
        hi = yg[up].max() if up.any() else 0.0
        lo = yg[low].min() if low.any() else 0.0
        b = float(0.5 * (hi + lo))
    sv = alpha > 0
    return SvmPayload(
        support_vectors=X[sv].copy(),
        sv_y=yf[sv].copy(),
        alpha=alpha[sv].copy(),
        b=b,
        gamma=gamma,
    )


def kkt_report(model: TrainedModel, X, y) -> dict:
    """Max KKT violation and the equality-constraint residual on (X, y).

    Used by tests and audits: for each training row, alpha=0 requires
    y*f >= 1, alpha=C requires y*f <= 1, and free vectors require y*f = 1,
    all within tol.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    yf = 2.0 * y.astype(np.float64) - 1.0
    payload = model.payload
    _, scores = model.predict(X)
    yfx = yf * scores
    C = model.spec.hyperparameters["C"]

    # recover per-row alphas (zero for non-support rows) by matching rows;
    # duplicate rows consume matches in order
    alpha = np.zeros(X.shape[0])
    used = np.zeros(X.shape[0], dtype=bool)
    sv = payload.support_vectors
    for s in range(sv.shape[0]):
        match = np.nonzero((X == sv[s]).all(axis=1) & ~used)[0]
        if match.size:
            alpha[match[0]] = payload.alpha[s]
            used[match[0]] = True
    at_zero = alpha <= 0
    at_cap = alpha >= C
    free = ~at_zero & ~at_cap
    violation = np.zeros(X.shape[0])
    violation[at_zero] = np.maximum(0.0, 1.0 - yfx[at_zero])
    violation[at_cap] = np.maximum(0.0, yfx[at_cap] - 1.0)
    violation[free] = np.abs(yfx[free] - 1.0)
    return {
        "max_violation": float(violation.max()),
        "equality_residual": float(abs((alpha * yf).sum())),
        "n_support": int((alpha > 0).sum()),
        "alpha_in_box": bool(((alpha >= 0) & (alpha <= C)).all()),
    }
