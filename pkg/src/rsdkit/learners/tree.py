"""CART growth shared by the forest and boosting models.

Trees are grown depth-first with an explicit stack and stored as flat
parallel arrays. Two split criteria: Gini impurity over binary class
labels, and variance (mean squared error) over real-valued targets. Split
search per node sorts each candidate feature once and scans boundaries
with cumulative sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError

_LEAF = -1


@dataclass
class Tree:
    """Flat-array binary tree; node 0 is the root, feature -1 marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index per row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat != _LEAF
            if not active.any():
                return node
            rows = np.nonzero(active)[0]
            nf = feat[rows]
            go_left = X[rows, nf] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def n_leaves(self) -> int:
        return int((self.feature == _LEAF).sum())

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int64),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.int64),
            right=np.asarray(doc["right"], dtype=np.int64),
            value=np.asarray(doc["value"], dtype=np.float64),
        )


def _node_impurity(target: np.ndarray, criterion: str) -> float:
    n = target.size
    if criterion == "gini":
        p = target.sum() / n
        return 2.0 * p * (1.0 - p)
    return float(target.var())  # mean squared error around the node mean


def _leaf_value(target: np.ndarray, criterion: str) -> float:
    if criterion == "gini":
        pos = int(target.sum())
        # exact tie breaks to the negative class
        return 1.0 if pos * 2 > target.size else 0.0
    return float(target.mean())


def _best_split_on_feature(x: np.ndarray, target: np.ndarray, criterion: str):
    """(score, threshold) minimizing weighted child impurity, or None."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ts = target[order]
    cut = np.nonzero(xs[:-1] < xs[1:])[0]
    if cut.size == 0:
        return None
    n = xs.size
    nl = (cut + 1).astype(np.float64)
    nr = n - nl
    if criterion == "gini":
        cum_pos = np.cumsum(ts)[cut]
        pl = cum_pos / nl
        pr = (ts.sum() - cum_pos) / nr
        child = nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)
    else:
        cs = np.cumsum(ts)[cut]
        css = np.cumsum(ts * ts)[cut]
        total_s = ts.sum()
        total_ss = (ts * ts).sum()
        sse_l = css - cs * cs / nl
        sse_r = (total_ss - css) - (total_s - cs) ** 2 / nr
        child = sse_l + sse_r
    best = int(np.argmin(child))
    i = cut[best]
    return float(child[best] / n), 0.5 * (xs[i] + xs[i + 1])


def grow_tree(
    X: np.ndarray,
    target: np.ndarray,
    criterion: str = "gini",
    max_depth: int | None = None,
    mtry: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[Tree, np.ndarray]:
    """Grow one tree; returns (tree, per-feature impurity decrease).

    ``mtry`` candidate features are sampled per node; when none of them
    admits a split the search widens to all features, so a node only
    becomes a leaf if it is genuinely unsplittable. Importance entries are
    node-fraction-weighted impurity decreases summed per feature.
    """
    X = np.asarray(X, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if criterion not in ("gini", "variance"):
        raise InputError(f"unknown split criterion {criterion!r}")
    if mtry is not None and rng is None:
        raise InputError("feature subsampling requires an rng")
    n_total, n_features = X.shape

    feature, threshold, left, right, value = [], [], [], [], []
    importance = np.zeros(n_features, dtype=np.float64)

    def new_node() -> int:
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n_total), 0)]
    while stack:
        node, rows, depth = stack.pop()
        t = target[rows]
        imp = _node_impurity(t, criterion)
        splittable = (
            imp > 0.0
            and rows.size >= 2
            and (max_depth is None or depth < max_depth)
        )
        split = None
        if splittable:
            if mtry is not None and mtry < n_features:
                candidates = rng.choice(n_features, size=mtry, replace=False)
                rest = np.setdiff1d(np.arange(n_features), candidates)
            else:
                candidates = np.arange(n_features)
                rest = np.zeros(0, dtype=np.int64)
            for pool in (candidates, rest):
                for f in pool:
                    found = _best_split_on_feature(X[rows, f], t, criterion)
                    if found is None:
                        continue
                    score, thr = found
                    if split is None or score < split[0]:
                        split = (score, int(f), thr)
                if split is not None:
                    break
        if split is None:
            value[node] = _leaf_value(t, criterion)
            continue
        score, f, thr = split
        go_left = X[rows, f] <= thr
        # score is the weighted child impurity, so imp - score is the decrease
        importance[f] += rows.size / n_total * (imp - score)
        feature[node] = f
        threshold[node] = thr
        lc, rc = new_node(), new_node()
        left[node], right[node] = lc, rc
        stack.append((rc, rows[~go_left], depth + 1))
        stack.append((lc, rows[go_left], depth + 1))

    tree = Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
    )
    return tree, importance
