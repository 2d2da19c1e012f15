"""Metrics, bootstrap/permutation machinery, and importance reports."""

import csv

import numpy as np
import pytest
from scipy import stats

from rsdkit.errors import CapabilityError, ConfigurationError, InputError
from rsdkit.evaluation import (
    METRIC_NAMES,
    MetricDistribution,
    bootstrap_evaluate,
    classification_metrics,
    distribution_summary,
    distribution_to_csv,
    impurity_importance,
    importance_to_csv,
    load_distribution_csv,
    permutation_test,
)
from rsdkit.learners import ModelSpec, fit_model


class _Canned:
    """Duck-typed stand-in for a trained model with fixed predictions."""

    def __init__(self, pred):
        self.pred = np.asarray(pred, dtype=np.int64)

    def predict(self, X):
        return self.pred[: len(X)].copy(), np.zeros(len(X))


def blobs(n=100, d=3, sep=3.0, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack(
        [rng.normal(-sep / 2, 0.8, size=(n // 2, d)), rng.normal(sep / 2, 0.8, size=(n // 2, d))]
    )
    y = np.array([0] * (n // 2) + [1] * (n // 2))
    perm = rng.permutation(n)
    return X[perm], y[perm]


class TestClassificationMetrics:
    def test_known_confusion_matrix(self):
        # tp=3 tn=2 fp=1 fn=2
        y_true = [1, 1, 1, 1, 1, 0, 0, 0]
        y_pred = [1, 1, 1, 0, 0, 0, 0, 1]
        m = classification_metrics(y_true, y_pred)
        assert m.accuracy == pytest.approx(5 / 8)
        assert m.precision_positive == pytest.approx(3 / 4)
        assert m.recall_positive == pytest.approx(3 / 5)
        assert m.precision_negative == pytest.approx(2 / 4)
        assert m.recall_negative == pytest.approx(2 / 3)
        assert not m.degenerate

    def test_no_positive_predictions_degenerate(self):
        m = classification_metrics([1, 0, 1], [0, 0, 0])
        assert m.degenerate
        assert m.precision_positive == 0.0
        assert m.recall_positive == 0.0

    def test_single_class_truth_degenerate(self):
        m = classification_metrics([1, 1, 1], [1, 1, 0])
        assert m.degenerate  # no actual negatives: recall_negative undefined
        assert m.accuracy == pytest.approx(2 / 3)

    def test_as_dict_order(self):
        m = classification_metrics([0, 1], [0, 1])
        assert tuple(m.as_dict()) == METRIC_NAMES

    def test_rejects_bad_shapes(self):
        with pytest.raises(InputError):
            classification_metrics([0, 1], [0])
        with pytest.raises(InputError):
            classification_metrics([], [])


class TestBootstrap:
    def test_vectorized_matches_scalar_loop(self):
        rng = np.random.default_rng(21)
        y_true = rng.integers(0, 2, size=60)
        y_pred = rng.integers(0, 2, size=60)
        dist = bootstrap_evaluate(_Canned(y_pred), np.zeros((60, 2)), y_true, b=40, seed=9)
        # rebuild the resample the function drew and check row by row
        from rsdkit.seeds import rng_for

        idx = rng_for(9, "bootstrap").integers(0, 60, size=(40, 60))
        for r in range(40):
            want = classification_metrics(y_true[idx[r]], y_pred[idx[r]])
            assert dist.samples[r] == pytest.approx(want.as_array())
            assert bool(dist.degenerate[r]) == want.degenerate

    def test_always_correct_predictor_all_ones(self):
        y = np.array([0, 1] * 50)
        dist = bootstrap_evaluate(_Canned(y), np.zeros((100, 1)), y, b=500, seed=0)
        assert np.all(dist.samples == 1.0)
        assert dist.medians["accuracy"] == 1.0

    def test_86_of_100_interval_matches_binomial(self):
        y_true = np.zeros(100, dtype=int)
        y_true[:50] = 1
        y_pred = y_true.copy()
        flip = np.arange(0, 28, 2)  # 14 errors spread over both classes
        y_pred[flip] = 1 - y_pred[flip]
        assert (y_pred == y_true).mean() == 0.86
        dist = bootstrap_evaluate(_Canned(y_pred), np.zeros((100, 1)), y_true, b=5000, seed=3)
        assert dist.medians["accuracy"] == pytest.approx(0.86, abs=0.01)
        lo, hi = dist.intervals["accuracy"]
        assert lo == pytest.approx(stats.binom.ppf(0.025, 100, 0.86) / 100, abs=0.015)
        assert hi == pytest.approx(stats.binom.ppf(0.975, 100, 0.86) / 100, abs=0.015)

    def test_deterministic_per_seed(self):
        y = np.array([0, 1, 1, 0, 1] * 8)
        p = np.array([0, 1, 0, 0, 1] * 8)
        a = bootstrap_evaluate(_Canned(p), np.zeros((40, 1)), y, b=50, seed=7)
        b = bootstrap_evaluate(_Canned(p), np.zeros((40, 1)), y, b=50, seed=7)
        c = bootstrap_evaluate(_Canned(p), np.zeros((40, 1)), y, b=50, seed=8)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_rejects_empty_or_zero_b(self):
        with pytest.raises(ConfigurationError):
            bootstrap_evaluate(_Canned([1]), np.zeros((1, 1)), [1], b=0)
        with pytest.raises(InputError):
            bootstrap_evaluate(_Canned([]), np.zeros((0, 1)), [])


class TestPermutation:
    def test_p_value_plus_one_bounds(self):
        X, y = blobs(n=60, sep=6.0, seed=4)
        Xt, yt = blobs(n=40, sep=6.0, seed=5)
        spec = ModelSpec("LR", {"C": 10.0})
        result = permutation_test(spec, X, y, Xt, yt, b=19, seed=0)
        for name in METRIC_NAMES:
            p = result.p_values[name]
            assert 1 / 20 <= p <= 1.0
        # separation this wide: observed accuracy must beat every shuffled fit
        assert result.p_values["accuracy"] == pytest.approx(1 / 20)

    def test_observed_defaults_to_point_metrics(self):
        from rsdkit.seeds import derive_seed

        X, y = blobs(n=50, seed=6)
        Xt, yt = blobs(n=30, seed=7)
        spec = ModelSpec("QDA", {"reg_eps": 1e-6})
        result = permutation_test(spec, X, y, Xt, yt, b=5, seed=11)
        model = fit_model(spec, X, y, seed=derive_seed(11, "observed"))
        pred, _ = model.predict(Xt)
        assert result.observed == classification_metrics(yt, pred).as_dict()

    def test_explicit_observed_reference_used(self):
        X, y = blobs(n=50, seed=8)
        observed = {name: 1.0 for name in METRIC_NAMES}
        result = permutation_test(
            ModelSpec("QDA", {"reg_eps": 1e-6}), X, y, X, y, b=5, seed=0, observed=observed
        )
        assert result.observed == observed

    def test_partial_observed_rejected(self):
        X, y = blobs(n=50, seed=9)
        with pytest.raises(InputError):
            permutation_test(
                ModelSpec("QDA", {"reg_eps": 1e-6}),
                X, y, X, y, b=2, seed=0, observed={"accuracy": 1.0},
            )

    def test_null_centers_near_chance(self):
        X, y = blobs(n=80, sep=3.0, seed=10)
        Xt, yt = blobs(n=60, sep=3.0, seed=11)
        result = permutation_test(ModelSpec("QDA", {"reg_eps": 1e-6}), X, y, Xt, yt, b=60, seed=2)
        assert result.null.medians["accuracy"] == pytest.approx(0.5, abs=0.12)


class TestImportance:
    def test_requires_tree_model(self):
        X, y = blobs(n=40, seed=12)
        lr = fit_model(ModelSpec("LR", {"C": 1.0}), X, y, seed=0)
        with pytest.raises(CapabilityError):
            impurity_importance(lr)

    def test_planted_feature_dominates(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(200, 6))
        y = (X[:, 4] > 0).astype(int)
        rf = fit_model(
            ModelSpec("RF", {"n_estimators": 20, "max_depth": 4}), X, y, seed=1
        )
        report = impurity_importance(rf)
        assert report.importances.sum() == pytest.approx(1.0)
        assert report.ranked()[0][0] == "f4"
        assert report.top(2)[0][1] > 0.5

    def test_custom_names_and_mismatch(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(60, 3))
        y = (X[:, 0] > 0).astype(int)
        gb = fit_model(
            ModelSpec("GB", {"learning_rate": 0.3, "max_depth": 2, "n_estimators": 10}),
            X, y, seed=0,
        )
        report = impurity_importance(gb, feature_names=["a", "b", "c"])
        assert report.ranked()[0][0] == "a"
        with pytest.raises(InputError):
            impurity_importance(gb, feature_names=["a", "b"])


class TestSerialization:
    def test_distribution_round_trip(self, tmp_path):
        rng = np.random.default_rng(15)
        samples = rng.uniform(size=(30, 5))
        dist = MetricDistribution(
            samples=samples, degenerate=rng.uniform(size=30) < 0.3, seed=5
        )
        p = tmp_path / "dist.csv"
        distribution_to_csv(dist, p)
        loaded = load_distribution_csv(p)
        assert np.allclose(loaded.samples, dist.samples, atol=1e-9)
        assert np.array_equal(loaded.degenerate, dist.degenerate)
        assert loaded.medians["accuracy"] == pytest.approx(dist.medians["accuracy"], abs=1e-9)

    def test_bad_header_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(InputError, match="header"):
            load_distribution_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_distribution_csv(tmp_path / "nope.csv")

    def test_importance_csv_sorted(self, tmp_path):
        rng = np.random.default_rng(16)
        X = rng.normal(size=(100, 4))
        y = (X[:, 2] > 0).astype(int)
        rf = fit_model(ModelSpec("RF", {"n_estimators": 10, "max_depth": 3}), X, y, seed=0)
        p = tmp_path / "imp.csv"
        importance_to_csv(impurity_importance(rf), p)
        with p.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["feature", "importance"]
        values = [float(r[1]) for r in rows[1:]]
        assert values == sorted(values, reverse=True)
        assert rows[1][0] == "f2"

    def test_summary_shapes(self):
        samples = np.tile(np.linspace(0.4, 0.6, 21)[:, None], (1, 5))
        dist = MetricDistribution(samples=samples, degenerate=np.zeros(21, bool), seed=0)
        bare = distribution_summary(dist)
        assert set(bare) == set(METRIC_NAMES)
        assert set(bare["accuracy"]) == {"median", "p2.5", "p97.5"}
        assert bare["accuracy"]["median"] == pytest.approx(0.5)
        with_p = distribution_summary(dist, p_values={n: 0.01 for n in METRIC_NAMES})
        assert with_p["accuracy"]["p_value"] == 0.01
