"""Shared fixtures: synthetic scenes generated once per session."""

import numpy as np
import pytest

from rsdkit.synth import (
    GaussianClass,
    SynthConfig,
    VarietyConfig,
    generate_synthetic_scene,
    table1_config,
)


def two_variety_config(seed: int = 5, separation: float = 1.0) -> SynthConfig:
    """A small two-variety scene (~340 pixels) for fast structural tests."""
    full = table1_config(seed=seed, separation=separation)
    varieties = {}
    for name, counts in (("VA", (90, 70)), ("VB", (80, 100))):
        src = full.varieties["Q208"]
        varieties[name] = VarietyConfig(
            positive=GaussianClass(mean=src.positive.mean.copy(), cov=src.positive.cov.copy()),
            negative=GaussianClass(mean=src.negative.mean.copy(), cov=src.negative.cov.copy()),
            n_positive=counts[0],
            n_negative=counts[1],
        )
    return SynthConfig(varieties=varieties, seed=seed)


@pytest.fixture(scope="session")
def small_scene():
    return generate_synthetic_scene(two_variety_config())


@pytest.fixture(scope="session")
def small_scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    return generate_synthetic_scene(two_variety_config(), out_dir=out)


@pytest.fixture(scope="session")
def table1_scene():
    return generate_synthetic_scene(table1_config(seed=20220227))


@pytest.fixture(scope="session")
def separable_xy():
    """Two well-separated Gaussian blobs, 200 rows, standardized."""
    rng = np.random.default_rng(17)
    n = 100
    X = np.vstack(
        [
            rng.normal(-2.0, 0.5, size=(n, 4)),
            rng.normal(2.0, 0.5, size=(n, 4)),
        ]
    )
    y = np.array([0] * n + [1] * n)
    perm = rng.permutation(2 * n)
    X, y = X[perm], y[perm]
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    return X, y
