import numpy as np
import pytest

from kacgm.errors import ConfigError
from kacgm.forest import RandomForest, RfConfig, c2st_rf


def test_config_validation():
    with pytest.raises(ConfigError):
        RfConfig(n_trees=0)
    with pytest.raises(ConfigError):
        RfConfig(feature_fraction=1.5)
    cfg = RfConfig()
    assert cfg.feature_fraction is None  # sqrt(D)/D chosen at fit time


def test_forest_learns_separable_labels():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(400, 3))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
    forest = RandomForest(RfConfig(n_trees=30, max_depth=6, seed=1))
    forest.fit(X[:300], y[:300])
    acc = float(np.mean(forest.predict(X[300:]) == y[300:]))
    assert acc > 0.9


def test_forest_probabilities_valid():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] > 0).astype(int)
    forest = RandomForest(RfConfig(n_trees=20, seed=0))
    forest.fit(X, y)
    p = forest.predict_proba(X)  # probability of class 1
    assert p.shape == (200,)
    assert np.all((p >= 0) & (p <= 1))
    assert np.array_equal(forest.predict(X), (p >= 0.5).astype(int))


def test_c2st_chance_level_on_identical_distributions():
    rng = np.random.default_rng(2)
    real = rng.normal(size=(500, 3))
    synth = rng.normal(size=(500, 3))
    acc = c2st_rf(real, synth, RfConfig(n_trees=40, max_depth=6), seed=0)
    assert abs(acc - 0.5) < 0.08


def test_c2st_detects_shifted_distributions():
    rng = np.random.default_rng(3)
    real = rng.normal(size=(400, 2))
    synth = rng.normal(size=(400, 2)) + 3.0
    acc = c2st_rf(real, synth, RfConfig(n_trees=40, max_depth=6), seed=0)
    assert acc > 0.95


def test_c2st_deterministic_given_seed():
    rng = np.random.default_rng(4)
    real = rng.normal(size=(300, 2))
    synth = rng.normal(size=(300, 2)) * 1.4
    a = c2st_rf(real, synth, RfConfig(n_trees=25), seed=7)
    b = c2st_rf(real, synth, RfConfig(n_trees=25), seed=7)
    assert a == b
    c = c2st_rf(real, synth, RfConfig(n_trees=25), seed=8)
    assert isinstance(c, float)
