import numpy as np
import pytest

from imbreg.data import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_mixed(n=60, seed=0):
    """Small dataset with two numeric and one categorical column."""
    r = np.random.default_rng(seed)
    X = np.empty((n, 3), dtype=object)
    X[:, 0] = r.uniform(0, 1, n)
    X[:, 1] = r.normal(size=n)
    X[:, 2] = r.choice(["red", "green", "blue"], n)
    y = r.gamma(2.0, 1.0, n)
    return Dataset.from_arrays(X, y, ["u", "g", "colour"], categorical=["colour"])


@pytest.fixture
def mixed():
    return make_mixed()


@pytest.fixture
def skewed():
    r = np.random.default_rng(3)
    X = r.uniform(0, 1, (200, 2))
    y = np.exp(2 * X[:, 0]) + 0.1 * X[:, 1] + r.exponential(0.5, 200)
    return Dataset.from_arrays(X, y)
