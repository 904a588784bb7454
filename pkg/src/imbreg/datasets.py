"""Synthetic regression datasets with closed-form or sklearn-generated targets."""

from __future__ import annotations

import numpy as np
from sklearn import datasets as skd

from .data import Dataset, DatasetError
from .learner import random_mlp_targets


def _euclidean(n, rng):
    a, b = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    return {"a": a, "b": b}, np.sqrt(a**2 + b**2)


def _nernst(n, rng):
    R = rng.uniform(8.0, 8.6, n)
    T = rng.uniform(273.0, 373.0, n)
    z = rng.integers(1, 4, n).astype(float)
    F = rng.uniform(96000.0, 97000.0, n)
    a1, a2 = rng.uniform(0.01, 1.0, n), rng.uniform(0.01, 1.0, n)
    y = nernst(R, T, z, F, a1, a2)
    return {"R": R, "T": T, "z": z, "F": F, "a1": a1, "a2": a2}, y


def nernst(R, T, z, F, a1, a2):
    return R * T / (z * F) * np.log(np.asarray(a1) / np.asarray(a2))


def _stribeck(n, rng):
    mu1, mu2 = rng.uniform(0.1, 0.5, n), rng.uniform(0.1, 0.5, n)
    F = rng.uniform(1.0, 100.0, n)
    th1 = rng.uniform(-1.0, 1.0, n)
    th2 = rng.uniform(0.1, 1.0, n)
    delta = rng.uniform(0.5, 2.0, n)
    y = stribeck(mu1, mu2, F, th1, th2, delta)
    return {"mu1": mu1, "mu2": mu2, "F": F, "theta1": th1, "theta2": th2, "delta": delta}, y


def stribeck(mu1, mu2, F, th1, th2, delta):
    return mu1 * F + (mu2 * F + mu1 * F) * np.exp(-np.abs(th1 / th2) ** delta)


def _arctan(n, rng):
    x = rng.uniform(-5.0, 5.0, n)
    return {"x": x}, np.arctan(x)


def _random_mlp(n, rng):
    X = rng.uniform(-1.0, 1.0, (n, 4))
    return _named(X), random_mlp_targets(X, rng=rng)


def _seed(rng):
    return int(rng.integers(2**31 - 1))


def _random_linear(n, rng):
    X, y = skd.make_regression(n_samples=n, n_features=3, n_informative=3, random_state=_seed(rng))
    return _named(X), y


def _sparse_uncorrelated(n, rng):
    X, y = skd.make_sparse_uncorrelated(n_samples=n, n_features=4, random_state=_seed(rng))
    return _named(X), y


def _friedman1(n, rng):
    X, y = skd.make_friedman1(n_samples=n, n_features=5, random_state=_seed(rng))
    return _named(X), y


def _friedman2(n, rng):
    X, y = skd.make_friedman2(n_samples=n, random_state=_seed(rng))
    return _named(X), y


def _friedman3(n, rng):
    X, y = skd.make_friedman3(n_samples=n, random_state=_seed(rng))
    return _named(X), y


def _named(X):
    return {f"x{j}": X[:, j] for j in range(X.shape[1])}


GENERATORS = {
    "euclidean": _euclidean,
    "nernst": _nernst,
    "stribeck": _stribeck,
    "arctan": _arctan,
    "random_mlp": _random_mlp,
    "random_linear": _random_linear,
    "sparse_uncorrelated": _sparse_uncorrelated,
    "friedman1": _friedman1,
    "friedman2": _friedman2,
    "friedman3": _friedman3,
}


def generate_synthetic(name: str, n: int = 1000, noise_sd_fraction: float = 0.0, seed=0) -> Dataset:
    """Draw ``n`` samples from a named generator.

    The target is computed from the clean features. With
    ``noise_sd_fraction > 0`` every feature then receives Gaussian noise with
    standard deviation ``noise_sd_fraction * std(feature)``.
    """
    if name not in GENERATORS:
        raise DatasetError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    if n < 1:
        raise DatasetError("n must be >= 1")
    if noise_sd_fraction < 0:
        raise ValueError("noise_sd_fraction must be >= 0")
    rng = np.random.default_rng(seed)
    cols, y = GENERATORS[name](int(n), rng)
    names = list(cols)
    X = np.column_stack([np.asarray(cols[c], dtype=float) for c in names])
    if noise_sd_fraction > 0:
        X = X + rng.normal(size=X.shape) * (noise_sd_fraction * X.std(axis=0))
    return Dataset.from_arrays(X, y, feature_names=names)
