"""Two-model ensembles of a mitigation-trained and a plain model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .relevance import BOUNDED, RATIO, RelevanceFunction

MODES = ("mean", "weighted", "ratio_weighted", "threshold")


def _predictions(model, X):
    if X is None:
        return np.asarray(model, dtype=float).reshape(-1)
    return np.asarray(model.predict(X), dtype=float).reshape(-1)


def _scale_of(rel_of):
    return getattr(rel_of, "scale", None)


def _relevance_at(rel_of, y, clip_to_support: bool):
    if isinstance(rel_of, RelevanceFunction):
        if clip_to_support:
            lo, hi = rel_of.target_range_
            y = np.clip(y, lo, hi)
        return np.asarray(rel_of.transform(y), dtype=float)
    return np.asarray(rel_of(y), dtype=float)


def ensemble_predict(m_imb, m_norm, X=None, mode: str = "mean", rel_of=None,
                     threshold: float | None = None, clip_to_support: bool = True) -> np.ndarray:
    """Combine the predictions of two models.

    Parameters
    ----------
    m_imb, m_norm : estimator or array_like
        The model trained with imbalance mitigation and the plain model. With
        ``X=None`` both are taken as prediction vectors.
    mode : {"mean", "weighted", "ratio_weighted", "threshold"}
        ``weighted`` mixes by ``w`` and ``1 - w``; ``ratio_weighted`` by
        ``w`` and 1; ``threshold`` picks ``m_imb`` where ``w >= threshold``.
    rel_of : RelevanceFunction or callable
        Evaluated at the mean of both predictions, the only target estimate
        available at inference time.
    threshold : float, optional
        Defaults to 0.5 for bounded and 1.0 for ratio relevance.
    clip_to_support : bool
        Clip the mean prediction into the range the relevance function was
        fitted on before evaluating it.
    """
    a, b = _predictions(m_imb, X), _predictions(m_norm, X)
    if a.shape != b.shape:
        raise ValueError("the two models returned different numbers of predictions")
    y_mean = (a + b) / 2.0
    if mode == "mean":
        return y_mean
    if mode not in MODES:
        raise ValueError(f"unknown ensemble mode {mode!r}; choose from {list(MODES)}")
    if rel_of is None:
        raise ValueError(f"mode {mode!r} needs a relevance function")
    scale = _scale_of(rel_of)
    w = _relevance_at(rel_of, y_mean, clip_to_support)
    if not np.all(np.isfinite(w)):
        raise ValueError("relevance is not finite at a predicted target")
    if mode == "weighted":
        if scale == RATIO:
            raise ValueError("weighted mode needs relevance bounded to [0, 1]; use ratio_weighted")
        w = np.clip(w, 0.0, 1.0)
        return w * a + (1.0 - w) * b
    if mode == "ratio_weighted":
        if np.any(w < 0):
            raise ValueError("ratio_weighted mode needs non-negative relevance")
        return (w * a + b) / (w + 1.0)
    if threshold is None:
        threshold = 1.0 if scale == RATIO else 0.5
    if scale == BOUNDED and not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1] for bounded relevance")
    return np.where(w < threshold, b, a)


class EnsembleRegressor(RegressorMixin, BaseEstimator):
    """Ensemble of two already-fitted regressors.

    ``fit`` does not train anything; it only checks that both members
    predict. The relevance function must be fitted on the training targets.
    """

    def __init__(self, imbalanced_model=None, baseline_model=None, mode="mean", relevance=None,
                 threshold=None, clip_to_support=True):
        self.imbalanced_model = imbalanced_model
        self.baseline_model = baseline_model
        self.mode = mode
        self.relevance = relevance
        self.threshold = threshold
        self.clip_to_support = clip_to_support

    def fit(self, X=None, y=None):
        for name in ("imbalanced_model", "baseline_model"):
            if not hasattr(getattr(self, name), "predict"):
                raise TypeError(f"{name} must be a fitted regressor")
        if self.mode not in MODES:
            raise ValueError(f"unknown ensemble mode {self.mode!r}")
        self.fitted_ = True
        return self

    def predict(self, X):
        return ensemble_predict(self.imbalanced_model, self.baseline_model, X, self.mode,
                                self.relevance, self.threshold, self.clip_to_support)
