"""Estimator wrappers around the samplers.

Each resampler fits its relevance function on the targets it is given,
checks the pairing against the applicability grid and returns the
resampled :class:`~imbreg.data.Dataset`. The full bookkeeping is kept in
``outcome_``.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, clone

from ..data import Dataset
from ..relevance import RelevanceFunction, make_relevance
from ..strategies import DEFAULT_RELEVANCE, check_applicable
from . import samplers


class BaseResampler(BaseEstimator):
    method_id = "abstract"

    def _relevance_function(self) -> RelevanceFunction:
        rel = self.relevance
        if rel is None:
            rel = DEFAULT_RELEVANCE[self.method_id]
        if isinstance(rel, str):
            check_applicable(self.method_id, rel)
            return make_relevance(rel)
        if isinstance(rel, RelevanceFunction):
            check_applicable(self.method_id, rel.function_id)
            return clone(rel)
        raise TypeError("relevance must be an id or a RelevanceFunction")

    def fit_resample(self, d: Dataset) -> Dataset:
        if not isinstance(d, Dataset):
            raise TypeError("fit_resample expects a Dataset")
        rel_fn = self._relevance_function().fit(d.y)
        rng = np.random.default_rng(self.random_state)
        outcome = self._resample(d, rel_fn.relevance_, rng)
        if getattr(self, "undersample", False) and self._post_undersample:
            # noise can push targets past the fitted range, where f_r may vanish
            y_new = np.clip(outcome.data.y, d.y.min(), d.y.max())
            under = samplers.undersample_ratio(
                outcome.data, rel_fn.transform(y_new), self.under_rate, rng
            )
            outcome = samplers.chain(outcome, under)
        self.relevance_function_ = rel_fn
        self.outcome_ = replace(outcome, seed=self.random_state)
        return outcome.data

    # over-samplers without a native under-sampling step get the ratio pass
    _post_undersample = True


class SMOTER(BaseResampler):
    method_id = "smoter"
    _post_undersample = False

    def __init__(self, relevance=None, threshold=0.8, k=5, random_state=None):
        self.relevance = relevance
        self.threshold = threshold
        self.k = k
        self.random_state = random_state

    def _resample(self, d, rel, rng):
        return samplers.smoter(d, rel, self.threshold, self.k, rng)


class SMOGN(BaseResampler):
    """SMOGN; ``undersample`` enables its native reduction of frequent partitions."""

    method_id = "smogn"
    _post_undersample = False

    def __init__(self, relevance=None, threshold=0.8, k=5, delta_n=0.01, undersample=False,
                 random_state=None):
        self.relevance = relevance
        self.threshold = threshold
        self.k = k
        self.delta_n = delta_n
        self.undersample = undersample
        self.random_state = random_state

    def _resample(self, d, rel, rng):
        return samplers.smogn(d, rel, self.threshold, self.k, self.delta_n, self.undersample, rng)


class WERCS(BaseResampler):
    method_id = "wercs"
    _post_undersample = False

    def __init__(self, relevance=None, over_rate=0.5, under_rate=0.5, undersample=False,
                 random_state=None):
        self.relevance = relevance
        self.over_rate = over_rate
        self.under_rate = under_rate
        self.undersample = undersample
        self.random_state = random_state

    def _resample(self, d, rel, rng):
        under = self.under_rate if self.undersample else 0.0
        return samplers.wercs(d, rel, self.over_rate, under, rng)


class WSMOTER(BaseResampler):
    method_id = "wsmoter"
    _post_undersample = False

    def __init__(self, relevance=None, k=10, oversampling_ratio=3.0, random_state=None):
        self.relevance = relevance
        self.k = k
        self.oversampling_ratio = oversampling_ratio
        self.random_state = random_state

    def _resample(self, d, rel, rng):
        return samplers.wsmoter(d, rel, self.k, self.oversampling_ratio, rng=rng)


class CSMOGN(BaseResampler):
    method_id = "csmogn"

    def __init__(self, relevance=None, n_bins=10, delta_b=1, n_sample=None, delta_n=0.01, k=5,
                 undersample=False, under_rate=0.5, random_state=None):
        self.relevance = relevance
        self.n_bins = n_bins
        self.delta_b = delta_b
        self.n_sample = n_sample
        self.delta_n = delta_n
        self.k = k
        self.undersample = undersample
        self.under_rate = under_rate
        self.random_state = random_state

    def _resample(self, d, rel, rng):
        return samplers.csmogn(d, rel, self.n_bins, self.delta_b, self.n_sample, self.delta_n,
                               self.k, rng)


class CRBSMOGN(BaseResampler):
    method_id = "crbsmogn"

    def __init__(self, relevance=None, n_bins=10, delta_b=1, delta_n=0.01, undersample=False,
                 under_rate=0.5, random_state=None):
        self.relevance = relevance
        self.n_bins = n_bins
        self.delta_b = delta_b
        self.delta_n = delta_n
        self.undersample = undersample
        self.under_rate = under_rate
        self.random_state = random_state

    def _resample(self, d, rel, rng):
        return samplers.crbsmogn(d, rel, self.n_bins, self.delta_b, self.delta_n, rng)


RESAMPLERS = {cls.method_id: cls for cls in (SMOTER, SMOGN, WERCS, WSMOTER, CSMOGN, CRBSMOGN)}


def make_resampler(method_id: str, **params) -> BaseResampler:
    try:
        cls = RESAMPLERS[method_id]
    except KeyError:
        raise ValueError(
            f"unknown resampling method {method_id!r}; choose from {sorted(RESAMPLERS)}"
        ) from None
    return cls(**params)
