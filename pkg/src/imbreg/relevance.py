"""Relevance functions: map target values to per-sample importance.

Every function is an estimator fitted on training targets. ``transform``
evaluates the fitted function at arbitrary target values, which the
ensembles need for predicted targets. Two output scales exist:

* ``bounded01`` -- values in ``[epsilon, 1]``, 1 being most relevant;
* ``ratio`` -- positive values where 1 is the nominal (balanced) relevance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from .density import (
    DensityModel,
    HistogramDensity,
    KDEDensity,
    SmoothedHistogramDensity,
    UniformDensity,
)

BOUNDED = "bounded01"
RATIO = "ratio"
DEFAULT_EPSILON = 1e-6


class RelevanceNotApplicableError(ValueError):
    """The relevance function cannot produce meaningful values for these targets."""


@dataclass(frozen=True, eq=False)
class RelevanceVector:
    values: np.ndarray
    scale: str
    function_id: str
    epsilon: float = DEFAULT_EPSILON
    domain_relevance: Optional[DensityModel] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if self.scale == BOUNDED:
            if np.any(values < self.epsilon - 1e-15) or np.any(values > 1.0 + 1e-12):
                raise ValueError("bounded relevance outside [epsilon, 1]")
        elif self.scale == RATIO:
            if np.any(~(values > 0)) or not np.all(np.isfinite(values)):
                raise ValueError("ratio relevance must be finite and positive")
        else:
            raise ValueError(f"unknown relevance scale {self.scale!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def subset(self, idx) -> "RelevanceVector":
        return RelevanceVector(self.values[np.asarray(idx)], self.scale, self.function_id,
                               self.epsilon, self.domain_relevance, dict(self.info))


class RelevanceFunction(BaseEstimator):
    function_id = "abstract"
    scale = BOUNDED

    def fit(self, y):
        y = np.asarray(y, dtype=float).reshape(-1)
        if len(y) == 0 or not np.all(np.isfinite(y)):
            raise ValueError("relevance needs a non-empty finite target vector")
        self._fit(y)
        self.fitted_ = True
        self.target_range_ = (float(y.min()), float(y.max()))
        self.relevance_ = self._vector(self.transform(y))
        return self

    def transform(self, y) -> np.ndarray:
        check_is_fitted(self, "fitted_")
        return self._transform(np.asarray(y, dtype=float))

    def fit_transform(self, y) -> np.ndarray:
        return self.fit(y).relevance_.values.copy()

    def _vector(self, values, **info) -> RelevanceVector:
        return RelevanceVector(values, self.scale, self.function_id,
                               getattr(self, "epsilon", DEFAULT_EPSILON),
                               domain_relevance=getattr(self, "domain_", None), info=info)

    def _bounded(self, w):
        return np.clip(w, self.epsilon, 1.0)


class PchipRelevance(RelevanceFunction):
    """Cubic Hermite interpolation through control points with zero slopes.

    Without explicit control points the boxplot statistics give
    ``(adjL, 1), (median, 0), (adjH, 1)``, with the adjacent values taken at
    ``coef * IQR`` beyond the quartiles.
    """

    function_id = "pchip"

    def __init__(self, control_points=None, coef: float = 1.5, epsilon: float = DEFAULT_EPSILON):
        self.control_points = control_points
        self.coef = coef
        self.epsilon = epsilon

    def _fit(self, y):
        if self.control_points is None:
            pts = boxplot_control_points(y, self.coef)
        else:
            pts = [(float(a), float(b)) for a, b, *_ in self.control_points]
        xs = np.array([p[0] for p in pts])
        vs = np.array([p[1] for p in pts])
        if len(xs) < 2 or np.any(np.diff(xs) <= 0):
            raise RelevanceNotApplicableError(
                "relevance function not applicable: control points are not strictly increasing"
            )
        if np.any((vs < 0) | (vs > 1)):
            raise ValueError("control point relevance must lie in [0, 1]")
        self.control_x_, self.control_v_ = xs, vs

    def _transform(self, y):
        xs, vs = self.control_x_, self.control_v_
        yc = np.clip(y, xs[0], xs[-1])
        seg = np.clip(np.searchsorted(xs, yc, side="right") - 1, 0, len(xs) - 2)
        t = (yc - xs[seg]) / (xs[seg + 1] - xs[seg])
        # Hermite basis with zero end slopes
        v = vs[seg] + (vs[seg + 1] - vs[seg]) * (3 * t**2 - 2 * t**3)
        return self._bounded(v)


def boxplot_control_points(y, coef: float = 1.5):
    y = np.asarray(y, dtype=float)
    q1, med, q3 = np.percentile(y, [25, 50, 75])
    iqr = q3 - q1
    if iqr <= 0:
        raise RelevanceNotApplicableError("relevance function not applicable: IQR is zero")
    adj_low = float(y[y >= q1 - coef * iqr].min())
    adj_high = float(y[y <= q3 + coef * iqr].max())
    return [(adj_low, 1.0), (float(med), 0.0), (adj_high, 1.0)]


class HistogramRelevance(RelevanceFunction):
    """``1 - b_j / max(b)`` for the bin ``j`` holding the target."""

    function_id = "histogram"

    def __init__(self, n_bins: int = 10, epsilon: float = DEFAULT_EPSILON):
        self.n_bins = n_bins
        self.epsilon = epsilon

    def _fit(self, y):
        self.density_ = HistogramDensity(self.n_bins).fit(y)

    def _transform(self, y):
        return self._bounded(1.0 - self.density_.evaluate(y))


class LDSRelevance(RelevanceFunction):
    """Label distribution smoothing, scaled by its maximum and inverted."""

    function_id = "lds"

    def __init__(self, n_bins: int = 50, kernel_width: int = 5, kernel_variance: float = 4.0,
                 epsilon: float = DEFAULT_EPSILON):
        self.n_bins = n_bins
        self.kernel_width = kernel_width
        self.kernel_variance = kernel_variance
        self.epsilon = epsilon

    def _fit(self, y):
        self.density_ = SmoothedHistogramDensity(
            self.n_bins, self.kernel_width, self.kernel_variance
        ).fit(y)
        self.peak_ = float(self.density_.smoothed_.max())

    def _transform(self, y):
        return self._bounded(1.0 - self.density_.evaluate(y) / self.peak_)


class KDERelevance(RelevanceFunction):
    function_id = "kde"

    def __init__(self, bandwidth="silverman", epsilon: float = DEFAULT_EPSILON):
        self.bandwidth = bandwidth
        self.epsilon = epsilon

    def _fit(self, y):
        self.density_ = KDEDensity(self.bandwidth).fit(y)
        self.peak_ = float(self.density_.evaluate(y).max())

    def normalized_density(self, y):
        return self.density_.evaluate(y) / self.peak_

    def _transform(self, y):
        return self._bounded(1.0 - self.normalized_density(y))


def denseweight_from_density(p_norm, alpha: float = 1.0, epsilon: float = DEFAULT_EPSILON):
    """Weights ``max(1 - alpha * p', eps)`` and the same divided by their mean."""
    raw = np.maximum(1.0 - alpha * np.asarray(p_norm, dtype=float), epsilon)
    return raw, raw / raw.mean()


class DenseWeightRelevance(RelevanceFunction):
    """KDE relevance with a density scaling factor, normalised to mean 1."""

    function_id = "denseweight"
    scale = RATIO

    def __init__(self, alpha: float = 1.0, bandwidth="silverman", epsilon: float = DEFAULT_EPSILON):
        self.alpha = alpha
        self.bandwidth = bandwidth
        self.epsilon = epsilon

    def _fit(self, y):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.density_ = KDEDensity(self.bandwidth).fit(y)
        p = self.density_.evaluate(y)
        self.peak_ = float(p.max())
        raw, _ = denseweight_from_density(p / self.peak_, self.alpha, self.epsilon)
        self.mean_weight_ = float(raw.mean())

    def _transform(self, y):
        raw = np.maximum(1.0 - self.alpha * self.density_.evaluate(y) / self.peak_, self.epsilon)
        return raw / self.mean_weight_


def domain_density(domain, y) -> DensityModel:
    if domain is None:
        return UniformDensity().fit(y)
    if isinstance(domain, DensityModel):
        try:
            check_is_fitted(domain, "support_")
            return domain
        except Exception:
            return clone(domain).fit(y)
    raise TypeError("domain_density must be a DensityModel or None")


def normalize_distance(lam, lam_min: float, lam_max: float) -> np.ndarray:
    """Piecewise map of density distances onto [0, 1] with 0 fixed at 0.5."""
    lam = np.asarray(lam, dtype=float)
    neg = lam_min if lam_min < 0 else 1.0
    pos = lam_max if lam_max > 0 else 1.0
    out = np.where(lam < 0, 0.5 - 0.5 * lam / neg, 0.5 + 0.5 * lam / pos)
    return np.clip(out, 0.0, 1.0)


class DensityDistanceRelevance(RelevanceFunction):
    """Relevance from the difference between empirical and domain densities.

    ``f_x - f_r`` is normalised around 0.5 separately on each sign branch
    and inverted, so samples where both densities agree get 0.5.
    """

    function_id = "density_distance"

    def __init__(self, domain_density=None, bandwidth="silverman", epsilon: float = DEFAULT_EPSILON):
        self.domain_density = domain_density
        self.bandwidth = bandwidth
        self.epsilon = epsilon

    def _fit(self, y):
        self.density_ = KDEDensity(self.bandwidth).fit(y)
        self.domain_ = domain_density(self.domain_density, y)
        lam = self.distance(y)
        self.lambda_min_, self.lambda_max_ = float(lam.min()), float(lam.max())

    def distance(self, y):
        return self.density_.evaluate(y) - self.domain_.evaluate(y)

    def _transform(self, y):
        if self.lambda_max_ == self.lambda_min_:
            return np.full(np.shape(y), 0.5)
        lam = normalize_distance(self.distance(y), self.lambda_min_, self.lambda_max_)
        return self._bounded(1.0 - lam)


class DensityRatioRelevance(RelevanceFunction):
    """Inverse ratio ``f_r / f_x`` of domain and empirical densities.

    Values are clipped to ``[1 / ratio_cap, ratio_cap]``.
    """

    function_id = "density_ratio"
    scale = RATIO

    def __init__(self, domain_density=None, bandwidth="silverman", ratio_cap: float = 20.0):
        self.domain_density = domain_density
        self.bandwidth = bandwidth
        self.ratio_cap = ratio_cap

    def _fit(self, y):
        if not self.ratio_cap > 1:
            raise ValueError("ratio_cap must exceed 1")
        self.density_ = KDEDensity(self.bandwidth).fit(y)
        self.domain_ = domain_density(self.domain_density, y)

    def density_ratio(self, y):
        """Empirical over domain density; raises where the domain density is zero."""
        fr = self.domain_.evaluate(y)
        if np.any(fr <= 0):
            raise ValueError("domain relevance density is zero at a queried target")
        return self.density_.evaluate(y) / fr

    def _raw(self, y):
        ratio = self.density_ratio(y)
        with np.errstate(divide="ignore"):
            return np.where(ratio > 0, 1.0 / np.where(ratio > 0, ratio, 1.0), np.inf)

    def _transform(self, y):
        return np.clip(self._raw(y), 1.0 / self.ratio_cap, self.ratio_cap)

    def fit(self, y):
        y = np.asarray(y, dtype=float).reshape(-1)
        self._fit(y)
        self.fitted_ = True
        self.target_range_ = (float(y.min()), float(y.max()))
        raw = self._raw(y)
        clipped = int(np.sum((raw > self.ratio_cap) | (raw < 1.0 / self.ratio_cap)))
        self.relevance_ = RelevanceVector(
            np.clip(raw, 1.0 / self.ratio_cap, self.ratio_cap), RATIO, self.function_id,
            domain_relevance=self.domain_, info={"ratio_cap": self.ratio_cap, "n_clipped": clipped},
        )
        return self


RELEVANCE_FUNCTIONS = {
    cls.function_id: cls
    for cls in (
        PchipRelevance,
        HistogramRelevance,
        LDSRelevance,
        KDERelevance,
        DenseWeightRelevance,
        DensityDistanceRelevance,
        DensityRatioRelevance,
    )
}


def make_relevance(function_id: str, **params) -> RelevanceFunction:
    try:
        cls = RELEVANCE_FUNCTIONS[function_id]
    except KeyError:
        raise ValueError(
            f"unknown relevance function {function_id!r}; choose from {sorted(RELEVANCE_FUNCTIONS)}"
        ) from None
    return cls(**params)


def relevance_pchip(targets, control_points=None, coef=1.5, epsilon=DEFAULT_EPSILON):
    return PchipRelevance(control_points, coef, epsilon).fit(targets).relevance_


def relevance_histogram(targets, k=10, epsilon=DEFAULT_EPSILON):
    return HistogramRelevance(k, epsilon).fit(targets).relevance_


def relevance_lds(targets, k=50, width=5, variance=4.0, epsilon=DEFAULT_EPSILON):
    return LDSRelevance(k, width, variance, epsilon).fit(targets).relevance_


def relevance_kde(targets, bandwidth="silverman", epsilon=DEFAULT_EPSILON):
    return KDERelevance(bandwidth, epsilon).fit(targets).relevance_


def relevance_denseweight(targets, alpha=1.0, bandwidth="silverman", epsilon=DEFAULT_EPSILON):
    return DenseWeightRelevance(alpha, bandwidth, epsilon).fit(targets).relevance_


def relevance_density_distance(targets, f_r=None, bandwidth="silverman", epsilon=DEFAULT_EPSILON):
    return DensityDistanceRelevance(f_r, bandwidth, epsilon).fit(targets).relevance_


def relevance_density_ratio(targets, f_r=None, ratio_cap=20.0, bandwidth="silverman"):
    return DensityRatioRelevance(f_r, bandwidth, ratio_cap).fit(targets).relevance_
