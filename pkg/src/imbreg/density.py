"""Univariate density estimates of the target variable."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

_SQRT_2PI = math.sqrt(2.0 * math.pi)
# Rows of the (query x sample) kernel matrix evaluated per chunk.
_CHUNK = 4096


def _as_targets(targets) -> np.ndarray:
    y = np.asarray(targets, dtype=float).reshape(-1)
    if len(y) == 0:
        raise ValueError("empty target vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    return y


def bin_index(values, lo: float, hi: float, k: int) -> np.ndarray:
    """Equal-width bin ids over ``[lo, hi]``; ``hi`` itself lands in bin ``k - 1``.

    Values outside the range are clipped into the first/last bin.
    """
    values = np.asarray(values, dtype=float)
    if hi <= lo:
        return np.zeros(values.shape, dtype=int)
    idx = np.floor((values - lo) / (hi - lo) * k).astype(int)
    return np.clip(idx, 0, k - 1)


class DensityModel(BaseEstimator):
    """Common surface: ``fit(targets)`` then ``evaluate(y) >= 0``."""

    kind = "abstract"

    def evaluate(self, y) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, y):
        return self.evaluate(y)

    @property
    def support(self) -> tuple[float, float]:
        check_is_fitted(self, "support_")
        return self.support_


class HistogramDensity(DensityModel):
    """Relative bin frequency ``b_j / max_l b_l`` of an equal-width histogram."""

    kind = "histogram"

    def __init__(self, n_bins: int = 10):
        self.n_bins = n_bins

    def fit(self, targets):
        y = _as_targets(targets)
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        lo, hi = float(y.min()), float(y.max())
        if hi <= lo:
            raise ValueError("constant target vector: histogram is undefined")
        counts = np.bincount(bin_index(y, lo, hi, self.n_bins), minlength=self.n_bins)
        self.counts_ = counts
        self.frequencies_ = counts / counts.max()
        self.support_ = (lo, hi)
        return self

    def bin_of(self, y) -> np.ndarray:
        check_is_fitted(self, "counts_")
        return bin_index(y, *self.support_, self.n_bins)

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        lo, hi = self.support
        p = self.frequencies_[self.bin_of(y)]
        return np.where((y < lo) | (y > hi), 0.0, p)


def silverman_bandwidth(targets) -> float:
    """``0.9 * min(std, IQR / 1.34) * N ** (-1/5)``.

    When one of the two spread measures is zero the other is used alone.
    """
    y = _as_targets(targets)
    n = len(y)
    if n < 2:
        raise ValueError("Silverman bandwidth needs at least two samples")
    sigma = float(np.std(y, ddof=1))
    q75, q25 = np.percentile(y, [75, 25])
    spread = [s for s in (sigma, (q75 - q25) / 1.34) if s > 0]
    if not spread:
        raise ValueError("zero spread: no density can be estimated")
    return 0.9 * min(spread) * n ** (-0.2)


class KDEDensity(DensityModel):
    """Gaussian kernel density estimate evaluated by exact summation.

    Parameters
    ----------
    bandwidth : float or "silverman"
        Kernel standard deviation in target units.
    """

    kind = "kde"

    def __init__(self, bandwidth="silverman"):
        self.bandwidth = bandwidth

    def fit(self, targets):
        y = _as_targets(targets)
        if self.bandwidth in (None, "silverman", "auto"):
            h = silverman_bandwidth(y)
        else:
            h = float(self.bandwidth)
            if not h > 0:
                raise ValueError("bandwidth must be positive")
        self.samples_ = np.sort(y)
        self.bandwidth_ = h
        self.support_ = (float(y.min()), float(y.max()))
        return self

    def evaluate(self, y) -> np.ndarray:
        check_is_fitted(self, "samples_")
        q = np.asarray(y, dtype=float)
        flat = q.reshape(-1)
        out = np.empty(len(flat))
        h, s = self.bandwidth_, self.samples_
        norm = 1.0 / (len(s) * h * _SQRT_2PI)
        step = max(1, _CHUNK * 64 // max(len(s), 1))
        for start in range(0, len(flat), step):
            z = (flat[start : start + step, None] - s[None, :]) / h
            out[start : start + step] = np.exp(-0.5 * z * z).sum(axis=1) * norm
        return out.reshape(q.shape)

    def integration_bounds(self) -> tuple[float, float]:
        lo, hi = self.support
        return lo - 4 * self.bandwidth_, hi + 4 * self.bandwidth_


def gaussian_window(width: int, variance: float) -> np.ndarray:
    """Discrete symmetric Gaussian weights over ``width`` bins, summing to 1."""
    if width < 1 or width % 2 == 0:
        raise ValueError("kernel width must be an odd count >= 1")
    if not variance > 0:
        raise ValueError("kernel variance must be positive")
    half = width // 2
    offsets = np.arange(-half, half + 1)
    w = np.exp(-0.5 * offsets**2 / variance)
    return w / w.sum()


def smooth_counts(counts, width: int, variance: float) -> np.ndarray:
    """Spread each bin's count over its kernel window.

    Window positions that fall off either edge are dropped and the remaining
    weights renormalised, so every bin's mass is kept inside the histogram.
    """
    counts = np.asarray(counts, dtype=float)
    k = len(counts)
    kernel = gaussian_window(width, variance)
    half = width // 2
    out = np.zeros(k)
    for j in np.flatnonzero(counts):
        lo, hi = max(0, j - half), min(k, j + half + 1)
        w = kernel[lo - (j - half) : hi - (j - half)]
        out[lo:hi] += counts[j] * w / w.sum()
    return out


class SmoothedHistogramDensity(DensityModel):
    """Histogram counts convolved with a Gaussian kernel in bin units."""

    kind = "smoothed-histogram"

    def __init__(self, n_bins: int = 50, kernel_width: int = 5, kernel_variance: float = 4.0):
        self.n_bins = n_bins
        self.kernel_width = kernel_width
        self.kernel_variance = kernel_variance

    def fit(self, targets):
        y = _as_targets(targets)
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        lo, hi = float(y.min()), float(y.max())
        if hi <= lo:
            raise ValueError("constant target vector: histogram is undefined")
        counts = np.bincount(bin_index(y, lo, hi, self.n_bins), minlength=self.n_bins)
        self.counts_ = counts
        self.smoothed_ = smooth_counts(counts, self.kernel_width, self.kernel_variance)
        self.support_ = (lo, hi)
        return self

    def evaluate(self, y) -> np.ndarray:
        check_is_fitted(self, "smoothed_")
        y = np.asarray(y, dtype=float)
        lo, hi = self.support_
        vals = self.smoothed_[bin_index(y, lo, hi, self.n_bins)]
        return np.where((y < lo) | (y > hi), 0.0, vals)


class UniformDensity(DensityModel):
    """Uniform density on ``[low, high]``; fitted to the target range when unset."""

    kind = "uniform"

    def __init__(self, low=None, high=None):
        self.low = low
        self.high = high

    def fit(self, targets=None):
        if self.low is None or self.high is None:
            y = _as_targets(targets)
            lo, hi = float(y.min()), float(y.max())
        else:
            lo, hi = float(self.low), float(self.high)
        if hi <= lo:
            raise ValueError("uniform density needs a non-degenerate interval")
        self.support_ = (lo, hi)
        return self

    def evaluate(self, y) -> np.ndarray:
        check_is_fitted(self, "support_")
        y = np.asarray(y, dtype=float)
        lo, hi = self.support_
        return np.where((y >= lo) & (y <= hi), 1.0 / (hi - lo), 0.0)


def fit_histogram(targets, k: int = 10) -> HistogramDensity:
    return HistogramDensity(k).fit(targets)


def fit_kde(targets, bandwidth="silverman") -> KDEDensity:
    return KDEDensity(bandwidth).fit(targets)


def fit_smoothed_histogram(targets, k: int = 50, kernel_width_bins: int = 5,
                           kernel_var_bins: float = 4.0) -> SmoothedHistogramDensity:
    return SmoothedHistogramDensity(k, kernel_width_bins, kernel_var_bins).fit(targets)
