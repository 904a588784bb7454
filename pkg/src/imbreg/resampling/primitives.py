"""Building blocks shared by the SMOTE-family samplers.

Samplers work on a :class:`Table`, a numeric/categorical split of a
:class:`~imbreg.data.Dataset` with categorical cells replaced by integer
codes, so distances and interpolation vectorise over many pairs at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import NUMERIC, Dataset
from ..density import bin_index

# rows per block when materialising distance matrices
_BLOCK = 512


class Table:
    """Array view of a dataset used by the samplers."""

    def __init__(self, d: Dataset):
        self.source = d
        self.num = d.numeric_block()
        self.y = d.y.astype(float)
        cat = d.categorical_block()
        self.tokens = []
        codes = np.zeros(cat.shape, dtype=int)
        for j in range(cat.shape[1]):
            toks, inv = np.unique(cat[:, j].astype(str), return_inverse=True)
            self.tokens.append(toks.astype(object))
            codes[:, j] = inv
        self.cat = codes
        self.num_range = _ranges(self.num)
        self.y_range = float(np.ptp(self.y)) if len(self.y) else 0.0
        self.num_std = self.num.std(axis=0) if len(self.num) else np.zeros(self.num.shape[1])
        self.y_std = float(self.y.std())

    def __len__(self):
        return len(self.y)

    def build(self, num: np.ndarray, cat: np.ndarray, y: np.ndarray) -> Dataset:
        """Decode generated rows back into a dataset with the source schema."""
        cat_cells = np.empty(cat.shape, dtype=object)
        for j, toks in enumerate(self.tokens):
            cat_cells[:, j] = toks[cat[:, j]]
        return self.source.assemble(num, cat_cells, y)

    def distances(self, rows, cols, with_target: bool) -> np.ndarray:
        """HEOM distance matrix between ``rows`` and ``cols`` (index arrays)."""
        rows, cols = np.asarray(rows, dtype=int), np.asarray(cols, dtype=int)
        out = np.empty((len(rows), len(cols)))
        scale = _inv(self.num_range)
        for s in range(0, len(rows), _BLOCK):
            r = rows[s : s + _BLOCK]
            diff = (self.num[r, None, :] - self.num[None, cols, :]) * scale
            acc = np.einsum("ijk,ijk->ij", diff, diff)
            if self.cat.shape[1]:
                acc += (self.cat[r, None, :] != self.cat[None, cols, :]).sum(axis=2)
            if with_target and self.y_range > 0:
                dy = (self.y[r, None] - self.y[None, cols]) / self.y_range
                acc += dy * dy
            out[s : s + _BLOCK] = np.sqrt(acc)
        return out

    def nearest(self, seed: int, pool, k: int, with_target: bool) -> np.ndarray:
        """The ``k`` HEOM-nearest members of ``pool``; ties go to the earlier pool entry."""
        pool = np.asarray(pool, dtype=int)
        if k >= len(pool):
            return pool
        dist = self.distances([seed], pool, with_target)[0]
        return pool[np.argsort(dist, kind="stable")[:k]]


def _ranges(block: np.ndarray) -> np.ndarray:
    if block.size == 0:
        return np.zeros(block.shape[1])
    return block.max(axis=0) - block.min(axis=0)


def _inv(ranges: np.ndarray) -> np.ndarray:
    # constant columns contribute nothing
    return np.where(ranges > 0, 1.0 / np.where(ranges > 0, ranges, 1.0), 0.0)


def heom_distance(a, b, ranges, categorical=None) -> float:
    """Heterogeneous Euclidean-overlap distance between two rows.

    Numeric cells add ``(|a - b| / range) ** 2`` (zero for ``range == 0``);
    categorical cells add 1 when they differ.

    Parameters
    ----------
    a, b : sequence
        Feature rows of equal length.
    ranges : sequence of float
        ``max - min`` per column; ignored for categorical columns.
    categorical : sequence of bool, optional
        Marks categorical columns. Defaults to all numeric.
    """
    a, b = list(a), list(b)
    if len(a) != len(b):
        raise ValueError("rows differ in length")
    if categorical is None:
        categorical = [False] * len(a)
    total = 0.0
    for x1, x2, rng, is_cat in zip(a, b, ranges, categorical):
        if is_cat:
            total += float(x1 != x2)
        elif rng > 0:
            total += ((float(x1) - float(x2)) / rng) ** 2
    return float(np.sqrt(total))


def heom_ranges(d: Dataset) -> np.ndarray:
    """Per-column ranges of ``d`` in column order (0 for categorical columns)."""
    out = np.zeros(d.n_features)
    for j, col in enumerate(d.columns):
        if col.kind == NUMERIC:
            vals = d.X[:, j].astype(float)
            out[j] = vals.max() - vals.min()
    return out


@dataclass(frozen=True, eq=False)
class BinnedDataset:
    """Equal-width bin ids for every numeric feature and the target.

    ``feature_bins`` follows the dataset's numeric column order;
    categorical codes are carried unchanged from the table.
    """

    source: Dataset
    feature_bins: np.ndarray
    target_bins: np.ndarray
    categorical: np.ndarray
    n_bins: int

    def as_matrix(self) -> np.ndarray:
        """``N x d`` matrix in column order: bin ids or raw category tokens."""
        d = self.source
        out = np.empty((len(d), d.n_features), dtype=object)
        out[:, d.numeric_idx] = self.feature_bins
        if len(d.categorical_idx):
            out[:, d.categorical_idx] = d.categorical_block()
        return out


def _bin_columns(block: np.ndarray, n_bins: int) -> np.ndarray:
    out = np.zeros(block.shape, dtype=int)
    for j in range(block.shape[1]):
        col = block[:, j]
        out[:, j] = bin_index(col, col.min(), col.max(), n_bins)
    return out


def discretize_dataset(d: Dataset, n_bins: int = 10, table: Table | None = None) -> BinnedDataset:
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    table = table or Table(d)
    return BinnedDataset(
        source=d,
        feature_bins=_bin_columns(table.num, n_bins),
        target_bins=_bin_columns(table.y[:, None], n_bins)[:, 0],
        categorical=table.cat,
        n_bins=n_bins,
    )


def similar_samples(binned: BinnedDataset, seed: int, delta_b: int = 1) -> np.ndarray:
    """Indices of rows within ``delta_b`` bins of ``seed`` in every numeric
    column and the target, sharing all its categories. The seed is excluded."""
    ok = np.abs(binned.target_bins - binned.target_bins[seed]) <= delta_b
    if binned.feature_bins.shape[1]:
        ok &= np.all(np.abs(binned.feature_bins - binned.feature_bins[seed]) <= delta_b, axis=1)
    if binned.categorical.shape[1]:
        ok &= np.all(binned.categorical == binned.categorical[seed], axis=1)
    ok[seed] = False
    return np.flatnonzero(ok)


def interpolate_rows(table: Table, first, second, rng):
    """Synthetic rows between seed pairs ``(first[i], second[i])``.

    Each numeric feature gets its own uniform draw ``r`` and becomes
    ``s1 + r * (s2 - s1)``; categories are picked from either seed with equal
    probability. The target is the inverse-distance weighted mean of the
    seed targets, distances measured on the features only.
    """
    first, second = np.asarray(first, dtype=int), np.asarray(second, dtype=int)
    m = len(first)
    x1, x2 = table.num[first], table.num[second]
    num = x1 + rng.random((m, table.num.shape[1])) * (x2 - x1)
    c1, c2 = table.cat[first], table.cat[second]
    cat = np.where(rng.random(c1.shape) < 0.5, c1, c2)

    scale = _inv(table.num_range)
    d1 = np.sum(((num - x1) * scale) ** 2, axis=1) + np.sum(cat != c1, axis=1)
    d2 = np.sum(((num - x2) * scale) ** 2, axis=1) + np.sum(cat != c2, axis=1)
    d1, d2 = np.sqrt(d1), np.sqrt(d2)
    y1, y2 = table.y[first], table.y[second]
    total = d1 + d2
    with np.errstate(invalid="ignore", divide="ignore"):
        y = np.where(total > 0, (d1 * y2 + d2 * y1) / np.where(total > 0, total, 1.0), y1)
    # rounding can push the weighted mean a hair outside the seed interval
    y = np.clip(y, np.minimum(y1, y2), np.maximum(y1, y2))
    return num, cat, y


def noise_rows(table: Table, seeds, delta_n: float, rng):
    """Copies of ``seeds`` with N(0, delta_n * std) noise on numeric columns and the target."""
    seeds = np.asarray(seeds, dtype=int)
    m = len(seeds)
    num = table.num[seeds] + rng.normal(size=(m, table.num.shape[1])) * (delta_n * table.num_std)
    y = table.y[seeds] + rng.normal(size=m) * (delta_n * table.y_std)
    return num, table.cat[seeds].copy(), y


def interpolate(d: Dataset, i: int, j: int, rng):
    """Interpolate between rows ``i`` and ``j`` of ``d``; returns ``(features, target)``."""
    table = Table(d)
    num, cat, y = interpolate_rows(table, [i], [j], rng)
    out = table.build(num, cat, y)
    return out.X[0], float(out.y[0])


def gaussian_noise_sample(d: Dataset, i: int, delta_n: float = 0.01, rng=None):
    """Noisy copy of row ``i``; returns ``(features, target)``."""
    rng = np.random.default_rng(rng)
    table = Table(d)
    num, cat, y = noise_rows(table, [i], delta_n, rng)
    out = table.build(num, cat, y)
    return out.X[0], float(out.y[0])
