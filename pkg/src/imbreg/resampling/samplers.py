"""Sampling-based imbalance mitigation for regression."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset
from ..relevance import BOUNDED, RATIO, RelevanceVector
from ..strategies import ApplicabilityError
from .primitives import (
    Table,
    discretize_dataset,
    interpolate_rows,
    noise_rows,
    similar_samples,
)


@dataclass(frozen=True, eq=False)
class ResampleOutcome:
    data: Dataset
    n_source: int
    n_interpolated: int = 0
    n_noise: int = 0
    n_replicated: int = 0
    n_dropped: int = 0
    method_id: str = ""
    seed: object = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = self.n_source + self.n_interpolated + self.n_noise + self.n_replicated - self.n_dropped
        if len(self.data) != expected:
            raise AssertionError(
                f"{self.method_id}: {len(self.data)} rows, accounting says {expected}"
            )

    def counts(self) -> dict:
        return {
            "n_source": self.n_source,
            "n_interpolated": self.n_interpolated,
            "n_noise": self.n_noise,
            "n_replicated": self.n_replicated,
            "n_dropped": self.n_dropped,
            "n_result": len(self.data),
        }


def _values(rel, n: int, scale: str | None = None) -> np.ndarray:
    if isinstance(rel, RelevanceVector):
        if scale is not None and rel.scale != scale:
            raise ApplicabilityError(f"expected {scale} relevance, got {rel.scale}")
        values = rel.values
    else:
        values = np.asarray(rel, dtype=float)
    if len(values) != n:
        raise ValueError(f"{len(values)} relevance values for {n} samples")
    return np.asarray(values, dtype=float)


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _spread(total: int, n_seeds: int, rng) -> np.ndarray:
    """Split ``total`` new rows as evenly as possible over ``n_seeds`` seeds."""
    counts = np.full(n_seeds, total // n_seeds)
    extra = rng.choice(n_seeds, total % n_seeds, replace=False)
    counts[extra] += 1
    return counts


def _assemble(table, keep, pairs, noise_seeds, replicas, rng, delta_n):
    """Kept rows, then interpolated, noisy and replicated rows, in that order."""
    first = np.array([p[0] for p in pairs], dtype=int)
    second = np.array([p[1] for p in pairs], dtype=int)
    num_i, cat_i, y_i = interpolate_rows(table, first, second, rng)
    num_n, cat_n, y_n = noise_rows(table, np.asarray(noise_seeds, dtype=int), delta_n, rng)
    keep = np.asarray(keep, dtype=int)
    replicas = np.asarray(replicas, dtype=int)
    num = np.vstack([table.num[keep], num_i, num_n, table.num[replicas]])
    cat = np.vstack([table.cat[keep], cat_i, cat_n, table.cat[replicas]])
    y = np.concatenate([table.y[keep], y_i, y_n, table.y[replicas]])
    return table.build(num, cat, y)


def smoter(d: Dataset, rel, threshold: float = 0.8, k: int = 5, rng=None) -> ResampleOutcome:
    """SMOTE for regression in balanced mode.

    Rows with relevance >= ``threshold`` form the minority set. The majority
    set is randomly reduced to ``N // 2`` rows and the minority set grown to
    the remaining ``N - N // 2`` by interpolating each seed with a random one
    of its ``k`` nearest minority neighbours (HEOM over features).
    """
    rng = _rng(rng)
    w = _values(rel, len(d), BOUNDED if isinstance(rel, RelevanceVector) else None)
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    n = len(d)
    minority = np.flatnonzero(w >= threshold)
    majority = np.flatnonzero(w < threshold)
    if len(minority) == 0:
        raise ValueError("no sample reaches the relevance threshold: empty minority set")
    params = {"threshold": threshold, "k": k}
    if len(majority) == 0:
        return ResampleOutcome(d, n, method_id="smoter", params=params)

    maj_target = n // 2
    min_target = n - maj_target
    kept_major = (
        np.sort(rng.choice(majority, maj_target, replace=False))
        if len(majority) > maj_target
        else majority
    )
    table = Table(d)
    n_new = max(0, min_target - len(minority))
    pairs, replicas = [], []
    if n_new:
        per_seed = _spread(n_new, len(minority), rng)
        if len(minority) == 1:
            replicas = [minority[0]] * n_new
        else:
            k_eff = min(k, len(minority) - 1)
            dist = table.distances(minority, minority, with_target=False)
            np.fill_diagonal(dist, np.inf)
            order = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
            for s, count in enumerate(per_seed):
                for pick in rng.integers(k_eff, size=count):
                    pairs.append((minority[s], minority[order[s, pick]]))
    keep = np.sort(np.concatenate([minority, kept_major]))
    data = _assemble(table, keep, pairs, [], replicas, rng, 0.0)
    return ResampleOutcome(
        data, n, n_interpolated=len(pairs), n_replicated=len(replicas),
        n_dropped=len(majority) - len(kept_major), method_id="smoter", params=params,
    )


def relevance_partitions(y, w, threshold: float):
    """Maximal runs of target-sorted samples on one side of ``threshold``.

    Returns a list of ``(indices, is_relevant)`` in ascending target order.
    """
    order = np.argsort(np.asarray(y), kind="stable")
    high = np.asarray(w)[order] >= threshold
    cuts = np.flatnonzero(np.diff(high.astype(int))) + 1
    starts, stops = np.r_[0, cuts], np.r_[cuts, len(order)]
    return [(order[a:b], bool(high[a])) for a, b in zip(starts, stops)]


def smogn(d: Dataset, rel, threshold: float = 0.8, k: int = 5, delta_n: float = 0.01,
          undersample: bool = True, rng=None) -> ResampleOutcome:
    """SMOTER with a Gaussian-noise fallback.

    Each partition is resized towards ``N / n_partitions`` rows. A synthetic
    row interpolates its seed with a random one of the ``k`` nearest
    partition members when that neighbour lies closer than half the seed's
    median distance to the partition; otherwise the seed is copied with noise.
    """
    rng = _rng(rng)
    w = _values(rel, len(d), BOUNDED if isinstance(rel, RelevanceVector) else None)
    n = len(d)
    parts = relevance_partitions(d.y, w, threshold)
    if not any(high for _, high in parts):
        raise ValueError("no sample reaches the relevance threshold: empty minority set")
    target = n / len(parts)
    table = Table(d)
    keep, pairs, noisy, dropped = [], [], [], 0
    for idx, high in parts:
        size = len(idx)
        if not high:
            goal = int(round(target))
            if undersample and size > goal:
                kept = rng.choice(idx, goal, replace=False)
                dropped += size - goal
                keep.extend(kept)
            else:
                keep.extend(idx)
            continue
        keep.extend(idx)
        n_new = max(0, int(round(target)) - size)
        if n_new == 0:
            continue
        per_seed = _spread(n_new, size, rng)
        if size == 1:
            noisy.extend([idx[0]] * n_new)
            continue
        dist = table.distances(idx, idx, with_target=False)
        np.fill_diagonal(dist, np.inf)
        k_eff = min(k, size - 1)
        order = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
        others = np.where(np.isinf(dist), np.nan, dist)
        guard = np.nanmedian(others, axis=1) / 2.0
        for s, count in enumerate(per_seed):
            for pick in rng.integers(k_eff, size=count):
                nb = order[s, pick]
                if dist[s, nb] < guard[s]:
                    pairs.append((idx[s], idx[nb]))
                else:
                    noisy.append(idx[s])
    keep = np.sort(np.asarray(keep, dtype=int))
    data = _assemble(table, keep, pairs, noisy, [], rng, delta_n)
    return ResampleOutcome(
        data, n, n_interpolated=len(pairs), n_noise=len(noisy), n_dropped=dropped,
        method_id="smogn",
        params={"threshold": threshold, "k": k, "delta_n": delta_n, "undersample": undersample,
                "n_partitions": len(parts)},
    )


def _weighted_drop(weights, n_drop: int, rng, context: str):
    positive = np.flatnonzero(weights > 0)
    if n_drop > len(positive):
        warnings.warn(
            f"{context}: only {len(positive)} rows can be dropped, {n_drop} requested",
            RuntimeWarning, stacklevel=3,
        )
        n_drop = len(positive)
    if n_drop == 0:
        return np.array([], dtype=int)
    p = weights[positive] / weights[positive].sum()
    return rng.choice(positive, n_drop, replace=False, p=p)


def wercs(d: Dataset, rel, over_rate: float = 0.5, under_rate: float = 0.5, rng=None) -> ResampleOutcome:
    """Relevance-weighted replication and removal of existing rows."""
    rng = _rng(rng)
    w = _values(rel, len(d), BOUNDED if isinstance(rel, RelevanceVector) else None)
    if over_rate < 0 or under_rate < 0:
        raise ValueError("rates must be >= 0")
    if under_rate >= 1:
        raise ValueError("under_rate must be < 1: cannot drop every row")
    n = len(d)
    n_over = math.ceil(over_rate * n)
    n_under = math.ceil(under_rate * n)
    replicas = (
        rng.choice(n, n_over, replace=True, p=w / w.sum()) if n_over else np.array([], dtype=int)
    )
    drop = _weighted_drop(np.clip(1.0 - w, 0.0, None), n_under, rng, "wercs")
    keep = np.setdiff1d(np.arange(n), drop)
    table = Table(d)
    data = _assemble(table, keep, [], [], replicas, rng, 0.0)
    return ResampleOutcome(
        data, n, n_replicated=len(replicas), n_dropped=len(drop), method_id="wercs",
        params={"over_rate": over_rate, "under_rate": under_rate},
    )


def wsmoter(d: Dataset, rel, k: int = 10, oversampling_ratio: float = 3.0,
            epsilon: float = 1e-6, rng=None) -> ResampleOutcome:
    """Relevance-weighted seed selection with target-prefiltered neighbours.

    The result has ``round(oversampling_ratio * N)`` rows. For each seed the
    ``10 k`` samples closest in target value are searched for the ``k``
    HEOM-nearest (target plus features), one of which is the interpolation
    partner.
    """
    rng = _rng(rng)
    w = _values(rel, len(d))
    if k < 1:
        raise ValueError("k must be >= 1")
    if oversampling_ratio < 1:
        raise ValueError("oversampling_ratio must be >= 1")
    n = len(d)
    params = {"k": k, "oversampling_ratio": oversampling_ratio}
    n_new = int(round((oversampling_ratio - 1.0) * n))
    if n_new == 0 or n < 2:
        return ResampleOutcome(d, n, method_id="wsmoter", params=params)
    table = Table(d)
    p = np.maximum(w, epsilon)
    seeds = rng.choice(n, n_new, replace=True, p=p / p.sum())
    big_k = min(10 * k, n - 1)
    k_eff = min(k, big_k)
    neighbours = {}
    for s in np.unique(seeds):
        gap = np.abs(table.y - table.y[s])
        gap[s] = np.inf
        pool = np.argsort(gap, kind="stable")[:big_k]
        neighbours[s] = table.nearest(s, pool, k_eff, with_target=True)
    picks = rng.random(n_new)
    pairs = []
    for s, u in zip(seeds, picks):
        nbs = neighbours[s]
        pairs.append((s, nbs[int(u * len(nbs))]))
    data = _assemble(table, np.arange(n), pairs, [], [], rng, 0.0)
    return ResampleOutcome(data, n, n_interpolated=len(pairs), method_id="wsmoter", params=params)


def csmogn(d: Dataset, rel, n_bins: int = 10, delta_b: int = 1, n_sample: int | None = None,
           delta_n: float = 0.01, k: int = 5, rng=None) -> ResampleOutcome:
    """Continuous SMOGN.

    Seeds are drawn uniformly and accepted with probability ``w ** 2``. An
    accepted seed is interpolated with a random one of its ``k`` nearest
    rows among the bin-similar samples, or copied with Gaussian noise when
    no similar sample exists. Stops after exactly ``n_sample`` new rows.
    """
    rng = _rng(rng)
    w = _values(rel, len(d), BOUNDED if isinstance(rel, RelevanceVector) else None)
    n = len(d)
    if n_sample is None:
        n_sample = math.ceil(0.5 * n)
    params = {"n_bins": n_bins, "delta_b": delta_b, "n_sample": n_sample, "delta_n": delta_n, "k": k}
    table = Table(d)
    binned = discretize_dataset(d, n_bins, table)
    accept = w**2
    cache = {}
    pairs, noisy = [], []
    attempts, cap = 0, 1000 * n_sample
    while len(pairs) + len(noisy) < n_sample:
        if attempts >= cap:
            raise RuntimeError(
                f"csmogn made no progress: {len(pairs) + len(noisy)} of {n_sample} rows "
                f"after {attempts} draws"
            )
        attempts += 1
        s = int(rng.integers(n))
        if not accept[s] > rng.random():
            continue
        if s not in cache:
            similar = similar_samples(binned, s, delta_b)
            cache[s] = table.nearest(s, similar, k, with_target=True) if len(similar) else similar
        nns = cache[s]
        if len(nns) == 0:
            noisy.append(s)
        else:
            pairs.append((s, nns[int(rng.integers(len(nns)))]))
    data = _assemble(table, np.arange(n), pairs, noisy, [], rng, delta_n)
    params["attempts"] = attempts
    return ResampleOutcome(data, n, n_interpolated=len(pairs), n_noise=len(noisy),
                           method_id="csmogn", params=params)


def oversampling_budget(w, u):
    """Number of synthetic rows for relevance ``w`` given a uniform draw ``u``.

    The fractional part of ``w`` is the chance of rounding up, so ``w = 3``
    yields 2 and ``w = 1.5`` yields 1 half of the time.
    """
    w = np.asarray(w, dtype=float)
    r = np.where(np.mod(w, 1.0) > u, np.ceil(w) - 1, np.floor(w) - 1)
    return np.maximum(r, 0).astype(int)


def crbsmogn(d: Dataset, rel, n_bins: int = 10, delta_b: int = 1, delta_n: float = 0.01,
             rng=None) -> ResampleOutcome:
    """Continuous ratio-based SMOGN.

    Every sample with ratio relevance ``w > 1`` receives
    ``oversampling_budget(w)`` synthetic rows: one interpolation with each of
    its nearest bin-similar samples, and Gaussian-noise copies for whatever
    the similar set cannot cover.
    """
    rng = _rng(rng)
    w = _values(rel, len(d), RATIO if isinstance(rel, RelevanceVector) else None)
    n = len(d)
    params = {"n_bins": n_bins, "delta_b": delta_b, "delta_n": delta_n}
    budget = oversampling_budget(w, rng.random(n))
    if not budget.any():
        return ResampleOutcome(d, n, method_id="crbsmogn", params=params)
    table = Table(d)
    binned = discretize_dataset(d, n_bins, table)
    pairs, noisy = [], []
    for s in np.flatnonzero(budget):
        r = int(budget[s])
        similar = similar_samples(binned, s, delta_b)
        if len(similar) >= r:
            nns = table.nearest(s, similar, r, with_target=True)
        else:
            nns = similar
            noisy.extend([s] * (r - len(similar)))
        pairs.extend((s, j) for j in nns)
    data = _assemble(table, np.arange(n), pairs, noisy, [], rng, delta_n)
    return ResampleOutcome(data, n, n_interpolated=len(pairs), n_noise=len(noisy),
                           method_id="crbsmogn", params=params)


def undersample_ratio(d: Dataset, rel, rate: float = 0.5, rng=None,
                      n_reference: int | None = None) -> ResampleOutcome:
    """Drop ``ceil(rate * n_reference)`` rows, weighted by ``1 - min(w, 1)``.

    ``n_reference`` defaults to ``len(d)``; pass the pre-oversampling size
    when composing after an over-sampler. Rows with ``w >= 1`` are never
    dropped.
    """
    rng = _rng(rng)
    w = _values(rel, len(d))
    if not 0 <= rate < 1:
        raise ValueError("rate must lie in [0, 1)")
    n = len(d)
    n_drop = math.ceil(rate * (n if n_reference is None else n_reference))
    weights = np.clip(1.0 - np.minimum(w, 1.0), 0.0, None)
    drop = _weighted_drop(weights, n_drop, rng, "undersample_ratio")
    keep = np.setdiff1d(np.arange(n), drop)
    return ResampleOutcome(d.subset(keep), n, n_dropped=len(drop), method_id="undersample",
                           params={"rate": rate})


def chain(first: ResampleOutcome, second: ResampleOutcome) -> ResampleOutcome:
    """Fold an under-sampling pass into the outcome of the preceding over-sampler."""
    return ResampleOutcome(
        second.data,
        first.n_source,
        n_interpolated=first.n_interpolated + second.n_interpolated,
        n_noise=first.n_noise + second.n_noise,
        n_replicated=first.n_replicated + second.n_replicated,
        n_dropped=first.n_dropped + second.n_dropped,
        method_id=f"{first.method_id}+{second.method_id}",
        seed=first.seed,
        params={**first.params, **{f"under_{k}": v for k, v in second.params.items()}},
    )
