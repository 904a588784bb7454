"""Imbalance measure, per-bin error reports and significance testing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import DensityModel, KDEDensity, bin_index
from .relevance import domain_density

RANK_LABELS = ("very rare", "rare", "medium", "frequent", "very frequent")
N_BINS = len(RANK_LABELS)
# exact null distribution up to this many nonzero differences
EXACT_LIMIT = 25


def compute_mir(targets, f_r: DensityModel | None = None, bandwidth="silverman") -> float:
    """Mean imbalance ratio of ``targets`` against the domain density ``f_r``.

    ``mean(max(L, 1 / L))`` with ``L = f_x(y) / f_r(y)`` and ``f_x`` the KDE
    of the targets. ``f_r`` defaults to uniform over the target range and is
    fitted on ``targets`` when not fitted yet.
    1 means the sample follows ``f_r`` exactly.
    """
    y = np.asarray(targets, dtype=float).reshape(-1)
    f_x = KDEDensity(bandwidth).fit(y)
    f_r = domain_density(f_r, y)
    px, pr = f_x.evaluate(y), f_r.evaluate(y)
    if np.any(pr <= 0) or np.any(px <= 0):
        raise ValueError("density vanishes at a target: imbalance ratio is unbounded")
    ratio = px / pr
    return float(np.mean(np.maximum(ratio, 1.0 / ratio)))


def equal_width_edges(values, n_bins: int = N_BINS) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        raise ValueError("constant targets: bins are undefined")
    return np.linspace(lo, hi, n_bins + 1)


@dataclass(frozen=True, eq=False)
class BinReport:
    """Squared error per equal-width target bin.

    ``rank_labels[b]`` names bin ``b`` by how populated it is in the
    reference sample: the least populated bin is ``"very rare"``. ``errors``
    holds NaN for bins without test samples.
    """

    edges: np.ndarray
    counts: np.ndarray
    reference_counts: np.ndarray
    rank_labels: tuple
    errors: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")

    def by_rank(self) -> np.ndarray:
        """Errors reordered from ``"very rare"`` to ``"very frequent"``."""
        order = [self.rank_labels.index(label) for label in RANK_LABELS]
        return self.errors[order]

    def error_of(self, label: str) -> float:
        return float(self.errors[self.rank_labels.index(label)])

    def to_dict(self) -> dict:
        return {
            "edges": self.edges.tolist(),
            "counts": self.counts.tolist(),
            "reference_counts": self.reference_counts.tolist(),
            "rank_labels": list(self.rank_labels),
            "errors": [None if math.isnan(e) else float(e) for e in self.errors],
        }


def rank_labels(counts) -> tuple:
    """Labels by ascending count; equal counts go to the lower bin index first."""
    order = np.argsort(np.asarray(counts), kind="stable")
    labels = [None] * len(order)
    for rank, b in enumerate(order):
        labels[b] = RANK_LABELS[rank]
    return tuple(labels)


def bin_errors(y_true, y_pred, edges=None, reference=None) -> BinReport:
    """Per-bin mean squared error.

    Parameters
    ----------
    y_true, y_pred : array_like
    edges : array_like, optional
        Six increasing edges. Defaults to equal-width bins over ``y_true``.
        Values outside are clipped into the first or last bin.
    reference : array_like, optional
        Targets whose bin counts decide the rank labels (the training
        targets in the benchmark). Defaults to ``y_true``.
    """
    y_true = np.asarray(y_true, dtype=float).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=float).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    edges = equal_width_edges(y_true) if edges is None else np.asarray(edges, dtype=float)
    if len(edges) != N_BINS + 1:
        raise ValueError(f"expected {N_BINS + 1} edges")
    lo, hi = edges[0], edges[-1]
    idx = bin_index(y_true, lo, hi, N_BINS)
    counts = np.bincount(idx, minlength=N_BINS)
    sq = (y_pred - y_true) ** 2
    sums = np.bincount(idx, weights=sq, minlength=N_BINS)
    with np.errstate(invalid="ignore", divide="ignore"):
        errors = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    ref = y_true if reference is None else np.asarray(reference, dtype=float)
    ref_counts = np.bincount(bin_index(ref, lo, hi, N_BINS), minlength=N_BINS)
    return BinReport(edges, counts, ref_counts, rank_labels(ref_counts), errors)


def normalize_bin_errors(reports: dict) -> dict:
    """Divide each strategy's bin error by the mean over strategies for that bin.

    ``reports`` maps a strategy name to a :class:`BinReport` or an error
    array. NaN entries (empty bins) stay NaN and are left out of the mean.
    """
    names = list(reports)
    mat = np.array(
        [r.errors if isinstance(r, BinReport) else np.asarray(r, dtype=float) for r in reports.values()],
        dtype=float,
    )
    with np.errstate(invalid="ignore"):
        present = ~np.isnan(mat)
        n = present.sum(axis=0)
        mean = np.where(n > 0, np.nansum(mat, axis=0) / np.maximum(n, 1), np.nan)
        out = np.where(mean > 0, mat / np.where(mean > 0, mean, 1.0), np.where(present, 1.0, np.nan))
    return {name: out[i] for i, name in enumerate(names)}


@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value outside [0, 1]")


def _signed_ranks(a, b):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0]
    absd = np.abs(d)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(len(d))
    sorted_abs = absd[order]
    i = 0
    ties = []
    while i < len(d):
        j = i
        while j + 1 < len(d) and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        if j > i:
            ties.append(j - i + 1)
        i = j + 1
    return d, ranks, ties


def _exact_null(doubled_ranks) -> np.ndarray:
    """Counts of sign patterns by doubled positive rank sum."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: len(counts) - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(a, b, method: str = "auto") -> SignificanceResult:
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are dropped and tied magnitudes get midranks. The exact
    null distribution is enumerated when at most 25 differences remain;
    otherwise a normal approximation with tie-corrected variance and a 0.5
    continuity correction is used.

    Returns the smaller of the positive and negative rank sums as statistic.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    if method not in ("auto", "exact", "approx"):
        raise ValueError("method must be 'auto', 'exact' or 'approx'")
    d, ranks, ties = _signed_ranks(a, b)
    n = len(d)
    if n == 0:
        return SignificanceResult(0.0, 1.0, 0, "exact")
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)
    if method == "exact" or (method == "auto" and n <= EXACT_LIMIT):
        # midranks are half-integers, so doubled ranks are exact integers
        doubled = np.rint(2 * ranks).astype(int)
        counts = _exact_null(doubled)
        probs = counts / counts.sum()
        obs = int(round(2 * w_plus))
        lower = probs[: obs + 1].sum()
        upper = probs[obs:].sum()
        p = min(1.0, 2.0 * min(lower, upper))
        return SignificanceResult(stat, float(p), n, "exact")
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - sum(t**3 - t for t in ties) / 48.0
    if var <= 0:
        return SignificanceResult(stat, 1.0, n, "normal-approximation")
    z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(var)
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return SignificanceResult(stat, float(p), n, "normal-approximation")


@dataclass
class BinWinTally:
    """Per-rank counts over datasets; index 0 is ``"very rare"``."""

    wins: np.ndarray
    significant_wins: np.ndarray
    losses: np.ndarray
    significant_losses: np.ndarray
    n_datasets: int
    alpha: float
    details: list = field(default_factory=list)

    def to_rows(self):
        return [
            {
                "bin": label,
                "wins": int(self.wins[i]),
                "significant_wins": int(self.significant_wins[i]),
                "losses": int(self.losses[i]),
                "significant_losses": int(self.significant_losses[i]),
                "n_datasets": self.n_datasets,
            }
            for i, label in enumerate(RANK_LABELS)
        ]


def bin_win_tally(strategy_errors, baseline_errors, alpha: float = 0.05) -> BinWinTally:
    """Count datasets where a strategy beats the baseline, bin by bin.

    Parameters
    ----------
    strategy_errors, baseline_errors : sequence or dict
        One ``(repetitions, n_bins)`` array per dataset, repetitions paired
        by position. Dicts are matched on their keys.
    alpha : float
        Significance level of the Wilcoxon test.

    A dataset counts as a win in a bin when the strategy's mean error is
    lower than the baseline's and as a loss when higher; the win or loss is
    significant when the paired test gives ``p < alpha``.
    """
    if isinstance(strategy_errors, dict):
        keys = list(strategy_errors)
        strategy_errors = [strategy_errors[k] for k in keys]
        baseline_errors = [baseline_errors[k] for k in keys]
    else:
        keys = list(range(len(strategy_errors)))
    if len(strategy_errors) != len(baseline_errors):
        raise ValueError("strategy and baseline cover different datasets")
    n_bins = None
    wins = sig_wins = losses = sig_losses = None
    details = []
    for key, s, b in zip(keys, strategy_errors, baseline_errors):
        s, b = np.atleast_2d(np.asarray(s, dtype=float)), np.atleast_2d(np.asarray(b, dtype=float))
        if s.shape != b.shape:
            raise ValueError(f"dataset {key!r}: shapes {s.shape} and {b.shape} differ")
        if n_bins is None:
            n_bins = s.shape[1]
            wins, sig_wins, losses, sig_losses = (np.zeros(n_bins, dtype=int) for _ in range(4))
        for j in range(n_bins):
            ok = ~(np.isnan(s[:, j]) | np.isnan(b[:, j]))
            if not ok.any():
                continue
            ms, mb = s[ok, j].mean(), b[ok, j].mean()
            test = wilcoxon_signed_rank(s[ok, j], b[ok, j])
            significant = test.p_value < alpha
            if ms < mb:
                wins[j] += 1
                sig_wins[j] += significant
            elif ms > mb:
                losses[j] += 1
                sig_losses[j] += significant
            details.append(
                {"dataset": key, "bin": j, "strategy_mean": float(ms), "baseline_mean": float(mb),
                 "p_value": test.p_value}
            )
    if n_bins is None:
        wins = sig_wins = losses = sig_losses = np.zeros(N_BINS, dtype=int)
    return BinWinTally(wins, sig_wins, losses, sig_losses, len(keys), alpha, details)
