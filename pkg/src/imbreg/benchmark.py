"""Repeated train/evaluate protocol comparing mitigation strategies.

For every dataset a single distribution-matched split is drawn. Each
repetition then trains a plain model and one model per strategy with fresh
seeds, and records the per-bin test errors, ordered from ``"very rare"`` to
``"very frequent"``. Repetition ``r`` of every strategy is paired with
repetition ``r`` of the baseline for the significance tests.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .data import Dataset, load_csv, minmax_scale, one_hot, select_split
from .datasets import generate_synthetic
from .ensemble import ensemble_predict
from .evaluation import (
    RANK_LABELS,
    bin_errors,
    bin_win_tally,
    compute_mir,
    equal_width_edges,
    normalize_bin_errors,
)
from .learner import KNNRegressor, MLPRegressor
from .relevance import make_relevance
from .resampling import make_resampler
from .strategies import (
    DEFAULT_RELEVANCE,
    LOSSES,
    SAMPLERS,
    ApplicabilityError,
    check_applicable,
    strategy_name,
)

BASELINE = "baseline"
_LOSS_OF = {"dense_loss": "dense", "prob_loss": "prob", "bmc": "bmc"}


@dataclass(frozen=True)
class DatasetSpec:
    """A generator id or a CSV file. ``name`` labels the dataset in reports."""

    name: str
    generator: str | None = None
    n: int = 1000
    noise: float = 0.0
    csv: str | None = None
    target: str | None = None
    categorical: tuple = ()

    def load(self, seed) -> Dataset:
        if self.csv is not None:
            d, _ = load_csv(self.csv, self.target, self.categorical)
            return d
        return generate_synthetic(self.generator or self.name, self.n, self.noise, seed)


@dataclass(frozen=True)
class StrategySpec:
    method: str
    relevance: str | None = None
    undersample: bool = False

    def __post_init__(self):
        if self.relevance is None and self.method != "bmc":
            object.__setattr__(self, "relevance", DEFAULT_RELEVANCE.get(self.method))

    @property
    def name(self) -> str:
        base = strategy_name(self.method, self.relevance)
        return base + "+under" if self.undersample else base


@dataclass
class BenchmarkConfig:
    datasets: list
    strategies: list = field(default_factory=list)
    repetitions: int = 50
    seed: int = 0
    model: str = "mlp"
    mlp: dict = field(default_factory=dict)
    knn_k: int = 5
    train_fraction: float = 0.7
    split_candidates: int = 100
    ensemble: bool = True
    alpha: float = 0.05
    n_jobs: int = 1

    def __post_init__(self):
        self.datasets = [
            d if isinstance(d, DatasetSpec) else DatasetSpec(**d) if isinstance(d, dict)
            else DatasetSpec(name=d, generator=d)
            for d in self.datasets
        ]
        self.strategies = [_strategy(s) for s in self.strategies]
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.model not in ("mlp", "knn"):
            raise ValueError("model must be 'mlp' or 'knn'")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError("dataset names must be unique")

    def validate(self):
        """Reject pairings outside the applicability grid before any training."""
        for s in self.strategies:
            check_applicable(s.method, s.relevance, self.model)
            if s.undersample and s.method in ("smoter", "wsmoter"):
                raise ApplicabilityError(f"{s.method} has no under-sampling variant")
            if s.undersample and s.method in LOSSES:
                raise ApplicabilityError(f"{s.method} is a loss; nothing to under-sample")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["datasets"] = [asdict(d) for d in self.datasets]
        out["strategies"] = [asdict(s) | {"name": s.name} for s in self.strategies]
        return out


def _strategy(s) -> StrategySpec:
    if isinstance(s, StrategySpec):
        return s
    if isinstance(s, dict):
        # the derived name is written by to_dict; ignore it on the way back
        return StrategySpec(**{k: v for k, v in s.items() if k != "name"})
    if isinstance(s, (tuple, list)):
        return StrategySpec(*s)
    text = str(s)
    under = text.endswith("+under")
    text = text[: -len("+under")] if under else text
    method, _, rel = text.partition(":")
    return StrategySpec(method, rel or None, under)


def _seed(master, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master, spawn_key=tuple(int(k) for k in key))


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


@dataclass
class _Prepared:
    name: str
    train: Dataset
    test: Dataset
    edges: np.ndarray
    categories: dict
    dissimilarity: float
    mir_train: float


def prepare_dataset(spec: DatasetSpec, cfg: BenchmarkConfig, index: int) -> _Prepared:
    d = spec.load(_int_seed(_seed(cfg.seed, index, 0, 0, 0)))
    scaled, _ = minmax_scale(d)
    split = select_split(scaled, cfg.train_fraction, cfg.split_candidates,
                         seed=_int_seed(_seed(cfg.seed, index, 0, 0, 1)))
    _, categories = one_hot(split.train)
    return _Prepared(
        name=spec.name,
        train=split.train,
        test=split.test,
        edges=equal_width_edges(scaled.y),
        categories=categories,
        dissimilarity=split.dissimilarity,
        mir_train=compute_mir(split.train.y),
    )


def _model(cfg: BenchmarkConfig, loss: str, seed: int):
    if cfg.model == "knn":
        return KNNRegressor(cfg.knn_k)
    params = {"hidden_layers": 2, "hidden_units": 128, "max_epochs": 1000, "patience": 20}
    params.update(cfg.mlp)
    return MLPRegressor(loss=loss, random_state=seed, **params)


def _fit_predict(cfg, prep: _Prepared, train: Dataset, loss: str, weights, seed: int):
    model = _model(cfg, loss, seed)
    if cfg.model == "knn":
        model.fit(train)
        return model.predict(prep.test), 0
    X_train, _ = one_hot(train, prep.categories)
    X_test, _ = one_hot(prep.test, prep.categories)
    model.fit(X_train, train.y, sample_weight=weights)
    return model.predict(X_test), len(model.training_log_)


def run_cell(cfg: BenchmarkConfig, prep: _Prepared, d_index: int, rep: int, s_index: int) -> dict:
    """One training run. ``s_index = -1`` is the baseline."""
    # every model of one repetition starts from the same initial weights, so
    # paired differences reflect the strategy rather than the initialisation
    model_seed = _int_seed(_seed(cfg.seed, d_index, rep + 1, 0, 0))
    sample_seed = _int_seed(_seed(cfg.seed, d_index, rep + 1, s_index + 1, 1))
    record = {"dataset": prep.name, "repetition": rep, "strategy": BASELINE}
    started = time.perf_counter()
    try:
        if s_index < 0:
            pred, record["epochs"] = _fit_predict(cfg, prep, prep.train, "mse", None, model_seed)
        else:
            s = cfg.strategies[s_index]
            record["strategy"] = s.name
            if s.method in SAMPLERS:
                params = {"undersample": True} if s.undersample else {}
                sampler = make_resampler(s.method, relevance=s.relevance, random_state=sample_seed,
                                         **params)
                train = sampler.fit_resample(prep.train)
                record["counts"] = sampler.outcome_.counts()
                record["mir_after"] = compute_mir(train.y)
                pred, record["epochs"] = _fit_predict(cfg, prep, train, "mse", None, model_seed)
            else:
                weights = None
                if s.relevance is not None:
                    weights = make_relevance(s.relevance).fit(prep.train.y).relevance_.values
                pred, record["epochs"] = _fit_predict(cfg, prep, prep.train, _LOSS_OF[s.method], weights, model_seed)
        if not np.all(np.isfinite(pred)):
            raise FloatingPointError("non-finite predictions")
        record["status"] = "ok"
        record["predictions"] = pred
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        record["status"] = "failed"
        record["error"] = f"{type(exc).__name__}: {exc}"
    record["seconds"] = time.perf_counter() - started
    return record


def _report_errors(prep: _Prepared, pred) -> list:
    rep = bin_errors(prep.test.y, pred, prep.edges, reference=prep.train.y)
    return rep.by_rank().tolist()


@dataclass
class BenchmarkReport:
    config: dict
    datasets: dict
    runs: list
    errors: dict
    normalized: dict
    tallies: dict
    version: str = __version__

    def mean_errors(self, dataset: str, strategy: str) -> np.ndarray:
        """Mean per-bin error over repetitions, NaN-aware; index 0 is very rare."""
        return _nanmean_rows(self.errors[dataset][strategy])

    def strategies(self) -> list:
        names = []
        for per_ds in self.errors.values():
            names.extend(n for n in per_ds if n not in names)
        return names

    def to_dict(self) -> dict:
        return _clean(
            {
                "version": self.version,
                "config": self.config,
                "bins": list(RANK_LABELS),
                "datasets": self.datasets,
                "runs": self.runs,
                "errors": self.errors,
                "normalized": self.normalized,
                "tallies": self.tallies,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False)

    def write_bin_errors_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset", "strategy", "repetition", "bin", "error", "normalized_mean_error"])
            for ds, per_ds in self.errors.items():
                for strat, reps in per_ds.items():
                    norm = self.normalized.get(ds, {}).get(strat)
                    for r, row in enumerate(reps):
                        for b, label in enumerate(RANK_LABELS):
                            nv = "" if norm is None or norm[b] is None else repr(float(norm[b]))
                            ev = row[b]
                            w.writerow([ds, strat, r, label,
                                        "" if ev is None or math.isnan(ev) else repr(float(ev)), nv])

    def write_tally_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["strategy", "bin", "wins", "significant_wins", "losses",
                        "significant_losses", "n_datasets"])
            for strat, rows in self.tallies.items():
                for row in rows:
                    w.writerow([strat, row["bin"], row["wins"], row["significant_wins"],
                                row["losses"], row["significant_losses"], row["n_datasets"]])


def _nanmean_rows(rows) -> np.ndarray:
    """Column means ignoring NaN; all-NaN columns stay NaN without a warning."""
    arr = np.array(rows, dtype=float).reshape(-1, len(RANK_LABELS))
    present = ~np.isnan(arr)
    n = present.sum(axis=0)
    total = np.where(present, arr, 0.0).sum(axis=0)
    return np.where(n > 0, total / np.maximum(n, 1), np.nan)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(obj) else float(obj)
    return obj


def run_benchmark(cfg: BenchmarkConfig) -> BenchmarkReport:
    """Train and evaluate every (dataset, strategy, repetition) cell.

    Failed runs are kept in the report with their error message; they leave
    NaN rows in the error tables and drop out of the significance tests.
    """
    cfg.validate()
    preps = [prepare_dataset(spec, cfg, i) for i, spec in enumerate(cfg.datasets)]
    cells = [
        (i, r, s)
        for i in range(len(preps))
        for r in range(cfg.repetitions)
        for s in range(-1, len(cfg.strategies))
    ]
    results = Parallel(n_jobs=cfg.n_jobs)(
        delayed(run_cell)(cfg, preps[i], i, r, s) for i, r, s in cells
    )

    nan_row = [math.nan] * len(RANK_LABELS)
    names = [BASELINE] + [s.name for s in cfg.strategies]
    if cfg.ensemble:
        names += [f"ensemble({s.name})" for s in cfg.strategies]
    errors = {p.name: {n: [None] * cfg.repetitions for n in names} for p in preps}
    preds = {}
    runs, mir_after = [], {}
    for (i, r, _), rec in zip(cells, results):
        prep = preps[i]
        pred = rec.pop("predictions", None)
        preds[(prep.name, rec["strategy"], r)] = pred
        errors[prep.name][rec["strategy"]][r] = (
            _report_errors(prep, pred) if pred is not None else nan_row
        )
        if "mir_after" in rec:
            mir_after.setdefault(prep.name, {}).setdefault(rec["strategy"], []).append(rec["mir_after"])
        runs.append(rec)
    if cfg.ensemble:
        for prep in preps:
            for s in cfg.strategies:
                for r in range(cfg.repetitions):
                    a = preds.get((prep.name, s.name, r))
                    b = preds.get((prep.name, BASELINE, r))
                    row = nan_row
                    if a is not None and b is not None:
                        row = _report_errors(prep, ensemble_predict(a, b, mode="mean"))
                    errors[prep.name][f"ensemble({s.name})"][r] = row

    normalized = {}
    for prep in preps:
        means = {n: _nanmean_rows(reps) for n, reps in errors[prep.name].items()}
        normalized[prep.name] = {n: v.tolist() for n, v in normalize_bin_errors(means).items()}

    tallies = {}
    for n in names[1:]:
        tally = bin_win_tally(
            {p.name: errors[p.name][n] for p in preps},
            {p.name: errors[p.name][BASELINE] for p in preps},
            cfg.alpha,
        )
        tallies[n] = tally.to_rows()

    datasets = {
        p.name: {
            "n_train": len(p.train),
            "n_test": len(p.test),
            "split_dissimilarity": p.dissimilarity,
            "mir_before": p.mir_train,
            "mir_after": {k: float(np.mean(v)) for k, v in mir_after.get(p.name, {}).items()},
            "bin_edges": p.edges.tolist(),
        }
        for p in preps
    }
    for rec in runs:
        rec.pop("seconds", None)
    return BenchmarkReport(cfg.to_dict(), datasets, runs, errors, normalized, tallies)
