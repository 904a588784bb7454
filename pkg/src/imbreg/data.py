"""Tabular datasets with mixed numeric/categorical features.

A :class:`Dataset` keeps the target vector separate from the feature matrix
and carries a per-column kind tag, which the resamplers need for the
heterogeneous distance and for copying categorical cells verbatim.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

NUMERIC = "numeric"
CATEGORICAL = "categorical"

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "?"})


class DatasetError(ValueError):
    """Raised for malformed input data (missing file, bad cell, bad column)."""


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    kind: str = NUMERIC

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DatasetError(f"unknown column kind {self.kind!r} for {self.name!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Target vector plus an ``N x d`` feature matrix.

    ``X`` is float64 when every column is numeric and an object array
    otherwise (numeric cells as floats, categorical cells as strings).
    Arrays are copied and frozen on construction.
    """

    y: np.ndarray
    X: np.ndarray
    columns: tuple
    target_name: str = "y"

    def __post_init__(self):
        columns = tuple(
            c if isinstance(c, ColumnMeta) else ColumnMeta(*c) for c in self.columns
        )
        y = np.array(self.y, dtype=float).reshape(-1)
        all_numeric = all(c.kind == NUMERIC for c in columns)
        X = np.array(self.X, dtype=float if all_numeric else object)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DatasetError("feature matrix must be two-dimensional")
        n, d = X.shape
        if n < 1 or d < 1:
            raise DatasetError(f"dataset needs N >= 1 and d >= 1, got N={n}, d={d}")
        if len(y) != n:
            raise DatasetError(f"{len(y)} targets for {n} feature rows")
        if len(columns) != d:
            raise DatasetError(f"{len(columns)} column descriptors for {d} columns")
        if not np.all(np.isfinite(y)):
            raise DatasetError("targets must be finite")
        for j, col in enumerate(columns):
            if col.kind == NUMERIC:
                vals = X[:, j].astype(float)
                if not np.all(np.isfinite(vals)):
                    raise DatasetError(f"numeric column {col.name!r} has non-finite cells")
                if not all_numeric:
                    X[:, j] = vals
            elif any(isinstance(v, (float, int, np.number)) for v in X[:, j]):
                raise DatasetError(f"categorical column {col.name!r} holds numbers")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @classmethod
    def from_arrays(cls, X, y, feature_names=None, categorical=(), target_name="y"):
        X = np.asarray(X)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if feature_names is None:
            feature_names = [f"x{j}" for j in range(X.shape[1])]
        categorical = set(categorical)
        columns = tuple(
            ColumnMeta(name, CATEGORICAL if (name in categorical or j in categorical) else NUMERIC)
            for j, name in enumerate(feature_names)
        )
        return cls(y=y, X=X, columns=columns, target_name=target_name)

    def __len__(self):
        return len(self.y)

    @property
    def n_samples(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def numeric_idx(self) -> np.ndarray:
        return np.array([j for j, c in enumerate(self.columns) if c.kind == NUMERIC], dtype=int)

    @property
    def categorical_idx(self) -> np.ndarray:
        return np.array([j for j, c in enumerate(self.columns) if c.kind == CATEGORICAL], dtype=int)

    def numeric_block(self) -> np.ndarray:
        return self.X[:, self.numeric_idx].astype(float)

    def categorical_block(self) -> np.ndarray:
        return self.X[:, self.categorical_idx]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.y[idx], self.X[idx], self.columns, self.target_name)

    def with_targets(self, y) -> "Dataset":
        return Dataset(y, self.X, self.columns, self.target_name)

    def assemble(self, numeric: np.ndarray, categorical: np.ndarray, y: np.ndarray) -> "Dataset":
        """Build a dataset with this schema from separate numeric/categorical blocks."""
        n = len(y)
        dtype = float if len(self.categorical_idx) == 0 else object
        X = np.empty((n, self.n_features), dtype=dtype)
        if len(self.numeric_idx):
            X[:, self.numeric_idx] = numeric
        if len(self.categorical_idx):
            X[:, self.categorical_idx] = categorical
        return Dataset(y, X, self.columns, self.target_name)

    def concat(self, other: "Dataset") -> "Dataset":
        if other.columns != self.columns:
            raise DatasetError("cannot concatenate datasets with different schemas")
        return Dataset(
            np.concatenate([self.y, other.y]),
            np.concatenate([self.X, other.X]),
            self.columns,
            self.target_name,
        )

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.feature_names + [self.target_name])
            for row, target in zip(self.X, self.y):
                writer.writerow([_fmt(v) for v in row] + [_fmt(target)])


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def load_csv(path, target_column: str, categorical_columns: Iterable[str] = ()):
    """Read a header-first CSV file into a :class:`Dataset`.

    Rows with any missing cell are dropped. Returns ``(dataset, n_dropped)``.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    categorical_columns = set(categorical_columns)
    if target_column in categorical_columns:
        raise DatasetError(f"target column {target_column!r} cannot be categorical")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path} is empty") from None
        rows = list(reader)

    if target_column not in header:
        raise DatasetError(f"unknown target column {target_column!r}")
    unknown = categorical_columns - set(header)
    if unknown:
        raise DatasetError(f"unknown categorical columns {sorted(unknown)}")

    t = header.index(target_column)
    feat_idx = [j for j in range(len(header)) if j != t]
    columns = tuple(
        ColumnMeta(header[j], CATEGORICAL if header[j] in categorical_columns else NUMERIC)
        for j in feat_idx
    )

    targets, cells, dropped = [], [], 0
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        row = [c.strip() for c in row]
        if any(c.lower() in MISSING_TOKENS for c in row):
            dropped += 1
            continue
        targets.append(_parse_float(row[t], lineno, target_column))
        cells.append(
            [
                row[j] if col.kind == CATEGORICAL else _parse_float(row[j], lineno, col.name)
                for j, col in zip(feat_idx, columns)
            ]
        )
    if not targets:
        raise DatasetError(f"{path} has no complete rows")
    dtype = object if categorical_columns else float
    X = np.array(cells, dtype=dtype)
    return Dataset(np.array(targets), X, columns, target_column), dropped


def _parse_float(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(f"line {lineno}, column {column!r}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise DatasetError(f"line {lineno}, column {column!r}: non-finite value {text!r}")
    return value


@dataclass
class ScalingRecord:
    """Per-column ``(min, max)`` used by a min-max scaling, invertible."""

    feature_ranges: dict = field(default_factory=dict)
    target_range: tuple = (0.0, 1.0)
    constant: list = field(default_factory=list)

    def transform(self, d: Dataset) -> Dataset:
        return self._apply(d, inverse=False)

    def inverse_transform(self, d: Dataset) -> Dataset:
        return self._apply(d, inverse=True)

    def transform_target(self, y):
        return _affine(np.asarray(y, dtype=float), *self.target_range, inverse=False)

    def inverse_transform_target(self, y):
        return _affine(np.asarray(y, dtype=float), *self.target_range, inverse=True)

    def _apply(self, d: Dataset, inverse: bool) -> Dataset:
        X = d.X.copy()
        for j, col in enumerate(d.columns):
            if col.kind != NUMERIC or col.name not in self.feature_ranges:
                continue
            lo, hi = self.feature_ranges[col.name]
            X[:, j] = _affine(X[:, j].astype(float), lo, hi, inverse)
        y = _affine(d.y, *self.target_range, inverse)
        return Dataset(y, X, d.columns, d.target_name)

    def to_json(self) -> str:
        return json.dumps(
            {
                "feature_ranges": {k: list(v) for k, v in self.feature_ranges.items()},
                "target_range": list(self.target_range),
                "constant": list(self.constant),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ScalingRecord":
        raw = json.loads(text)
        return cls(
            feature_ranges={k: tuple(v) for k, v in raw["feature_ranges"].items()},
            target_range=tuple(raw["target_range"]),
            constant=list(raw["constant"]),
        )


def _affine(x, lo, hi, inverse):
    if hi <= lo:
        return x
    return x * (hi - lo) + lo if inverse else (x - lo) / (hi - lo)


class DatasetScaler(TransformerMixin, BaseEstimator):
    """Min-max scale numeric features and the target to [0, 1].

    Constant columns are left unscaled and listed in ``record_.constant``.
    """

    def fit(self, d: Dataset, y=None):
        ranges, constant = {}, []
        for j, col in enumerate(d.columns):
            if col.kind != NUMERIC:
                continue
            vals = d.X[:, j].astype(float)
            lo, hi = float(vals.min()), float(vals.max())
            ranges[col.name] = (lo, hi)
            if hi <= lo:
                constant.append(col.name)
        lo, hi = float(d.y.min()), float(d.y.max())
        if hi <= lo:
            constant.append(d.target_name)
        self.record_ = ScalingRecord(ranges, (lo, hi), constant)
        return self

    def transform(self, d: Dataset) -> Dataset:
        check_is_fitted(self, "record_")
        return self.record_.transform(d)

    def inverse_transform(self, d: Dataset) -> Dataset:
        check_is_fitted(self, "record_")
        return self.record_.inverse_transform(d)


def minmax_scale(d: Dataset):
    """Return ``(scaled_dataset, ScalingRecord)``."""
    scaler = DatasetScaler().fit(d)
    return scaler.transform(d), scaler.record_


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: Dataset
    test: Dataset
    train_idx: np.ndarray
    test_idx: np.ndarray
    train_fraction: float
    dissimilarity: float
    seed: int
    candidate_scores: tuple = ()


def select_split(
    d: Dataset,
    train_fraction: float = 0.7,
    candidates: int = 100,
    seed: int = 0,
) -> SplitPair:
    """Draw ``candidates`` random train/test splits and keep the most similar one.

    Similarity is the mean imbalance ratio of the test targets measured
    against the train-target KDE (1 means identical distributions).
    """
    from .evaluation import compute_mir
    from .density import fit_kde

    if candidates < 1:
        raise ValueError("candidates must be >= 1")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = d.n_samples
    if n < 10:
        raise DatasetError(f"need at least 10 samples to split, got {n}")
    n_train = int(round(train_fraction * n))
    if n_train < 2 or n - n_train < 2:
        raise DatasetError("too few samples to populate both subsets")

    rng = np.random.default_rng(seed)
    best, scores = None, []
    for _ in range(candidates):
        perm = rng.permutation(n)
        tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
        try:
            score = compute_mir(d.y[te], f_r=fit_kde(d.y[tr]))
        except ValueError:
            score = math.inf
        scores.append(score)
        if best is None or score < best[0]:
            best = (score, tr, te)
    score, tr, te = best
    return SplitPair(
        train=d.subset(tr),
        test=d.subset(te),
        train_idx=tr,
        test_idx=te,
        train_fraction=train_fraction,
        dissimilarity=float(score),
        seed=seed,
        candidate_scores=tuple(scores),
    )


def one_hot(d: Dataset, categories: dict | None = None):
    """Numeric design matrix with categorical columns one-hot encoded.

    ``categories`` maps column name to its ordered token list; pass the dict
    returned from the training set to encode a test set consistently.
    """
    if categories is None:
        categories = {
            d.columns[j].name: sorted(set(d.X[:, j])) for j in d.categorical_idx
        }
    blocks = []
    for j, col in enumerate(d.columns):
        if col.kind == NUMERIC:
            blocks.append(d.X[:, j].astype(float)[:, None])
        else:
            tokens = categories[col.name]
            blocks.append(
                np.stack([(d.X[:, j] == tok).astype(float) for tok in tokens], axis=1)
                if tokens
                else np.zeros((len(d), 0))
            )
    return np.hstack(blocks), categories

