import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imbreg.data import (
    CATEGORICAL,
    Dataset,
    DatasetError,
    ScalingRecord,
    load_csv,
    minmax_scale,
    one_hot,
    select_split,
)
from imbreg.datasets import GENERATORS, generate_synthetic, nernst, stribeck
from imbreg.density import fit_kde
from imbreg.evaluation import compute_mir


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_csv_passthrough(tmp_path):
    p = _write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
    d, dropped = load_csv(p, "y")
    assert (len(d), d.n_features, dropped) == (3, 2, 0)
    np.testing.assert_array_equal(d.y, [3, 6, 9])
    assert d.feature_names == ["a", "b"]


def test_load_csv_drops_incomplete_rows(tmp_path):
    p = _write(tmp_path, "a,c,y\n1,u,3\n,v,6\n7,w,NA\n2,u,1\n")
    d, dropped = load_csv(p, "y", categorical_columns=["c"])
    assert (len(d), dropped) == (2, 2)
    assert d.columns[1].kind == CATEGORICAL
    assert d.X[:, 1].tolist() == ["u", "u"]


@pytest.mark.parametrize(
    "text, kwargs, match",
    [
        ("a,y\n1,2\n", {"target_column": "z"}, "unknown target"),
        ("a,y\n1,2\n", {"target_column": "y", "categorical_columns": ["y"]}, "categorical"),
        ("a,y\n1,2\nfoo,3\n", {"target_column": "y"}, "line 3, column 'a'"),
        ("a,y\n1,2,3\n", {"target_column": "y"}, "expected 2 cells"),
        ("a,y\n1,inf\n", {"target_column": "y"}, "non-finite"),
    ],
)
def test_load_csv_errors(tmp_path, text, kwargs, match):
    with pytest.raises(DatasetError, match=match):
        load_csv(_write(tmp_path, text), **kwargs)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="no such file"):
        load_csv(tmp_path / "absent.csv", "y")


def test_csv_round_trip(tmp_path, mixed):
    path = tmp_path / "rt.csv"
    mixed.to_csv(path)
    back, _ = load_csv(path, "y", ["colour"])
    np.testing.assert_array_equal(back.y, mixed.y)
    np.testing.assert_array_equal(back.X[:, 0].astype(float), mixed.X[:, 0].astype(float))
    assert back.X[:, 2].tolist() == mixed.X[:, 2].tolist()


def test_dataset_invariants():
    with pytest.raises(DatasetError):
        Dataset.from_arrays(np.zeros((3, 1)), [1.0, 2.0])
    with pytest.raises(DatasetError):
        Dataset.from_arrays(np.zeros((2, 1)), [1.0, np.nan])
    with pytest.raises(DatasetError):
        Dataset.from_arrays(np.array([[np.inf], [0.0]]), [1.0, 2.0])
    with pytest.raises(DatasetError, match="N >= 1"):
        Dataset.from_arrays(np.zeros((0, 2)), [])
    d = Dataset.from_arrays(np.zeros((2, 1)), [1.0, 2.0])
    with pytest.raises(ValueError):
        d.y[0] = 3.0


def test_minmax_scale_examples():
    d = Dataset.from_arrays(np.array([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]), [1.0, 2.0, 3.0])
    s, rec = minmax_scale(d)
    np.testing.assert_array_equal(s.X[:, 0], [0, 0.5, 1])
    np.testing.assert_array_equal(s.X[:, 1], [5, 5, 5])
    assert rec.constant == ["x1"]
    np.testing.assert_array_equal(s.y, [0, 0.5, 1])


def test_scaling_record_json_round_trip(mixed):
    _, rec = minmax_scale(mixed)
    again = ScalingRecord.from_json(rec.to_json())
    assert again == rec
    assert json.loads(rec.to_json())["target_range"] == list(rec.target_range)


@settings(max_examples=30, deadline=None)
@given(
    st.integers(2, 30).flatmap(
        lambda n: st.tuples(
            st.lists(st.floats(-1e6, 1e6), min_size=n, max_size=n),
            st.lists(st.floats(-1e6, 1e6), min_size=n, max_size=n),
        )
    )
)
def test_minmax_round_trip(cols):
    x, y = map(np.asarray, cols)
    d = Dataset.from_arrays(x[:, None], y)
    s, rec = minmax_scale(d)
    if np.ptp(x) > 0:
        assert s.X.min() >= 0 and s.X.max() <= 1
    back = rec.inverse_transform(s)
    scale = max(1.0, np.abs(x).max(), np.abs(y).max())
    np.testing.assert_allclose(back.X[:, 0], x, atol=1e-12 * scale)
    np.testing.assert_allclose(back.y, y, atol=1e-12 * scale)


def test_minmax_leaves_categoricals(mixed):
    s, _ = minmax_scale(mixed)
    assert s.X[:, 2].tolist() == mixed.X[:, 2].tolist()


def test_one_hot_consistent_categories(mixed):
    X, cats = one_hot(mixed)
    assert X.shape == (len(mixed), 2 + 3)
    np.testing.assert_array_equal(X[:, 2:].sum(axis=1), 1.0)
    sub = mixed.subset([0])
    X1, _ = one_hot(sub, cats)
    np.testing.assert_array_equal(X1, X[:1])


def test_select_split_single_candidate():
    d = generate_synthetic("arctan", n=50, seed=1)
    sp = select_split(d, candidates=1, seed=3)
    assert len(sp.train) == 35 and len(sp.test) == 15
    assert not set(sp.train_idx) & set(sp.test_idx)
    assert sp.dissimilarity == sp.candidate_scores[0]


def test_select_split_picks_minimum_and_is_deterministic():
    d = generate_synthetic("nernst", n=200, seed=2)
    a = select_split(d, candidates=100, seed=9)
    b = select_split(d, candidates=100, seed=9)
    assert a.dissimilarity == min(a.candidate_scores)
    np.testing.assert_array_equal(a.train_idx, b.train_idx)
    assert len(a.candidate_scores) == 100
    ref = compute_mir(d.y[a.test_idx], f_r=fit_kde(d.y[a.train_idx]))
    assert a.dissimilarity == pytest.approx(ref)


def test_select_split_duplicated_halves():
    half = np.random.default_rng(0).normal(size=50)
    d = Dataset.from_arrays(np.r_[half, half][:, None], np.r_[half, half])
    sp = select_split(d, train_fraction=0.5, candidates=50, seed=0)
    assert 1.0 <= sp.dissimilarity < 1.3


def test_select_split_errors():
    d = generate_synthetic("arctan", n=9)
    with pytest.raises(DatasetError):
        select_split(d)
    d = generate_synthetic("arctan", n=20)
    with pytest.raises(ValueError):
        select_split(d, train_fraction=1.0)
    with pytest.raises(ValueError):
        select_split(d, candidates=0)


def test_generator_examples():
    assert nernst(8.3, 300.0, 1.0, 96485.0, 0.4, 0.4) == 0.0
    assert stribeck(0.2, 0.3, 10.0, 0.0, 0.5, 1.0) == pytest.approx(0.2 * 10 + 0.5 * 10)
    d = generate_synthetic("euclidean", n=300, seed=4)
    np.testing.assert_allclose(d.y, np.hypot(d.X[:, 0], d.X[:, 1]))
    d = generate_synthetic("arctan", n=300, seed=4)
    np.testing.assert_allclose(d.y, np.arctan(d.X[:, 0]))
    assert np.arctan(0.0) == 0.0


def test_friedman_targets_follow_published_formulas():
    x = generate_synthetic("friedman1", n=100, seed=5).X
    y = generate_synthetic("friedman1", n=100, seed=5).y
    ref = (10 * np.sin(np.pi * x[:, 0] * x[:, 1]) + 20 * (x[:, 2] - 0.5) ** 2
           + 10 * x[:, 3] + 5 * x[:, 4])
    np.testing.assert_allclose(y, ref)
    d = generate_synthetic("friedman2", n=100, seed=5)
    x = d.X
    np.testing.assert_allclose(d.y, np.sqrt(x[:, 0] ** 2 + (x[:, 1] * x[:, 2] - 1 / (x[:, 1] * x[:, 3])) ** 2))
    d = generate_synthetic("friedman3", n=100, seed=5)
    x = d.X
    np.testing.assert_allclose(d.y, np.arctan((x[:, 1] * x[:, 2] - 1 / (x[:, 1] * x[:, 3])) / x[:, 0]))


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_generators_are_pure_functions_of_seed(name):
    a = generate_synthetic(name, n=40, seed=11)
    b = generate_synthetic(name, n=40, seed=11)
    c = generate_synthetic(name, n=40, seed=12)
    assert len(a) == 40
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.X, b.X)
    assert not np.array_equal(a.y, c.y)


def test_feature_noise_level():
    clean = generate_synthetic("euclidean", n=20000, seed=6)
    noisy = generate_synthetic("euclidean", n=20000, noise_sd_fraction=0.03, seed=6)
    np.testing.assert_array_equal(clean.y, noisy.y)
    diff = noisy.X - clean.X
    np.testing.assert_allclose(diff.std(axis=0), 0.03 * clean.X.std(axis=0), rtol=0.03)


def test_unknown_generator():
    with pytest.raises(DatasetError, match="unknown generator"):
        generate_synthetic("nope")
