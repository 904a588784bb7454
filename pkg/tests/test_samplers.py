import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imbreg.data import Dataset
from imbreg.datasets import generate_synthetic
from imbreg.evaluation import compute_mir
from imbreg.relevance import BOUNDED, RATIO, RelevanceVector, make_relevance
from imbreg.resampling import (
    CRBSMOGN,
    CSMOGN,
    RESAMPLERS,
    SMOGN,
    WERCS,
    ResampleOutcome,
    crbsmogn,
    csmogn,
    make_resampler,
    oversampling_budget,
    relevance_partitions,
    smogn,
    smoter,
    undersample_ratio,
    wercs,
    wsmoter,
)
from imbreg.resampling import samplers
from imbreg.strategies import ApplicabilityError

from .conftest import make_mixed


@pytest.fixture
def recorder(monkeypatch):
    """Capture the interpolation pairs and noise seeds passed to row assembly."""
    seen = {"pairs": [], "noise": []}
    original = samplers._assemble

    def spy(table, keep, pairs, noise_seeds, replicas, rng, delta_n):
        seen["pairs"].extend(pairs)
        seen["noise"].extend(int(s) for s in noise_seeds)
        return original(table, keep, pairs, noise_seeds, replicas, rng, delta_n)

    monkeypatch.setattr(samplers, "_assemble", spy)
    return seen


def line(n, y=None):
    x = np.arange(n, dtype=float)
    return Dataset.from_arrays(x[:, None], x if y is None else y)


def test_outcome_accounting_is_enforced():
    d = line(5)
    ResampleOutcome(d, 4, n_interpolated=2, n_dropped=1)
    with pytest.raises(AssertionError):
        ResampleOutcome(d, 5, n_noise=1)


# --- SMOTER -----------------------------------------------------------------

def test_smoter_balanced_size(skewed):
    w = make_relevance("pchip").fit_transform(skewed.y)
    out = smoter(skewed, w, rng=0)
    assert len(out.data) == len(skewed)
    minority = np.sum(w >= 0.8)
    assert out.n_interpolated == len(skewed) - len(skewed) // 2 - minority
    assert out.n_dropped == np.sum(w < 0.8) - len(skewed) // 2


def test_smoter_all_relevant_is_identity():
    d = line(10)
    out = smoter(d, np.ones(10), rng=0)
    assert out.data is d and out.n_dropped == 0


def test_smoter_single_minority_sample_is_replicated():
    w = np.r_[np.zeros(9), 1.0]
    out = smoter(line(10), w, rng=0)
    assert (out.n_replicated, out.n_interpolated) == (4, 0)
    assert np.sum(out.data.y == 9.0) == 5


def test_smoter_empty_minority():
    with pytest.raises(ValueError, match="empty minority"):
        smoter(line(5), np.zeros(5))


def test_smoter_rejects_ratio_relevance():
    rel = RelevanceVector(np.ones(5), RATIO, "density_ratio")
    with pytest.raises(ApplicabilityError):
        smoter(line(5), rel)


# --- SMOGN ------------------------------------------------------------------

def _run_lengths(y, w, t):
    """Reference partitioning by walking the sorted targets one by one."""
    order = sorted(range(len(y)), key=lambda i: (y[i], i))
    parts, cur = [], [order[0]]
    for a, b in zip(order, order[1:]):
        if (w[a] >= t) == (w[b] >= t):
            cur.append(b)
        else:
            parts.append(cur)
            cur = [b]
    parts.append(cur)
    return parts


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0, 1)), min_size=1, max_size=60))
def test_relevance_partitions_match_run_lengths(rows):
    y = np.array([r[0] for r in rows])
    w = np.array([r[1] for r in rows])
    got = [p.tolist() for p, _ in relevance_partitions(y, w, 0.8)]
    assert got == _run_lengths(y, w, 0.8)


def test_bimodal_relevance_gives_several_partitions():
    y = np.linspace(-3, 3, 101)
    w = np.abs(y) / 3
    parts = relevance_partitions(y, w, 0.8)
    assert sum(high for _, high in parts) == 2 and len(parts) == 3


def test_smogn_equidistant_neighbours_use_noise(recorder):
    # relevant rows at 0, 1, 2: every nearest neighbour sits at or beyond
    # half the seed's median distance
    x = np.r_[0.0, 1.0, 2.0, np.linspace(10, 11, 27)]
    w = np.r_[1.0, 1.0, 1.0, np.zeros(27)]
    d = Dataset.from_arrays(x[:, None], -x)
    out = smogn(d, w, k=1, rng=0)
    assert out.n_interpolated == 0 and out.n_noise > 0


def test_smogn_duplicate_partition_uses_noise():
    x = np.r_[np.zeros(4), np.linspace(5, 6, 26)]
    w = np.r_[np.ones(4), np.zeros(26)]
    out = smogn(Dataset.from_arrays(x[:, None], -x), w, rng=1)
    assert out.n_interpolated == 0 and out.n_noise == 11


def test_smogn_undersampling_switch(skewed):
    w = make_relevance("pchip").fit_transform(skewed.y)
    on = smogn(skewed, w, rng=2)
    off = smogn(skewed, w, undersample=False, rng=2)
    assert on.n_dropped > 0 and off.n_dropped == 0
    assert len(off.data) > len(on.data)


def test_smogn_interpolation_happens_on_dense_partitions(skewed):
    w = make_relevance("pchip").fit_transform(skewed.y)
    out = smogn(skewed, w, rng=3)
    assert out.n_interpolated > 0


# --- WERCS ------------------------------------------------------------------

def test_wercs_identity_and_default_size(skewed):
    w = make_relevance("kde").fit_transform(skewed.y)
    same = wercs(skewed, w, 0.0, 0.0, rng=0)
    np.testing.assert_array_equal(same.data.y, skewed.y)
    out = wercs(skewed, w, rng=0)
    assert len(out.data) == len(skewed) and out.n_interpolated == out.n_noise == 0
    assert set(out.data.y) <= set(skewed.y)


def test_wercs_never_replicates_epsilon_rows():
    w = np.r_[1e-6, np.ones(9)]
    d = line(10)
    hits = sum(np.sum(wercs(d, w, 0.5, 0.0, rng=s).data.y == 0.0) - 1 for s in range(10_000))
    # expected picks over all runs: 10^4 x 5 x 1e-6 / 9, about 0.006
    assert hits == 0


def test_wercs_under_rate_error():
    with pytest.raises(ValueError, match="cannot drop"):
        wercs(line(4), np.ones(4) * 0.5, under_rate=1.0)


# --- WSMOTER ----------------------------------------------------------------

def test_wsmoter_sizes(skewed):
    w = make_relevance("denseweight").fit_transform(skewed.y)
    assert len(wsmoter(skewed, w, oversampling_ratio=1.0, rng=0).data) == len(skewed)
    out = wsmoter(skewed, w, rng=0)
    assert len(out.data) == 3 * len(skewed) and out.n_dropped == 0


def test_wsmoter_uniform_seed_selection(recorder):
    stats = pytest.importorskip("scipy.stats")
    d = line(20)
    wsmoter(d, np.ones(20), k=2, oversampling_ratio=501.0, rng=5)
    seeds = np.array([p[0] for p in recorder["pairs"]])
    assert len(seeds) == 10_000
    counts = np.bincount(seeds, minlength=20)
    assert stats.chisquare(counts).pvalue > 0.001


def test_wsmoter_partner_among_target_neighbours(recorder):
    d = line(200)
    wsmoter(d, np.ones(200), k=3, oversampling_ratio=1.5, rng=1)
    for s, j in recorder["pairs"]:
        assert 0 < abs(int(s) - int(j)) <= 2 or (s in (0, 199) and abs(int(s) - int(j)) <= 3)


def test_wsmoter_small_dataset_falls_back():
    out = wsmoter(line(3), np.ones(3), k=10, rng=0)
    assert len(out.data) == 9


# --- cSMOGN -----------------------------------------------------------------

def test_csmogn_full_acceptance():
    d = make_mixed(50)
    out = csmogn(d, np.ones(50), n_sample=30, rng=0)
    assert len(out.data) == 80
    assert out.params["attempts"] == 30


def test_csmogn_squared_acceptance_ratio(recorder):
    d = line(2, y=np.array([0.0, 0.05]))
    csmogn(d, np.array([1.0, 0.5]), n_sample=10_000, rng=7)
    seeds = np.array([p[0] for p in recorder["pairs"]] + recorder["noise"])
    ratio = np.sum(seeds == 0) / np.sum(seeds == 1)
    assert ratio == pytest.approx(4.0, rel=0.1)


def test_csmogn_stalls_on_epsilon_relevance():
    with pytest.raises(RuntimeError, match="no progress"):
        csmogn(line(10), np.full(10, 1e-6), n_sample=2, rng=0)


def test_csmogn_unique_category_falls_back_on_noise():
    d = make_mixed(20)
    X = d.X.copy()
    X[3, 2] = "unique"
    d = Dataset(d.y, X, d.columns)
    w = np.full(20, 1e-3)
    w[3] = 1.0
    out = csmogn(d, w, n_sample=5, rng=0)
    assert out.n_noise == 5
    assert np.all(out.data.X[20:, 2] == "unique")


# --- crbSMOGN ---------------------------------------------------------------

def test_budget_hand_checks():
    assert oversampling_budget([3.0], [0.0])[0] == 2
    assert oversampling_budget([3.0], [0.99])[0] == 2
    assert oversampling_budget([1.0, 0.4], [0.0, 0.0]).tolist() == [0, 0]
    u = np.random.default_rng(0).random(10_000)
    r = oversampling_budget(np.full(10_000, 1.5), u)
    assert set(r.tolist()) == {0, 1}
    assert r.mean() == pytest.approx(0.5, abs=0.02)


def test_crbsmogn_identity_for_unit_relevance():
    d = make_mixed(30)
    out = crbsmogn(d, np.ones(30), rng=0)
    assert out.data is d


def test_crbsmogn_budget_is_spent_exactly():
    d = make_mixed(60, seed=3)
    w = np.ones(60)
    w[[4, 9]] = [3.0, 5.0]
    out = crbsmogn(d, w, rng=0)
    assert out.n_interpolated + out.n_noise == 2 + 4


def test_crbsmogn_reduces_mir_on_average():
    d = generate_synthetic("nernst", n=400, seed=1)
    before = compute_mir(d.y)
    after = []
    for s in range(20):
        est = CRBSMOGN(random_state=s)
        after.append(compute_mir(est.fit_resample(d).y))
    assert np.mean(after) < before


# --- under-sampling ---------------------------------------------------------

def test_undersample_identity_cases():
    d = line(10)
    assert len(undersample_ratio(d, np.full(10, 0.5), rate=0.0, rng=0).data) == 10
    with pytest.warns(RuntimeWarning, match="can be dropped"):
        out = undersample_ratio(d, np.full(10, 2.0), rate=0.5, rng=0)
    assert len(out.data) == 10


def test_undersample_concentrates_in_dense_bin():
    d = generate_synthetic("nernst", n=500, seed=2)
    fn = make_relevance("density_ratio").fit(d.y)
    out = undersample_ratio(d, fn.relevance_, rate=0.3, rng=0)
    kept = np.isin(np.arange(500), np.flatnonzero(np.isin(d.y, out.data.y)))
    edges = np.linspace(d.y.min(), d.y.max(), 6)
    bins = np.clip(np.digitize(d.y, edges[1:-1]), 0, 4)
    densest = np.argmax(np.bincount(bins, minlength=5))
    drops = np.bincount(bins[~kept], minlength=5)
    assert drops[densest] > drops.sum() / 2


def test_undersample_size():
    d = line(10)
    out = undersample_ratio(d, np.linspace(0, 0.9, 10), rate=0.3, rng=0)
    assert out.n_dropped == 3 and len(out.data) == 7


# --- estimators and shared properties ---------------------------------------

def test_estimators_check_applicability(skewed):
    with pytest.raises(ApplicabilityError):
        SMOGN(relevance="density_ratio").fit_resample(skewed)
    with pytest.raises(ApplicabilityError):
        CRBSMOGN(relevance="kde").fit_resample(skewed)
    with pytest.raises(ValueError, match="unknown resampling"):
        make_resampler("nope")


def test_estimator_post_undersampling(skewed):
    est = CSMOGN(undersample=True, random_state=0)
    out = est.fit_resample(skewed)
    o = est.outcome_
    assert o.method_id == "csmogn+undersample"
    assert o.n_dropped == int(np.ceil(0.5 * (len(skewed) + o.n_interpolated + o.n_noise)))
    assert len(out) == len(skewed) + o.n_interpolated + o.n_noise - o.n_dropped
    assert o.seed == 0


def test_wercs_estimator_undersample_flag(skewed):
    assert WERCS(random_state=0).fit_resample(skewed) is not None
    off = WERCS(random_state=0)
    off.fit_resample(skewed)
    on = WERCS(undersample=True, random_state=0)
    on.fit_resample(skewed)
    assert off.outcome_.n_dropped == 0 and on.outcome_.n_dropped > 0


@pytest.mark.parametrize("method", sorted(RESAMPLERS))
def test_determinism(method, mixed):
    a = make_resampler(method, random_state=3)
    b = make_resampler(method, random_state=3)
    da, db = a.fit_resample(mixed), b.fit_resample(mixed)
    np.testing.assert_array_equal(da.y, db.y)
    assert da.X.tolist() == db.X.tolist()
    assert a.outcome_.counts() == b.outcome_.counts()


@pytest.mark.filterwarnings("ignore:undersample_ratio:RuntimeWarning")
@settings(max_examples=20, deadline=None)
@given(st.integers(12, 80), st.integers(0, 1000), st.sampled_from(sorted(RESAMPLERS)),
       st.booleans())
def test_synthetic_rows_respect_seed_cells(n, seed, method, under):
    d = make_mixed(n, seed=seed)
    params = {"random_state": seed}
    if method in ("smogn", "wercs", "csmogn", "crbsmogn"):
        params["undersample"] = under
    est = make_resampler(method, **params)
    try:
        out = est.fit_resample(d)
    except (ValueError, RuntimeError):
        return  # e.g. no minority sample for a threshold method
    o = est.outcome_
    assert len(out) == o.n_source + o.n_interpolated + o.n_noise + o.n_replicated - o.n_dropped
    assert set(out.X[:, 2]) <= set(d.X[:, 2])
