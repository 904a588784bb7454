import csv
import json

import numpy as np
import pytest

from imbreg.benchmark import (
    BASELINE,
    BenchmarkConfig,
    DatasetSpec,
    StrategySpec,
    run_benchmark,
)
from imbreg.evaluation import RANK_LABELS
from imbreg.strategies import ApplicabilityError


def small(strategies, reps=3, datasets=("euclidean", "nernst"), **kw):
    return BenchmarkConfig(
        datasets=[{"name": g, "generator": g, "n": 120} for g in datasets],
        strategies=strategies, repetitions=reps, seed=7, model="knn",
        split_candidates=5, **kw,
    )


def test_run_cardinality():
    rep = run_benchmark(small(["smogn:kde", "crbsmogn"]))
    assert len(rep.runs) == 2 * 2 * 3 + 2 * 3
    assert sum(r["strategy"] == BASELINE for r in rep.runs) == 6
    assert rep.strategies() == [BASELINE, "smogn:kde", "crbsmogn:density_ratio",
                                "ensemble(smogn:kde)", "ensemble(crbsmogn:density_ratio)"]
    assert all(r["status"] == "ok" for r in rep.runs)
    assert set(rep.tallies) == set(rep.strategies()) - {BASELINE}
    assert [row["bin"] for row in rep.tallies["smogn:kde"]] == list(RANK_LABELS)


def test_empty_strategy_list_gives_baseline_only():
    rep = run_benchmark(small([], reps=2))
    assert rep.strategies() == [BASELINE] and rep.tallies == {}
    for ds in rep.normalized.values():
        vals = np.array(ds[BASELINE], dtype=float)
        assert np.all((vals == 1.0) | np.isnan(vals))


def test_inapplicable_pairing_rejected_before_training():
    with pytest.raises(ApplicabilityError):
        run_benchmark(small(["smogn:density_ratio"]))
    with pytest.raises(ApplicabilityError):
        run_benchmark(small(["dense_loss:kde"]))  # losses need the MLP
    with pytest.raises(ApplicabilityError):
        run_benchmark(small(["wsmoter+under"]))


def test_report_is_reproducible():
    a = run_benchmark(small(["wercs:histogram+under"], reps=2))
    b = run_benchmark(small(["wercs:histogram+under"], reps=2))
    assert a.to_json() == b.to_json()
    c = run_benchmark(BenchmarkConfig(**{**small(["wercs:histogram+under"], reps=2).to_dict(),
                                         "seed": 8}))
    assert c.to_json() != a.to_json()


def test_failed_runs_are_recorded(tmp_path):
    path = tmp_path / "flat.csv"
    rng = np.random.default_rng(0)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for i in range(60):
            w.writerow([rng.random(), 1.0 if i < 50 else float(i)])
    cfg = BenchmarkConfig(
        datasets=[DatasetSpec(name="flat", csv=str(path), target="y")],
        strategies=["smogn:pchip"], repetitions=2, model="knn", split_candidates=3,
    )
    rep = run_benchmark(cfg)
    failed = [r for r in rep.runs if r["status"] == "failed"]
    assert len(failed) == 2 and "not applicable" in failed[0]["error"]
    assert all(v is None for v in rep.to_dict()["errors"]["flat"]["smogn:pchip"][0])


def test_mir_recorded_for_samplers():
    rep = run_benchmark(small(["crbsmogn"], reps=2, datasets=("nernst",)))
    info = rep.datasets["nernst"]
    assert info["mir_after"]["crbsmogn:density_ratio"] < info["mir_before"]
    assert info["n_train"] + info["n_test"] == 120


def test_outputs(tmp_path):
    rep = run_benchmark(small(["smogn"], reps=2))
    raw = json.loads(rep.to_json())
    assert raw["bins"] == list(RANK_LABELS)
    assert "seconds" not in raw["runs"][0]
    rep.write_bin_errors_csv(tmp_path / "e.csv")
    rep.write_tally_csv(tmp_path / "t.csv")
    rows = list(csv.DictReader((tmp_path / "e.csv").open()))
    assert len(rows) == 2 * 3 * 2 * 5  # datasets x models x reps x bins
    tally = list(csv.DictReader((tmp_path / "t.csv").open()))
    assert {r["strategy"] for r in tally} == {"smogn:pchip", "ensemble(smogn:pchip)"}


def test_mlp_loss_strategies_run():
    cfg = BenchmarkConfig(
        datasets=[{"name": "arctan", "generator": "arctan", "n": 80}],
        strategies=["dense_loss", "prob_loss", "bmc"], repetitions=1, split_candidates=2,
        mlp={"hidden_units": 8, "max_epochs": 3}, ensemble=False,
    )
    rep = run_benchmark(cfg)
    assert [r["status"] for r in rep.runs] == ["ok"] * 4
    assert all(1 <= r["epochs"] <= 3 for r in rep.runs)


def test_strategy_specs():
    assert StrategySpec("crbsmogn").name == "crbsmogn:density_ratio"
    assert StrategySpec("bmc").name == "bmc"
    cfg = small(["smogn:kde+under", ("wercs", "lds"), {"method": "csmogn"}])
    assert [s.name for s in cfg.strategies] == ["smogn:kde+under", "wercs:lds",
                                                "csmogn:density_distance"]
    with pytest.raises(ValueError):
        BenchmarkConfig(datasets=["arctan", "arctan"])
    with pytest.raises(ValueError):
        BenchmarkConfig(datasets=["arctan"], model="xgboost")
