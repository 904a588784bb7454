import pytest

from imbreg.strategies import (
    DEFAULT_RELEVANCE,
    METHODS,
    RELEVANCE_IDS,
    ApplicabilityError,
    cell,
    check_applicable,
    default_strategies,
    parse_strategy,
    strategy_name,
)

# combination table: "Y" applicable, "S" skipped, "-" not applicable.
# DenseWeight is ratio scaled, so samplers that read bounded relevance reject
# it outright rather than listing it as skipped.
TABLE = {
    "smogn": "YYYY-Y-",
    "wercs": "YYYY-Y-",
    "wsmoter": "SSSSYS-",
    "dense_loss": "YYYYYYY",
    "prob_loss": "YYYYYY-",
    "csmogn": "YYYY-Y-",
    "crbsmogn": "------Y",
}
CODE = {"Y": "yes", "S": "skipped", "-": "-"}


@pytest.mark.parametrize("method", sorted(TABLE))
def test_grid_matches_combination_table(method):
    got = [cell(method, r) for r in RELEVANCE_IDS]
    assert got == [CODE[c] for c in TABLE[method]]


def test_bmc_takes_no_relevance():
    assert cell("bmc", None) == "yes"
    assert all(cell("bmc", r) == "-" for r in RELEVANCE_IDS)
    with pytest.raises(ApplicabilityError):
        check_applicable("bmc", "kde")


@pytest.mark.parametrize("method", ["smogn", "wercs", "csmogn", "smoter", "prob_loss"])
def test_density_ratio_rejected_for_bounded_methods(method):
    with pytest.raises(ApplicabilityError, match="ratio"):
        check_applicable(method, "density_ratio")


def test_crbsmogn_needs_ratio_scale():
    for rel in RELEVANCE_IDS[:-1]:
        with pytest.raises(ApplicabilityError):
            check_applicable("crbsmogn", rel)
    check_applicable("crbsmogn", "density_ratio")


def test_losses_need_mlp():
    with pytest.raises(ApplicabilityError, match="gradient"):
        check_applicable("dense_loss", "kde", model="knn")
    check_applicable("smogn", "kde", model="knn")


def test_default_strategies():
    grid = default_strategies()
    assert ("bmc", None) in grid
    assert ("wsmoter", "denseweight") in grid and ("wsmoter", "kde") not in grid
    assert len(grid) == 5 + 5 + 5 + 1 + 7 + 6 + 1 + 5 + 1
    assert len(default_strategies(include_skipped=True)) > len(grid)


def test_defaults_are_applicable():
    for method in METHODS:
        check_applicable(method, DEFAULT_RELEVANCE[method])


def test_names_round_trip():
    assert strategy_name("bmc", None) == "bmc"
    assert parse_strategy(strategy_name("smogn", "kde")) == ("smogn", "kde")
    assert parse_strategy("crbsmogn") == ("crbsmogn", "density_ratio")
    with pytest.raises(ValueError):
        parse_strategy("adasyn:kde")
    with pytest.raises(ValueError):
        cell("smogn", "isj")
