"""Which relevance functions each mitigation method accepts.

A strategy is a ``(method, relevance)`` pair. Cells marked ``"-"`` are
rejected outright; ``"skipped"`` cells are valid but were left out of the
reference grid and are therefore not part of :func:`default_strategies`.
"""

from __future__ import annotations

from .relevance import BOUNDED, RATIO, RELEVANCE_FUNCTIONS


class ApplicabilityError(ValueError):
    """A mitigation method cannot consume the requested relevance function."""


RELEVANCE_IDS = (
    "pchip",
    "histogram",
    "lds",
    "kde",
    "denseweight",
    "density_distance",
    "density_ratio",
)

SAMPLERS = ("smoter", "smogn", "wercs", "wsmoter", "csmogn", "crbsmogn")
LOSSES = ("dense_loss", "prob_loss", "bmc")
METHODS = SAMPLERS + LOSSES

Y, SKIP, NO = "yes", "skipped", "-"

# rows: method; columns: RELEVANCE_IDS order
_GRID = {
    "smoter": (Y, Y, Y, Y, NO, Y, NO),
    "smogn": (Y, Y, Y, Y, NO, Y, NO),
    "wercs": (Y, Y, Y, Y, NO, Y, NO),
    "wsmoter": (SKIP, SKIP, SKIP, SKIP, Y, SKIP, NO),
    "dense_loss": (Y, Y, Y, Y, Y, Y, Y),
    "prob_loss": (Y, Y, Y, Y, Y, Y, NO),
    "csmogn": (Y, Y, Y, Y, NO, Y, NO),
    "crbsmogn": (NO, NO, NO, NO, NO, NO, Y),
}

# the relevance each method's own proposal pairs it with
DEFAULT_RELEVANCE = {
    "smoter": "pchip",
    "smogn": "pchip",
    "wercs": "pchip",
    "wsmoter": "denseweight",
    "dense_loss": "denseweight",
    "prob_loss": "kde",
    "csmogn": "density_distance",
    "crbsmogn": "density_ratio",
    "bmc": None,
}

# scale of relevance values each method reads
METHOD_SCALE = {
    "smoter": BOUNDED,
    "smogn": BOUNDED,
    "wercs": BOUNDED,
    "csmogn": BOUNDED,
    "crbsmogn": RATIO,
}


def cell(method: str, relevance: str | None) -> str:
    """Grid status of a pairing: ``"yes"``, ``"skipped"`` or ``"-"``."""
    if method not in METHODS:
        raise ValueError(f"unknown mitigation method {method!r}; choose from {list(METHODS)}")
    if method == "bmc":
        return Y if relevance is None else NO
    if relevance is None:
        return NO
    if relevance not in RELEVANCE_FUNCTIONS:
        raise ValueError(f"unknown relevance function {relevance!r}")
    return _GRID[method][RELEVANCE_IDS.index(relevance)]


def check_applicable(method: str, relevance: str | None, model: str = "mlp") -> None:
    """Raise :class:`ApplicabilityError` for pairings outside the grid.

    Loss-based methods need a gradient-trained model, so they are rejected
    for ``model="knn"``.
    """
    if method in LOSSES and model != "mlp":
        raise ApplicabilityError(f"{method} needs a gradient-trained model, not {model!r}")
    status = cell(method, relevance)
    if status == NO:
        if method == "bmc":
            raise ApplicabilityError("bmc takes no relevance function")
        if relevance is None:
            raise ApplicabilityError(f"{method} needs a relevance function")
        scale = RELEVANCE_FUNCTIONS[relevance].scale
        raise ApplicabilityError(
            f"{method} cannot use {relevance} relevance ({scale} scale)"
        )


def default_strategies(include_skipped: bool = False):
    """Every applicable ``(method, relevance)`` pair in grid order."""
    out = []
    for method in METHODS:
        if method == "bmc":
            out.append((method, None))
            continue
        for rel in RELEVANCE_IDS:
            status = cell(method, rel)
            if status == Y or (include_skipped and status == SKIP):
                out.append((method, rel))
    return out


def strategy_name(method: str, relevance: str | None) -> str:
    return method if relevance is None else f"{method}:{relevance}"


def parse_strategy(text: str):
    """Inverse of :func:`strategy_name`; a bare method gets its default relevance."""
    method, _, rel = text.strip().partition(":")
    method = method.strip()
    if method not in METHODS:
        raise ValueError(f"unknown mitigation method {method!r}; choose from {list(METHODS)}")
    rel = rel.strip() or DEFAULT_RELEVANCE[method]
    return method, rel
