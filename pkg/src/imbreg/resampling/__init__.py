"""Over- and under-sampling of regression datasets."""

from .estimators import (
    CRBSMOGN,
    CSMOGN,
    RESAMPLERS,
    SMOGN,
    SMOTER,
    WERCS,
    WSMOTER,
    BaseResampler,
    make_resampler,
)
from .primitives import (
    BinnedDataset,
    discretize_dataset,
    gaussian_noise_sample,
    heom_distance,
    heom_ranges,
    interpolate,
    similar_samples,
)
from .samplers import (
    ResampleOutcome,
    crbsmogn,
    csmogn,
    oversampling_budget,
    relevance_partitions,
    smogn,
    smoter,
    undersample_ratio,
    wercs,
    wsmoter,
)

__all__ = [
    "BaseResampler",
    "BinnedDataset",
    "CRBSMOGN",
    "CSMOGN",
    "RESAMPLERS",
    "ResampleOutcome",
    "SMOGN",
    "SMOTER",
    "WERCS",
    "WSMOTER",
    "crbsmogn",
    "csmogn",
    "discretize_dataset",
    "gaussian_noise_sample",
    "heom_distance",
    "heom_ranges",
    "interpolate",
    "make_resampler",
    "oversampling_budget",
    "relevance_partitions",
    "similar_samples",
    "smogn",
    "smoter",
    "undersample_ratio",
    "wercs",
    "wsmoter",
]
