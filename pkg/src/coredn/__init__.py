"""Leverage-score coresets for learning Gaussian and Poisson dependency networks."""

from .coreset import (
    WeightedCoreset,
    build_leverage_coreset,
    build_leverage_coreset_of_size,
    build_uniform_coreset,
)
from .depnet import (
    DependencyNetwork,
    GibbsState,
    gdn_loss,
    gibbs_chain,
    gibbs_step,
    neg_log_pseudo_likelihood,
    predict,
    train,
)
from .errors import (
    CoreDNError,
    CSVParseError,
    DataError,
    EmptyDrawError,
    SpectralNormError,
    TrainingError,
    ZeroRankError,
)
from .glm import GlmFit, fit_gaussian, fit_poisson, poisson_nll, poisson_nll_gradient
from .leverage import (
    LeverageProfile,
    SamplingOperator,
    draw_sampling_operator,
    embedding_distortion,
    leverage_scores,
    recommended_size,
    sampling_probabilities,
)
from .matrix_core import (
    ThinSVD,
    frobenius_norm,
    solve_weighted_least_squares,
    spectral_norm,
    thin_svd,
)

__all__ = [
    "build_leverage_coreset",
    "build_leverage_coreset_of_size",
    "build_uniform_coreset",
    "CoreDNError",
    "CSVParseError",
    "DataError",
    "DependencyNetwork",
    "draw_sampling_operator",
    "embedding_distortion",
    "EmptyDrawError",
    "fit_gaussian",
    "fit_poisson",
    "frobenius_norm",
    "gdn_loss",
    "gibbs_chain",
    "gibbs_step",
    "GibbsState",
    "GlmFit",
    "leverage_scores",
    "LeverageProfile",
    "neg_log_pseudo_likelihood",
    "poisson_nll",
    "poisson_nll_gradient",
    "predict",
    "recommended_size",
    "sampling_probabilities",
    "SamplingOperator",
    "solve_weighted_least_squares",
    "spectral_norm",
    "SpectralNormError",
    "thin_svd",
    "ThinSVD",
    "train",
    "TrainingError",
    "WeightedCoreset",
    "ZeroRankError",
]

__version__ = "0.1.0"
