"""Robust Hurst exponent estimation from sample quantiles and trimmed means of discrete filtered variations."""

from .asymptotics import (
    VarianceConfig,
    VarianceResult,
    asymptotic_variance,
    hermite_coeff_hp,
    rate_table,
    sigma2_alpha,
    sigma2_alpha_tm,
)
from .estimators import (
    EstimationError,
    EstimatorConfig,
    EstimatorReport,
    astar,
    estimate_h,
    estimate_h_quadratic_variations,
    estimate_h_whittle,
)
from .filters import Filter, apply_filter, dilate, make_filter, named_filter, parse_filter
from .models import ProcessModel, cross_covariance, delta_n, filtered_cov_matrix, gamma, kappa, rho
from .quantiles import (
    QuantileScheme,
    TrimSpec,
    quantile_combination,
    sample_quantile,
    theoretical_quantile_absnormal,
    theoretical_trimmed_mean,
    trimmed_mean,
)
from .synthesis import ContaminationSpec, SamplePath, contaminate, make_rng, synth_fgn_circulant, synth_general

__version__ = "0.1.0"

__all__ = [
    "ContaminationSpec",
    "EstimationError",
    "EstimatorConfig",
    "EstimatorReport",
    "Filter",
    "ProcessModel",
    "QuantileScheme",
    "SamplePath",
    "TrimSpec",
    "VarianceConfig",
    "VarianceResult",
    "apply_filter",
    "astar",
    "asymptotic_variance",
    "contaminate",
    "cross_covariance",
    "delta_n",
    "dilate",
    "estimate_h",
    "estimate_h_quadratic_variations",
    "estimate_h_whittle",
    "filtered_cov_matrix",
    "gamma",
    "hermite_coeff_hp",
    "kappa",
    "make_filter",
    "make_rng",
    "named_filter",
    "parse_filter",
    "quantile_combination",
    "rate_table",
    "rho",
    "sample_quantile",
    "sigma2_alpha",
    "sigma2_alpha_tm",
    "synth_fgn_circulant",
    "synth_general",
    "theoretical_quantile_absnormal",
    "theoretical_trimmed_mean",
    "trimmed_mean",
]
