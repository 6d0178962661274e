"""Fit a sum-of-loops reverberator to the acoustic metrics of a room impulse response."""

from .analysis import (
    AcousticMetrics,
    EarlyReflections,
    MetricConfig,
    SampledRir,
    compute_energy_window,
    compute_metrics,
    early_constants,
    extract_early_reflections,
    measure_t30,
    schroeder_edc,
)
from .estimator import FdnReverbEstimator
from .exceptions import (
    ConfigurationError,
    DegenerateInputError,
    DomainError,
    FdnFitError,
    InputOutputError,
    NotMeasurableError,
    NumericRangeError,
    RangeError,
)
from .model import (
    EarlyConstants,
    FdnParams,
    TargetMetrics,
    analytic_tail,
    lambda_coefficients,
    log_spaced_delays,
    loss,
    loss_gradient,
    residuals,
    tail_energy,
    tail_moment,
)
from .optimize import FitConfig, FitReport, fit, initialize, inverse_reparameterize, reparameterize
from .render import (
    CostModel,
    FdnRenderer,
    NetworkParams,
    convolve_direct,
    convolve_partitioned,
    flops_per_sample,
    impulse_response,
)

__version__ = "0.1.0"

__all__ = [
    "AcousticMetrics",
    "ConfigurationError",
    "CostModel",
    "DegenerateInputError",
    "DomainError",
    "EarlyConstants",
    "EarlyReflections",
    "FdnFitError",
    "FdnParams",
    "FdnRenderer",
    "FdnReverbEstimator",
    "FitConfig",
    "FitReport",
    "InputOutputError",
    "MetricConfig",
    "NetworkParams",
    "NotMeasurableError",
    "NumericRangeError",
    "RangeError",
    "SampledRir",
    "TargetMetrics",
    "analytic_tail",
    "compute_energy_window",
    "compute_metrics",
    "convolve_direct",
    "convolve_partitioned",
    "early_constants",
    "extract_early_reflections",
    "fit",
    "flops_per_sample",
    "impulse_response",
    "initialize",
    "inverse_reparameterize",
    "lambda_coefficients",
    "log_spaced_delays",
    "loss",
    "loss_gradient",
    "measure_t30",
    "reparameterize",
    "residuals",
    "schroeder_edc",
    "tail_energy",
    "tail_moment",
]
