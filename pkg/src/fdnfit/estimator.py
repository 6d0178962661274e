"""Scikit-learn style front end: fit a network to an RIR, render audio through it."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import (
    AcousticMetrics,
    EarlyReflections,
    MetricConfig,
    SampledRir,
    compute_metrics,
    early_constants,
    extract_early_reflections,
)
from .exceptions import ConfigurationError
from .model import TargetMetrics, log_spaced_delays
from .optimize import FitConfig, fit
from .render import FdnRenderer, NetworkParams, impulse_response


class FdnReverbEstimator(TransformerMixin, BaseEstimator):
    """Match a sum-of-loops reverberator to the metrics of an RIR.

    ``fit`` takes a mono impulse response, extracts its strongest early
    reflections, and fits the loop gains and decay factor so the combined
    response reproduces the clarity, definition, center time and T30 of the
    input. ``transform`` then renders dry audio through the fitted network.

    Parameters
    ----------
    sample_rate_hz : int
        Rate of the RIR passed to ``fit`` and of the audio passed to
        ``transform``.
    n_taps : int
        Number of early reflections kept.
    window_ms : float
        Early-reflection window; the loop delays are log-spaced up to it.
    n_loops : int
        Number of feedback loops.
    decay_target : float
        Amplitude the tail must reach at T30, relative to the direct path.
        Only used with ``decay_form="amplitude"``.
    decay_form : {"edc", "amplitude"}
        T30 residual. ``"edc"`` pins the energy left after T30 to the
        -30 dB level; ``"amplitude"`` pins the tail amplitude at T30.
    mode : {"discrete", "continuous"}
        Sums (exact for the renderer) or integrals in the energy model.
    weights : tuple of 4 floats
        Weights of the clarity, definition, center-time and T30 residuals.
    restarts, max_iterations, step_size, tolerance, method
        Optimizer settings, see :class:`fdnfit.optimize.FitConfig`.
    random_state : int
        Seed of the restart jitter.
    n_jobs : int
        Threads for restarts (only used when every restart runs).

    Attributes
    ----------
    target_metrics_ : AcousticMetrics
    early_ : EarlyReflections
    kappas_ : tuple of int
    network_ : NetworkParams
        Fitted taps and loops, ready for rendering.
    report_ : FitReport
    achieved_metrics_ : AcousticMetrics
        Metrics of the fitted network's impulse response.
    """

    def __init__(
        self,
        sample_rate_hz: int = 48000,
        n_taps: int = 43,
        window_ms: float = 50.0,
        n_loops: int = 16,
        decay_target: float = 1e-3,
        decay_form: str = "edc",
        mode: str = "discrete",
        weights=(1.0, 1.0, 1.0, 1.0),
        restarts: int = 8,
        max_iterations: int = 20000,
        step_size: float = 1e-2,
        tolerance: float = 1e-12,
        method: str = "preconditioned",
        random_state: int = 0,
        n_jobs: int = 1,
    ):
        self.sample_rate_hz = sample_rate_hz
        self.n_taps = n_taps
        self.window_ms = window_ms
        self.n_loops = n_loops
        self.decay_target = decay_target
        self.decay_form = decay_form
        self.mode = mode
        self.weights = weights
        self.restarts = restarts
        self.max_iterations = max_iterations
        self.step_size = step_size
        self.tolerance = tolerance
        self.method = method
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _fit_config(self) -> FitConfig:
        return FitConfig(
            max_iterations=self.max_iterations,
            step_size=self.step_size,
            tolerance=self.tolerance,
            weights=tuple(float(w) for w in self.weights),
            restarts=self.restarts,
            seed=self.random_state,
            mode=self.mode,
            method=self.method,
            stop_at_first_converged=self.n_jobs <= 1,
            n_jobs=self.n_jobs,
        )

    @staticmethod
    def _as_signal(X) -> np.ndarray:
        x = check_array(X, ensure_2d=False, dtype=np.float64)
        if x.ndim == 2 and 1 in x.shape:
            x = x.ravel()
        if x.ndim != 1:
            raise ConfigurationError(f"expected a single mono signal, got shape {x.shape}")
        return x

    def fit(self, X, y=None):
        """Fit to the impulse response ``X`` (1-D, or a single row/column)."""
        rir = SampledRir(self.sample_rate_hz, self._as_signal(X))
        metrics = compute_metrics(rir)
        early, _ = extract_early_reflections(rir, self.n_taps, self.window_ms)
        return self.fit_targets(metrics, early, len(rir))

    def fit_targets(
        self,
        metrics: AcousticMetrics,
        early: EarlyReflections,
        length_samples: int | None = None,
    ):
        """Fit to given metrics and early reflections.

        ``length_samples`` is the length of the response the metrics were
        measured on; ``None`` treats it as infinitely long.
        """
        fs = self.sample_rate_hz
        config = self._fit_config()
        targets = TargetMetrics.from_metrics(
            metrics,
            fs,
            MetricConfig(),
            horizon_samples=length_samples,
            decay_target_amplitude=self.decay_target,
            decay_form=self.decay_form,
        )
        kappas = log_spaced_delays(self.n_loops, fs, self.window_ms)
        ec = early_constants(early, fs)
        fdn, report = fit(targets, ec, kappas, config, sample_rate_hz=fs)
        self.target_metrics_ = metrics
        self.early_ = early
        self.kappas_ = kappas
        self.length_samples_ = length_samples
        self.network_ = NetworkParams(fs, fdn, early)
        self.report_ = report
        self.achieved_metrics_ = report.achieved_metrics
        return self

    def transform(self, X):
        """Render dry audio through the fitted network.

        A 1-D signal comes back as a 1-D signal of the same length; for a
        2-D array each row is rendered from a fresh state.
        """
        check_is_fitted(self, "network_")
        x = check_array(X, ensure_2d=False, dtype=np.float64)
        if x.ndim == 1:
            return FdnRenderer(self.network_).process(x)
        return np.stack([FdnRenderer(self.network_).process(row) for row in x])

    def impulse_response(self, length: int | None = None) -> SampledRir:
        """Impulse response of the fitted network; defaults to the fitted length."""
        check_is_fitted(self, "network_")
        if length is None:
            length = self.length_samples_ or self.sample_rate_hz
        return impulse_response(self.network_, length)
