"""Fit the loop gains and decay factor to target metrics.

Descent runs in logit space, so every iterate maps strictly into the open
box ``0 < alpha, beta_i < 1``. Each iteration takes a step along a descent
direction and halves it until the loss decreases. Two directions exist:

* ``"gd"``: the plain negative gradient.
* ``"preconditioned"`` (default): the gradient preconditioned by the
  damped inverse of the 4x4 residual Gram matrix ``J J^T``. The three
  late-energy residuals pin nearly the same quantity, which leaves the plain
  gradient with a condition number around 1e15; the preconditioner removes
  it. Large damping recovers the plain gradient direction.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .exceptions import ConfigurationError, DomainError, NotMeasurableError
from .model import (
    MODES,
    EarlyConstants,
    FdnParams,
    TargetMetrics,
    _check_layout,
    _evaluate,
    _normalized,
    _weights,
    default_scales,
    tail_energy,
)

logger = logging.getLogger(__name__)

_MAX_HALVINGS = 30
METHODS = ("preconditioned", "gd")
NORMALIZATIONS = ("relative", "initial")


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 20000
    step_size: float = 1e-2
    tolerance: float = 1e-12
    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    restarts: int = 8
    seed: int = 0
    mode: str = "discrete"
    # grow the trial step after each accepted step (the halving still caps it)
    adaptive_step: bool = True
    method: str = "preconditioned"
    stop_at_first_converged: bool = True
    n_jobs: int = 1
    record_trace: bool = True
    # stop once the loss improves by less than stall_rtol (relative) over stall_window iterations
    stall_rtol: float = 1e-4
    stall_window: int = 100
    # "relative": residuals divided by the current total energy (metric-level
    # errors); "initial": divided by the total energy at the restart-0 start
    normalization: str = "relative"

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigurationError("step_size must be positive")
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.restarts < 1:
            raise ConfigurationError("restarts must be at least 1")
        if self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be non-negative")
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigurationError(f"normalization must be one of {NORMALIZATIONS}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}")
        _weights(self.weights)


@dataclass
class FitReport:
    final_loss: float
    residuals: tuple[float, float, float, float]
    iterations_used: int
    converged: bool
    restart_index: int
    achieved_metrics: object = None
    trace: list = field(default_factory=list, repr=False)

    def to_dict(self, sample_rate_hz=None) -> dict:
        out = {
            "final_loss": self.final_loss,
            "residuals": list(self.residuals),
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "restart_index": self.restart_index,
        }
        if self.achieved_metrics is not None:
            out["achieved_metrics"] = self.achieved_metrics.to_dict(sample_rate_hz)
        return out


def reparameterize(z) -> np.ndarray:
    """Map unconstrained reals into ``(0, 1)`` with the logistic function."""
    return expit(np.asarray(z, dtype=np.float64))


def inverse_reparameterize(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if np.any((v <= 0.0) | (v >= 1.0)):
        raise DomainError("logit is only defined strictly inside (0, 1)")
    return logit(v)


def initialize(
    seed: int,
    restart_index: int,
    targets: TargetMetrics,
    n_loops: int = 16,
) -> np.ndarray:
    """Unconstrained start point ``[logit(alpha), logit(beta_1), ...]``.

    Restart 0 is a fixed heuristic: all loop gains 0.05 and ``alpha`` set
    so a single exponential falls to the decay target at T30. For the
    amplitude residual that is ``decay_target ** (1 / t30)``; for the
    decay-curve residual the target is the T30 level itself (-30 dB of
    energy). Later restarts add unit Gaussian noise in logit space, drawn
    from ``(seed, restart_index)``.
    """
    if targets.decay_form == "edc":
        alpha0 = 10.0 ** (targets.t30_level_db / 20.0 / targets.t30_samples)
    else:
        alpha0 = targets.decay_target_amplitude ** (1.0 / targets.t30_samples)
    alpha0 = min(max(alpha0, 1e-6), 1.0 - 1e-9)
    z = inverse_reparameterize(np.concatenate([[alpha0], np.full(n_loops, 0.05)]))
    if restart_index > 0:
        rng = np.random.default_rng([seed, restart_index])
        z = z + rng.standard_normal(z.size)
    return z


class _Objective:
    """Normalized loss and its logit-space residual Jacobian."""

    def __init__(self, ec, tm, kappas, weights, mode, scales):
        self.ec, self.tm, self.mode, self.scales = ec, tm, mode, scales
        self.kappas = np.asarray(kappas, dtype=np.float64)
        self.w = np.asarray(weights, dtype=np.float64)
        self.sw = np.sqrt(self.w)

    def __call__(self, z, grad=False):
        v = expit(z)
        if not np.all((v > 0.0) & (v < 1.0)):
            # logistic saturated to the boundary in float64: treat as infeasible
            return (math.inf, None) if not grad else (math.inf, None, None, None)
        ev = _evaluate(v[0], v[1:], self.kappas, self.ec, self.tm, self.mode, jac=grad)
        r, J = _normalized(ev, self.ec, self.tm, self.scales)
        f = float(np.dot(self.w, r * r))
        if not grad:
            return f, ev.residuals
        Jz = self.sw[:, None] * J * (v * (1.0 - v))[None, :]
        return f, ev.residuals, self.sw * r, Jz


def _gn_direction(rw: np.ndarray, Jz: np.ndarray, damping: float) -> np.ndarray:
    """Minimum-norm damped Gauss-Newton step ``Jz^T (Jz Jz^T + mu I)^-1 rw``."""
    G = Jz @ Jz.T
    mu = damping * max(np.trace(G) / G.shape[0], np.finfo(float).tiny)
    try:
        y = np.linalg.solve(G + mu * np.eye(G.shape[0]), rw)
    except np.linalg.LinAlgError:
        return None
    d = Jz.T @ y
    return d if np.all(np.isfinite(d)) else None


def _descend(obj: _Objective, z0: np.ndarray, config: FitConfig):
    z = z0.copy()
    f, res, rw, Jz = obj(z, grad=True)
    if not math.isfinite(f):
        return z, f, np.full(4, math.nan), 0, False, []
    preconditioned = config.method == "preconditioned"
    step = config.step_size
    damping, nu = 1e-3, 2.0
    trace = [(0, f, *res)] if config.record_trace else []
    history = [f]
    it = 0
    converged = f <= config.tolerance
    while not converged and it < config.max_iterations:
        it += 1
        accepted = False
        if preconditioned:
            for _ in range(_MAX_HALVINGS + 1):
                d = _gn_direction(rw, Jz, damping)
                if d is not None:
                    z_new = z - d
                    f_new, _ = obj(z_new)
                    # gain ratio against the linear model |rw - Jz d|^2
                    predicted = f - float(np.sum((rw - Jz @ d) ** 2))
                    if f_new < f and predicted > 0:
                        rho = (f - f_new) / predicted
                        damping = max(damping * max(1 / 3, 1 - (2 * rho - 1) ** 3), 1e-20)
                        nu = 2.0
                        accepted = True
                        break
                # rejected: more damping shortens the step and turns it towards -grad
                damping *= nu
                nu *= 2.0
        else:
            g = 2.0 * Jz.T @ rw
            t = step
            for _ in range(_MAX_HALVINGS + 1):
                z_new = z - t * g
                f_new, _ = obj(z_new)
                if f_new < f:
                    accepted = True
                    break
                t *= 0.5
            if accepted and config.adaptive_step:
                step = min(2.0 * t, 1e6)
        if not accepted:
            # no descent within the backtracking budget: stationary to working precision
            it -= 1
            break
        z = z_new
        f, res, rw, Jz = obj(z, grad=True)
        if config.record_trace:
            trace.append((it, f, *res))
        history.append(f)
        if f <= config.tolerance:
            converged = True
        elif len(history) > config.stall_window:
            old = history[-config.stall_window - 1]
            if old - f <= config.stall_rtol * old:
                break
    return z, f, res, it, converged, trace


def achieved_metrics(params: FdnParams, ec: EarlyConstants, targets: TargetMetrics, sample_rate_hz: int = 48000):
    """Render taps plus fitted tail and measure it with the targets' windows.

    The response spans ``targets.horizon_samples``, or four times the T30
    target when the horizon is open. Returns ``None`` when the rendered
    response has no measurable T30.
    """
    from .analysis import EarlyReflections, metrics_from_samples
    from .render import NetworkParams, impulse_response

    length = targets.horizon_samples or int(math.ceil(4 * targets.t30_samples)) + max(params.kappas)
    early = EarlyReflections(ec.delays, ec.gains) if ec.delays else None
    rir = impulse_response(NetworkParams(sample_rate_hz, params, early), length)
    try:
        return metrics_from_samples(
            rir.samples, targets.early_window, targets.definition_window, targets.t30_level_db
        )
    except NotMeasurableError as exc:
        logger.warning("achieved metrics unavailable: %s", exc)
        return None


def fit(
    targets: TargetMetrics,
    ec: EarlyConstants,
    kappas,
    config: FitConfig | None = None,
    sample_rate_hz: int = 48000,
) -> tuple[FdnParams, FitReport]:
    """Fit ``(alpha, betas)`` for fixed loop delays.

    Never raises for unreachable targets: the best restart comes back with
    ``converged=False``. ``achieved_metrics`` on the report comes from
    rendering the fitted network and re-analyzing it; ``sample_rate_hz``
    only tags that rendered response, all windows are taken from
    ``targets``.
    """
    config = config or FitConfig()
    kappas = tuple(int(k) for k in kappas)
    n = len(kappas)
    z0 = initialize(config.seed, 0, targets, n)
    start = FdnParams(float(expit(z0[0])), tuple(expit(z0[1:])), kappas)
    _check_layout(start, targets)
    if config.normalization == "relative":
        scales = "relative"
    else:
        scales = default_scales(ec, targets, tail_energy(start, targets.horizon_samples, config.mode))
    obj = _Objective(ec, targets, kappas, config.weights, config.mode, scales)

    def run(i):
        z_init = initialize(config.seed, i, targets, n)
        return (i, *_descend(obj, z_init, config))

    results = []
    if config.n_jobs > 1 and not config.stop_at_first_converged:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
            results = list(pool.map(run, range(config.restarts)))
    else:
        for i in range(config.restarts):
            results.append(run(i))
            logger.debug("restart %d: loss %.3e after %d iterations", i, results[-1][2], results[-1][4])
            if config.stop_at_first_converged and results[-1][5]:
                break

    # lowest loss wins; ties go to the earliest restart
    i, z, f, res, it, converged, trace = min(results, key=lambda r: (r[2], r[0]))
    v = expit(z)
    params = FdnParams(float(v[0]), tuple(v[1:].tolist()), kappas)
    report = FitReport(
        final_loss=f,
        residuals=tuple(float(x) for x in res),
        iterations_used=it,
        converged=bool(converged),
        restart_index=i,
        trace=trace,
    )
    report.achieved_metrics = achieved_metrics(params, ec, targets, sample_rate_hz)
    if not converged:
        logger.warning("fit did not reach tolerance %.1e (best loss %.3e)", config.tolerance, f)
    return params, report
