"""Closed-form energy model of the sum-of-loops reverberant tail.

The tail is ``J(t) = sum_i beta_i * alpha**(t - kappa_i) * u(t - kappa_i)``.
Between consecutive loop delays the tail is a single exponential
``c_i * alpha**(t - kappa_i)`` with

    c_i = sum_{j <= i} beta_j * alpha**(kappa_i - kappa_j)

so ``c_i**2 == lambda_i * alpha**(2 * kappa_i)``. Every energy and moment
integral then reduces to per-segment kernels

    K_k(L) = sum_{m < L} m**k * alpha**(2m)        (discrete)
    K_k(L) = int_0^L s**k * alpha**(2s) ds         (continuous)

with ``dK_k/dalpha = (2 / alpha) * K_{k+1}``, which is what makes the
gradient cheap. Working with ``c_i`` instead of ``lambda_i`` keeps all
exponents non-negative, so nothing overflows for long delays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import gammainc

from .exceptions import ConfigurationError, DomainError, NumericRangeError

Mode = Literal["discrete", "continuous"]
DecayForm = Literal["edc", "amplitude"]

MODES = ("discrete", "continuous")
DECAY_FORMS = ("edc", "amplitude")

# Segments shorter than this fraction of the decay scale are summed directly;
# the closed forms cancel catastrophically there.
_DIRECT_SUM_X = 0.1
_DIRECT_SUM_MAX_LEN = 4096


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0 or not math.isfinite(alpha):
        raise DomainError(f"alpha must lie strictly inside (0, 1), got {alpha!r}")


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")


@dataclass(frozen=True)
class FdnParams:
    """Decay factor, loop gains and loop delays of the tail network."""

    alpha: float
    betas: tuple[float, ...]
    kappas: tuple[int, ...]

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        kappas = tuple(int(k) for k in self.kappas)
        _check_alpha(float(self.alpha))
        if len(betas) != len(kappas) or not betas:
            raise ConfigurationError("betas and kappas must be non-empty and of equal length")
        if not all(math.isfinite(b) and b >= 0.0 for b in betas):
            raise ConfigurationError("loop gains must be finite and non-negative")
        if kappas[0] < 0 or any(b <= a for a, b in zip(kappas, kappas[1:])):
            raise ConfigurationError("loop delays must be non-negative and strictly increasing")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "kappas", kappas)

    @property
    def n_loops(self) -> int:
        return len(self.betas)


@dataclass(frozen=True)
class EarlyConstants:
    """Energy constants of the known early-reflection response ``I(t)``.

    ``delays``/``gains`` keep the per-tap breakdown. It is needed for energy
    beyond an arbitrary time and for the cross terms ``2 * b_i * J(K_i)``
    where a tap lands on top of the running tail. Without taps the
    cross terms are dropped.
    """

    e50: float
    e80: float
    etot: float
    moment: float
    i0: float
    delays: tuple[int, ...] = ()
    gains: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.i0 > 0:
            raise ConfigurationError("direct-path amplitude i0 must be positive")
        if min(self.e50, self.e80, self.etot, self.moment) < 0:
            raise ConfigurationError("early energy constants must be non-negative")
        if not self.e50 <= self.e80 * (1 + 1e-12) <= self.etot * (1 + 1e-9):
            raise ConfigurationError("expected e50 <= e80 <= etot")

    def energy_from(self, t: float) -> float:
        """Early energy at or after sample ``t``."""
        return float(sum(g * g for d, g in zip(self.delays, self.gains) if d >= t))


@dataclass(frozen=True)
class TargetMetrics:
    """Metric targets plus the sample windows they were measured with.

    ``decay_form`` selects the T30 residual: ``"edc"`` pins the energy left
    after T30 to 10**(t30_level_db / 10) of the total (the decay-curve
    definition), ``"amplitude"`` pins ``J(T30) = decay_target_amplitude * i0``.
    ``horizon_samples=None`` integrates to infinity.
    """

    clarity: float
    definition: float
    center_time_samples: float
    t30_samples: float
    early_window: int = 2400
    definition_window: int = 3840
    horizon_samples: int | None = None
    decay_target_amplitude: float = 1e-3
    decay_form: DecayForm = "edc"
    t30_level_db: float = -30.0

    def __post_init__(self):
        if not 0.0 < self.definition <= 1.0:
            raise ConfigurationError(f"definition target must lie in (0, 1], got {self.definition}")
        if not self.t30_samples > 0:
            raise ConfigurationError(f"t30 target must be positive, got {self.t30_samples}")
        if self.decay_form not in DECAY_FORMS:
            raise ConfigurationError(f"decay_form must be one of {DECAY_FORMS}")
        if not self.decay_target_amplitude > 0:
            raise ConfigurationError("decay_target_amplitude must be positive")
        if not 0 < self.early_window <= self.definition_window:
            raise ConfigurationError("expected 0 < early_window <= definition_window")

    @classmethod
    def from_metrics(cls, metrics, sample_rate_hz: int, config=None, **kwargs) -> "TargetMetrics":
        from .analysis import MetricConfig

        config = config or MetricConfig()
        w50, w80 = config.windows(sample_rate_hz)
        return cls(
            clarity=metrics.clarity,
            definition=metrics.definition,
            center_time_samples=metrics.center_time_samples,
            t30_samples=metrics.t30_samples,
            early_window=w50,
            definition_window=w80,
            t30_level_db=config.t30_level_db,
            **kwargs,
        )

    @property
    def decay_sample(self) -> int:
        return int(round(self.t30_samples))


def log_spaced_delays(n: int, sample_rate_hz: int, t_max_ms: float = 50.0) -> tuple[int, ...]:
    """``n`` distinct integer delays, geometrically spaced from 1 to the window end."""
    from .analysis import ms_to_samples

    if n < 1:
        raise ConfigurationError("need at least one loop")
    top = ms_to_samples(t_max_ms, sample_rate_hz)
    if top < n:
        raise ConfigurationError(
            f"{n} loops need {n} distinct delays but the {t_max_ms} ms window holds {top}"
        )
    if n == 1:
        return (top,)
    grid = np.rint(np.geomspace(1.0, top, n)).astype(int)
    out = []
    for g in grid:
        k = int(g) if not out else max(int(g), out[-1] + 1)
        out.append(k)
    # bumping can push the tail past the window; pull back from the top
    if out[-1] > top:
        out[-1] = top
        for i in range(n - 2, -1, -1):
            out[i] = min(out[i], out[i + 1] - 1)
    return tuple(out)


def analytic_tail(p: FdnParams, t: float) -> float:
    """Tail amplitude ``J(t)``."""
    k = np.asarray(p.kappas, dtype=np.float64)
    active = k <= t
    if not active.any():
        return 0.0
    b = np.asarray(p.betas)[active]
    return float(np.dot(b, np.power(p.alpha, t - k[active])))


def lambda_coefficients(p: FdnParams) -> np.ndarray:
    """Squared prefix sums ``(sum_{j<=i} beta_j * alpha**-kappa_j)**2``."""
    worst = -max(p.kappas) * math.log(p.alpha)
    if 2 * worst > 700:
        raise NumericRangeError(
            f"alpha**(-kappa) overflows (exponent {worst:.0f}); "
            "use shorter delays or a decay factor closer to 1"
        )
    terms = np.asarray(p.betas) * np.power(p.alpha, -np.asarray(p.kappas, dtype=np.float64))
    return np.cumsum(terms) ** 2


def _discrete_kernels(log_r: float, lengths: np.ndarray, kmax: int) -> np.ndarray:
    """``K_k(L) = sum_{m<L} m**k r**m`` for k = 0..kmax, ``r = exp(log_r)``."""
    r = math.exp(log_r)
    u = -math.expm1(log_r)  # 1 - r without cancellation
    inf = [1.0 / u, r / u**2, r * (1.0 + r) / u**3]
    out = np.zeros((kmax + 1, lengths.size))
    finite = np.isfinite(lengths)
    L = np.where(finite, lengths, 0.0)
    rL = np.where(finite, np.exp(L * log_r), 0.0)
    one_minus_rL = np.where(finite, -np.expm1(L * log_r), 1.0)
    out[0] = inf[0] * one_minus_rL
    if kmax >= 1:
        out[1] = inf[1] - rL * (inf[1] + L * inf[0])
    if kmax >= 2:
        out[2] = inf[2] - rL * (inf[2] + 2 * L * inf[1] + L * L * inf[0])
    short = finite & (L > 0) & (L * u < _DIRECT_SUM_X) & (L <= _DIRECT_SUM_MAX_LEN)
    if short.any():
        idx = np.flatnonzero(short)
        m = np.arange(int(L[idx].max()), dtype=np.float64)
        mask = m[None, :] < L[idx, None]
        pw = np.where(mask, np.exp(m * log_r)[None, :], 0.0)
        for k in range(1, kmax + 1):
            out[k, idx] = (pw * m**k).sum(axis=1)
        out[0, idx] = pw.sum(axis=1)
    out[:, finite & (L <= 0)] = 0.0
    return out


def _continuous_kernels(log_r: float, lengths: np.ndarray, kmax: int) -> np.ndarray:
    """``K_k(L) = int_0^L s**k exp(log_r * s) ds`` via the regularized incomplete gamma."""
    q = -log_r
    x = np.where(np.isfinite(lengths), lengths * q, np.inf)
    x = np.maximum(x, 0.0)
    out = np.empty((kmax + 1, lengths.size))
    for k in range(kmax + 1):
        out[k] = math.factorial(k) / q ** (k + 1) * gammainc(k + 1, x)
    return out


def _kernels(alpha: float, lengths, mode: str, kmax: int) -> np.ndarray:
    log_r = 2.0 * math.log(alpha)
    lengths = np.asarray(lengths, dtype=np.float64)
    if mode == "discrete":
        return _discrete_kernels(log_r, lengths, kmax)
    return _continuous_kernels(log_r, lengths, kmax)


def _segment_lengths(kappas: np.ndarray, upto: float) -> np.ndarray:
    ends = np.append(kappas[1:], np.inf)
    return np.maximum(np.minimum(ends, upto) - kappas, 0.0)


def _segment_amplitudes(alpha: float, betas: np.ndarray, kappas: np.ndarray):
    """``c = A @ beta`` with ``A_ij = alpha**(kappa_i - kappa_j)`` for ``j <= i``."""
    diff = kappas[:, None] - kappas[None, :]
    lower = diff >= 0
    A = np.where(lower, np.exp(np.where(lower, diff, 0.0) * math.log(alpha)), 0.0)
    return A, diff * lower


def _upto(upto) -> float:
    return math.inf if upto is None else float(upto)


def tail_energy(p: FdnParams, upto=None, mode: Mode = "discrete") -> float:
    """Energy of the tail over ``[0, upto)``; ``upto=None`` means infinity."""
    _check_mode(mode)
    k = np.asarray(p.kappas, dtype=np.float64)
    A, _ = _segment_amplitudes(p.alpha, np.asarray(p.betas), k)
    c = A @ np.asarray(p.betas)
    K = _kernels(p.alpha, _segment_lengths(k, _upto(upto)), mode, 0)
    return float(np.dot(c * c, K[0]))


def tail_moment(p: FdnParams, upto=None, mode: Mode = "discrete") -> float:
    """First time moment ``sum t * J(t)**2`` (or the integral) over ``[0, upto)``."""
    _check_mode(mode)
    k = np.asarray(p.kappas, dtype=np.float64)
    A, _ = _segment_amplitudes(p.alpha, np.asarray(p.betas), k)
    c = A @ np.asarray(p.betas)
    K = _kernels(p.alpha, _segment_lengths(k, _upto(upto)), mode, 1)
    return float(np.dot(c * c, k * K[0] + K[1]))


def tail_energy_from_lambdas(p: FdnParams, upto=None) -> float:
    """Continuous energy written directly in ``lambda_i`` form.

    ``gamma * sum_i (alpha**(2 kappa_{i+1}) - alpha**(2 kappa_i)) * lambda_i``
    with ``gamma = 1 / (2 ln alpha)``. Overflows for long delays; kept as a
    cross-check of the stable path.
    """
    lam = lambda_coefficients(p)
    k = np.asarray(p.kappas, dtype=np.float64)
    ends = np.append(k[1:], _upto(upto))
    gamma = 1.0 / (2.0 * math.log(p.alpha))
    hi = np.power(p.alpha, 2 * ends)
    lo = np.power(p.alpha, 2 * k)
    return float(gamma * np.dot(hi - lo, lam))


def tail_moment_from_lambdas(p: FdnParams, upto=None) -> float:
    """Continuous first moment in ``lambda_i`` form.

    The antiderivative of ``t * alpha**(2t)`` is
    ``gamma * alpha**(2t) * (t - gamma)``, ``gamma = 1 / (2 ln alpha)``.
    """
    lam = lambda_coefficients(p)
    k = np.asarray(p.kappas, dtype=np.float64)
    ends = np.append(k[1:], _upto(upto))
    gamma = 1.0 / (2.0 * math.log(p.alpha))

    def prim(t):
        with np.errstate(invalid="ignore"):
            v = gamma * np.power(p.alpha, 2 * t) * (t - gamma)
        return np.where(np.isinf(t), 0.0, v)

    return float(np.dot(prim(ends) - prim(k), lam))


@dataclass(frozen=True)
class _Evaluation:
    residuals: np.ndarray
    jacobian: np.ndarray | None = field(default=None, repr=False)
    # total energy of the combined response and its gradient
    denominator: float = math.nan
    denominator_grad: np.ndarray | None = field(default=None, repr=False)


def _evaluate(alpha, betas, kappas, ec: EarlyConstants, tm: TargetMetrics, mode, jac=True):
    """Residuals (and their Jacobian w.r.t. ``(alpha, betas)``) as arrays."""
    n = betas.size
    A, D = _segment_amplitudes(alpha, betas, kappas)
    c = A @ betas
    c2 = c * c
    horizon = _upto(tm.horizon_samples)
    discrete = mode == "discrete"
    t_decay = float(tm.decay_sample) if discrete else float(tm.t30_samples)
    edc_form = tm.decay_form == "edc"

    windows = [tm.early_window, tm.definition_window, horizon]
    if edc_form:
        # remaining energy is interpolated geometrically between two samples,
        # matching the linear-in-dB crossing of the measured decay curve
        if discrete:
            n_lo = math.floor(tm.t30_samples)
            frac = tm.t30_samples - n_lo
            cuts = [float(n_lo), float(n_lo + 1)]
        else:
            frac, cuts = 0.0, [t_decay, t_decay]
        windows.extend(min(c, horizon) for c in cuts)
    lengths = np.stack([_segment_lengths(kappas, min(w, horizon)) for w in windows])
    kmax = 2 if jac else 1
    K = _kernels(alpha, lengths.ravel(), mode, kmax).reshape(kmax + 1, len(windows), n)

    e50, e80, etot_tail = (c2 @ K[0, i] for i in range(3))
    mom_weights = kappas * K[0, 2] + K[1, 2]
    mom_tail = c2 @ mom_weights

    # cross terms 2 * b_j * J(K_j) where early taps overlap the tail
    tap_k = np.asarray(ec.delays, dtype=np.float64)
    tap_b = np.asarray(ec.gains, dtype=np.float64)
    if tap_k.size:
        tap_k, tap_b = tap_k[tap_k < horizon], tap_b[tap_k < horizon]
        lag = tap_k[:, None] - kappas[None, :]
        on = lag >= 0
        P = np.where(on, np.exp(np.where(on, lag, 0.0) * math.log(alpha)), 0.0)
        cross_cuts = [tm.early_window, tm.definition_window, horizon]
        if edc_form:
            cross_cuts.extend(cuts)
        # rows: weights of 2*b_j per window; last row: moment weights
        Wx = np.array([2.0 * tap_b * (tap_k < w) for w in cross_cuts] + [2.0 * tap_b * tap_k])
        jt = P @ betas
        X = Wx @ jt
    else:
        X = np.zeros(len(windows) + 1)
    x50, x80, xtot = X[0], X[1], X[2]
    xmom = X[-1]

    ratio_c = 10.0**tm.clarity
    denom = ec.etot + etot_tail + xtot
    res = np.empty(4)
    res[0] = ec.e50 + e50 + x50 - ratio_c * denom
    res[1] = ec.e80 + e80 + x80 - tm.definition * denom
    res[2] = ec.moment + mom_tail + xmom - tm.center_time_samples * denom

    # tail amplitude at the decay time
    act = kappas <= t_decay
    pw = np.where(act, np.exp(np.where(act, t_decay - kappas, 0.0) * math.log(alpha)), 0.0)
    if edc_form:
        level = 10.0 ** (tm.t30_level_db / 10.0)
        rem = np.array(
            [
                etot_tail + xtot - (c2 @ K[0, w] + X[w]) + ec.energy_from(cuts[w - 3])
                for w in (3, 4)
            ]
        )
        if np.any(rem <= 0):
            rem_interp = (1.0 - frac) * rem[0] + frac * rem[1]
            wts = np.array([1.0 - frac, frac])
        else:
            rem_interp = rem[0] ** (1.0 - frac) * rem[1] ** frac
            wts = rem_interp * np.array([1.0 - frac, frac]) / rem
        res[3] = rem_interp - level * denom
    else:
        res[3] = betas @ pw - tm.decay_target_amplitude * ec.i0

    if not jac:
        return _Evaluation(res, denominator=denom)

    # dc/dalpha = (D * A / alpha) @ beta
    dc_da = ((D * A) @ betas) / alpha
    two_over_a = 2.0 / alpha
    # d(c_i^2 K0_i)/dalpha and d/dbeta for each window
    dE_da = np.empty(len(windows))
    dE_db = np.empty((len(windows), n))
    for w in range(len(windows)):
        dE_da[w] = np.sum(2 * c * dc_da * K[0, w] + c2 * two_over_a * K[1, w])
        dE_db[w] = 2 * A.T @ (c * K[0, w])
    dM_da = np.sum(2 * c * dc_da * mom_weights + c2 * two_over_a * (kappas * K[1, 2] + K[2, 2]))
    dM_db = 2 * A.T @ (c * mom_weights)
    if tap_k.size:
        dP_da = np.where(on, lag, 0.0) * P / alpha
        dX_da = Wx @ (dP_da @ betas)
        dX_db = Wx @ P
        dE_da = dE_da + dX_da[: len(windows)]
        dE_db = dE_db + dX_db[: len(windows)]
        dM_da = dM_da + dX_da[-1]
        dM_db = dM_db + dX_db[-1]

    J = np.empty((4, n + 1))
    J[0, 0] = dE_da[0] - ratio_c * dE_da[2]
    J[0, 1:] = dE_db[0] - ratio_c * dE_db[2]
    J[1, 0] = dE_da[1] - tm.definition * dE_da[2]
    J[1, 1:] = dE_db[1] - tm.definition * dE_db[2]
    J[2, 0] = dM_da - tm.center_time_samples * dE_da[2]
    J[2, 1:] = dM_db - tm.center_time_samples * dE_db[2]
    if edc_form:
        # d rem_w = d(total) - d(before_w); d(total) = dE[2]
        J[3, 0] = wts @ (dE_da[2] - dE_da[3:5]) - level * dE_da[2]
        J[3, 1:] = wts @ (dE_db[2][None, :] - dE_db[3:5]) - level * dE_db[2]
    else:
        J[3, 0] = betas @ (np.where(act, t_decay - kappas, 0.0) * pw) / alpha
        J[3, 1:] = pw
    return _Evaluation(res, J, denom, np.concatenate([[dE_da[2]], dE_db[2]]))


def _relative_units(ec: EarlyConstants, tm: TargetMetrics) -> tuple[np.ndarray, np.ndarray]:
    """Per-residual units ``u`` and a mask of the residuals divided by the total energy.

    A residual divided by ``total * u`` is the error of the metric itself:
    the clarity and definition ratios, the center time relative to its
    target, and the remaining-energy fraction at T30 relative to its level.
    The amplitude form of the decay residual is not an energy and is divided
    by the fixed ``decay_target * i0`` instead.
    """
    edc_form = tm.decay_form == "edc"
    s4 = 10.0 ** (tm.t30_level_db / 10.0) if edc_form else tm.decay_target_amplitude * ec.i0
    units = np.array([1.0, 1.0, max(tm.center_time_samples, 1.0), s4])
    by_total = np.array([True, True, True, edc_form])
    return units, by_total


def _normalized(ev: _Evaluation, ec: EarlyConstants, tm: TargetMetrics, scales):
    """Normalized residuals and Jacobian.

    ``scales`` is ``"relative"`` (divide by the current total energy, see
    :func:`_relative_units`), a 4-vector of fixed divisors, or ``None``.
    """
    if scales is None:
        return ev.residuals, ev.jacobian
    if isinstance(scales, str):
        if scales != "relative":
            raise ConfigurationError(f"unknown normalization {scales!r}")
        units, by_total = _relative_units(ec, tm)
        S = ev.denominator
        div = np.where(by_total, S * units, units)
        r = ev.residuals / div
        if ev.jacobian is None:
            return r, None
        # d(r / (S u)) = (dr - (r / S) dS) / (S u)
        J = ev.jacobian / div[:, None]
        J[by_total] -= (r[by_total] / S)[:, None] * ev.denominator_grad[None, :]
        return r, J
    div = np.asarray(scales, dtype=np.float64)
    J = None if ev.jacobian is None else ev.jacobian / div[:, None]
    return ev.residuals / div, J


def _check_layout(p: FdnParams, tm: TargetMetrics) -> None:
    if tm.t30_samples <= max(p.kappas):
        raise ConfigurationError(
            f"t30 target {tm.t30_samples} does not exceed the largest loop delay {max(p.kappas)}"
        )
    if tm.horizon_samples is not None and tm.horizon_samples <= max(p.kappas):
        raise ConfigurationError("horizon must exceed the largest loop delay")


def residuals(
    p: FdnParams, ec: EarlyConstants, tm: TargetMetrics, mode: Mode = "discrete"
) -> np.ndarray:
    """Cleared-denominator constraint residuals ``(l1, l2, l3, l4)``.

    The first three are ``early + tail - target * (total early + total tail)``
    for the 50 ms energy, 80 ms energy and time moment; the fourth pins the
    decay at the T30 target (see :class:`TargetMetrics`). All four vanish
    exactly when the combined response meets its targets.
    """
    _check_mode(mode)
    _check_layout(p, tm)
    ev = _evaluate(
        p.alpha,
        np.asarray(p.betas),
        np.asarray(p.kappas, dtype=np.float64),
        ec,
        tm,
        mode,
        jac=False,
    )
    return ev.residuals


def default_scales(ec: EarlyConstants, tm: TargetMetrics, tail_total: float) -> np.ndarray:
    """Per-residual normalizers that bring all four to relative units.

    ``energy`` is the denominator scale ``etot + tail energy``.
    """
    energy = ec.etot + tail_total
    s4 = energy * 10.0 ** (tm.t30_level_db / 10.0) if tm.decay_form == "edc" else (
        tm.decay_target_amplitude * ec.i0
    )
    return np.array([energy, energy, energy * max(tm.center_time_samples, 1.0), s4])


def _weights(weights) -> np.ndarray:
    w = np.ones(4) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (4,) or np.any(w <= 0):
        raise ConfigurationError("weights must be four positive numbers")
    return w


def loss(
    p: FdnParams,
    ec: EarlyConstants,
    tm: TargetMetrics,
    weights=None,
    mode: Mode = "discrete",
    scales=None,
) -> float:
    """Weighted sum of squared residuals ``sum w_i * l_i**2``.

    ``scales`` selects the normalization applied before squaring: ``None``
    (raw residuals), ``"relative"`` (metric-level errors, what the
    optimizer minimizes), or four fixed divisors.
    """
    _check_mode(mode)
    _check_layout(p, tm)
    w = _weights(weights)
    ev = _evaluate(
        p.alpha, np.asarray(p.betas), np.asarray(p.kappas, dtype=np.float64), ec, tm, mode, jac=False
    )
    r, _ = _normalized(ev, ec, tm, scales)
    return float(np.dot(w, r * r))


def loss_gradient(
    p: FdnParams,
    ec: EarlyConstants,
    tm: TargetMetrics,
    weights=None,
    mode: Mode = "discrete",
    scales=None,
    wrt: Literal["logit", "params"] = "logit",
) -> np.ndarray:
    """Gradient ``[d/dalpha, d/dbeta_1, ...]`` of :func:`loss`.

    With ``wrt="logit"`` (the default) derivatives are taken with respect to
    the unconstrained logits the optimizer works in, otherwise with respect
    to ``alpha`` and ``beta`` directly.
    """
    _check_mode(mode)
    _check_layout(p, tm)
    if wrt not in ("logit", "params"):
        raise ConfigurationError("wrt must be 'logit' or 'params'")
    w = _weights(weights)
    betas = np.asarray(p.betas)
    ev = _evaluate(p.alpha, betas, np.asarray(p.kappas, dtype=np.float64), ec, tm, mode)
    r, J = _normalized(ev, ec, tm, scales)
    g = 2.0 * (w * r) @ J
    if wrt == "logit":
        vals = np.concatenate([[p.alpha], betas])
        g = g * vals * (1.0 - vals)
    return g
