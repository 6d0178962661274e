"""Streaming renderer, reference convolvers and the FLOP cost model.

The network is a delayed sum of early taps plus a bank of one-pole loops
fed from a shared input history::

    early[n] = sum_i b_i * x[n - K_i]
    s_i[n]   = alpha * s_i[n - 1] + beta_i * x[n - kappa_i]
    y[n]     = early[n] + sum_i s_i[n]

Its impulse response is the early taps plus
``sum_i beta_i * alpha**(n - kappa_i) * u(n - kappa_i)``, the analytic tail of
:mod:`fdnfit.model`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .analysis import EarlyReflections, SampledRir
from .exceptions import ConfigurationError
from .model import FdnParams

METHODS = ("fdn", "direct_conv", "partitioned_fft")
MAX_FFT_WINDOW = 2**24


@dataclass(frozen=True)
class NetworkParams:
    """Everything the renderer needs: rate, tail loops and early taps.

    Either part may be ``None`` (no loops, or no taps), but not both.
    """

    sample_rate_hz: int
    fdn: FdnParams | None = None
    early: EarlyReflections | None = None

    def __post_init__(self):
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise ConfigurationError("sample_rate_hz must be a positive integer")
        if self.fdn is None and self.early is None:
            raise ConfigurationError("network needs early taps, tail loops, or both")
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def n_taps(self) -> int:
        return 0 if self.early is None else len(self.early)

    @property
    def n_loops(self) -> int:
        return 0 if self.fdn is None else self.fdn.n_loops

    @property
    def layout(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Delay layout ``(tap delays, loop delays)``; gains may change freely within it."""
        taps = () if self.early is None else self.early.delays
        loops = () if self.fdn is None else self.fdn.kappas
        return taps, loops

    @property
    def max_delay(self) -> int:
        taps, loops = self.layout
        return max(taps + loops)


class _Snapshot:
    """Immutable arrays for one parameter set; swapped as a whole."""

    __slots__ = ("params", "layout", "tap_delays", "tap_gains", "kappas", "betas", "alpha", "flops")

    def __init__(self, params: NetworkParams):
        self.params = params
        self.layout = params.layout
        self.tap_delays = np.asarray(self.layout[0], dtype=np.int64)
        self.tap_gains = np.asarray(() if params.early is None else params.early.gains)
        self.kappas = np.asarray(self.layout[1], dtype=np.int64)
        self.betas = np.asarray(() if params.fdn is None else params.fdn.betas)
        self.alpha = 0.0 if params.fdn is None else params.fdn.alpha
        self.flops = fdn_flops(params.n_taps, params.n_loops)


class FdnRenderer:
    """Streaming state for one audio stream.

    Parameters
    ----------
    params : NetworkParams
        Initial network.
    allow_reset : bool
        Whether :meth:`update_params` may change the delay layout. A
        layout change clears the input history and loop states.

    Notes
    -----
    :meth:`update_params` may be called from another thread than the one
    processing audio. It only replaces a reference to an immutable
    snapshot; the audio path reads that reference once per call, so a block
    never mixes old and new gains. Updates land at the start of the next
    :meth:`process_sample` or :meth:`process_block` call.
    """

    def __init__(self, params: NetworkParams, allow_reset: bool = True):
        self.allow_reset = allow_reset
        self.flop_count = 0
        self._pending = _Snapshot(params)
        self._active = None
        self._reset(self._pending)

    @property
    def params(self) -> NetworkParams:
        return self._pending.params

    @property
    def sample_rate_hz(self) -> int:
        return self._pending.params.sample_rate_hz

    @property
    def loop_states(self) -> np.ndarray:
        return self._states.copy()

    def _reset(self, snap: _Snapshot) -> None:
        # history holds the last max_delay inputs; with the current sample
        # that is a window of max_delay + 1
        self._history = np.zeros(snap.params.max_delay)
        self._states = np.zeros(len(snap.kappas))
        self._active = snap

    def reset(self) -> None:
        """Clear the input history and loop states."""
        self._reset(self._pending)

    def update_params(self, params: NetworkParams) -> None:
        """Swap in new parameters at the next processing call.

        Raises
        ------
        ConfigurationError
            If the delay layout or sample rate changes and ``allow_reset``
            is off.
        """
        snap = _Snapshot(params)
        current = self._pending
        if params.sample_rate_hz != current.params.sample_rate_hz:
            raise ConfigurationError("sample rate cannot change on a live stream")
        if snap.layout != current.layout and not self.allow_reset:
            raise ConfigurationError(
                "delay layout changed and reset is disabled; "
                "only gains and alpha may change on a live stream"
            )
        self._pending = snap

    def process_sample(self, x: float) -> float:
        return float(self.process_block(np.array([x], dtype=np.float64))[0])

    def process_block(self, block) -> np.ndarray:
        """Render a block; any split of a stream into blocks gives identical output."""
        x = np.asarray(block, dtype=np.float64).ravel()
        snap = self._pending
        if snap is not self._active:
            if snap.layout != self._active.layout:
                self._reset(snap)
            self._active = snap
        L = x.size
        if L == 0:
            return np.zeros(0)
        H = self._history.size
        ext = np.concatenate([self._history, x])
        y = np.zeros(L)
        # fixed accumulation order (taps, then loops) keeps block splits bit-identical
        for d, g in zip(snap.tap_delays, snap.tap_gains):
            y += g * ext[H - d : H - d + L]
        alpha = snap.alpha
        for i, (k, b) in enumerate(zip(snap.kappas, snap.betas)):
            s, _ = lfilter([b], [1.0, -alpha], ext[H - k : H - k + L], zi=[alpha * self._states[i]])
            self._states[i] = s[-1]
            y += s
        self._history = ext[ext.size - H :] if H else self._history
        self.flop_count += L * snap.flops
        return y

    def process(self, x, block_size: int = 4096) -> np.ndarray:
        """Render a whole signal in blocks of ``block_size``."""
        x = np.asarray(x, dtype=np.float64).ravel()
        if block_size < 1:
            raise ConfigurationError("block_size must be positive")
        parts = [self.process_block(x[i : i + block_size]) for i in range(0, x.size, block_size)]
        return np.concatenate(parts) if parts else np.zeros(0)


def impulse_response(params: NetworkParams, length: int) -> SampledRir:
    """Response of a fresh renderer to a unit impulse."""
    if length < 1:
        raise ConfigurationError("length must be positive")
    x = np.zeros(int(length))
    x[0] = 1.0
    return SampledRir(params.sample_rate_hz, FdnRenderer(params).process(x, block_size=1 << 16))


def analytic_response(params: NetworkParams, length: int) -> np.ndarray:
    """Closed-form impulse response, the oracle for the renderer."""
    n = np.arange(int(length), dtype=np.float64)
    y = np.zeros(int(length))
    if params.fdn is not None:
        p = params.fdn
        for b, k in zip(p.betas, p.kappas):
            on = n >= k
            y[on] += b * p.alpha ** (n[on] - k)
    if params.early is not None:
        for d, g in params.early.taps:
            if d < length:
                y[d] += g
    return y


def convolve_direct(rir: SampledRir | np.ndarray, x) -> np.ndarray:
    """Full linear convolution in the time domain, length ``len(x) + len(rir) - 1``."""
    h = rir.samples if isinstance(rir, SampledRir) else np.asarray(rir, dtype=np.float64)
    return np.convolve(np.asarray(x, dtype=np.float64), h)


def convolve_partitioned(rir: SampledRir | np.ndarray, x, window_w: int) -> tuple[np.ndarray, int]:
    """Uniformly partitioned overlap-save convolution.

    The response is cut into ``W``-sample partitions, each transformed with
    a ``2W`` real FFT; input blocks of ``W`` samples pass through a
    frequency-domain delay line. An output block is ready only after its
    input block is complete, so the stream is delayed by exactly ``W``.

    Returns
    -------
    output : ndarray
        Stream of length ``W + len(x) + len(rir) - 1``; ``output[W + n]``
        is sample ``n`` of the linear convolution.
    latency : int
        ``W``.
    """
    W = int(window_w)
    if W < 1 or W & (W - 1):
        raise ConfigurationError(f"window_w must be a power of two, got {window_w}")
    if W > MAX_FFT_WINDOW:
        raise ConfigurationError(f"window_w {W} exceeds the transform limit {MAX_FFT_WINDOW}")
    h = rir.samples if isinstance(rir, SampledRir) else np.asarray(rir, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    n_out = x.size + h.size - 1
    P = -(-h.size // W)
    B = -(-n_out // W)
    hp = np.zeros(P * W)
    hp[: h.size] = h
    Hf = np.fft.rfft(np.pad(hp.reshape(P, W), ((0, 0), (0, W))), axis=1)
    # frames of [previous block, current block]
    xp = np.zeros((B + 1) * W)
    xp[W : W + x.size] = x
    frames = np.lib.stride_tricks.sliding_window_view(xp, 2 * W)[::W][:B]
    Xf = np.fft.rfft(frames, axis=1)
    Yf = np.zeros_like(Xf)
    for p in range(min(P, B)):
        Yf[p:] += Hf[p] * Xf[: B - p]
    y = np.fft.irfft(Yf, n=2 * W, axis=1)[:, W:].ravel()[:n_out]
    return np.concatenate([np.zeros(W), y]), W


@dataclass(frozen=True)
class CostModel:
    n_taps: int = 43
    n_loops: int = 16
    rir_length_n: int = 4735
    fft_window_w: int = 512

    def __post_init__(self):
        if min(self.n_taps, self.n_loops) < 0 or min(self.rir_length_n, self.fft_window_w) < 1:
            raise ConfigurationError("cost model sizes must be positive")
        if self.fft_window_w & (self.fft_window_w - 1):
            raise ConfigurationError("fft_window_w must be a power of two")


def fdn_flops(n_taps: int, n_loops: int) -> int:
    """Per-sample FLOPs of the network, multiplies and adds counted as one each.

    Taps cost a multiply each plus the adds joining them (``2T - 1``); loops
    a feedback multiply, input multiply and add each plus the adds joining
    them (``4L - 1``); one more add joins the two branches.
    """
    early = 2 * n_taps - 1 if n_taps else 0
    tail = 4 * n_loops - 1 if n_loops else 0
    return early + tail + (1 if n_taps and n_loops else 0)


def flops_per_sample(model: CostModel, method: str) -> float:
    """FLOPs per output sample of one rendering method."""
    if method == "fdn":
        return float(fdn_flops(model.n_taps, model.n_loops))
    if method == "direct_conv":
        return 2.0 * model.rir_length_n
    if method == "partitioned_fft":
        W = model.fft_window_w
        return (model.rir_length_n / W) * (4.0 * math.log2(W) + 1.0)
    raise ConfigurationError(f"method must be one of {METHODS}, got {method!r}")
