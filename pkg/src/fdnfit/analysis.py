"""Room impulse response analysis.

Energy windows, the four psychoacoustic metrics (clarity, definition,
center time, T30), the Schroeder energy decay curve, and the split of an
RIR into sparse early reflections and a residual reverberant tail.

All time quantities are in samples; milliseconds are converted at the
boundary with :func:`ms_to_samples`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ConfigurationError,
    DegenerateInputError,
    NotMeasurableError,
    RangeError,
)
from .model import EarlyConstants


def ms_to_samples(ms: float, sample_rate_hz: int) -> int:
    """Half-open window boundary: ``floor(ms * fs / 1000)``."""
    # guard against 0.05 * 48000 == 2399.9999...
    return int(math.floor(ms * sample_rate_hz / 1000.0 + 1e-9))


@dataclass(frozen=True)
class SampledRir:
    """A mono, uniformly sampled impulse response."""

    sample_rate_hz: int
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise ConfigurationError(
                f"sample_rate_hz must be a positive integer, got {self.sample_rate_hz!r}"
            )
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ConfigurationError(
                f"RIR must be one-dimensional (mono), got shape {x.shape}"
            )
        if x.size < 1:
            raise ConfigurationError("RIR must contain at least one sample")
        if not np.all(np.isfinite(x)):
            raise DegenerateInputError("RIR contains NaN or Inf samples")
        x.flags.writeable = False
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class EarlyReflections:
    """Sparse tap list ``(delay_samples, gain)`` of the delayed-sum network."""

    delays: tuple[int, ...]
    gains: tuple[float, ...]

    def __post_init__(self):
        delays = tuple(int(d) for d in self.delays)
        gains = tuple(float(g) for g in self.gains)
        if len(delays) != len(gains):
            raise ConfigurationError("delays and gains must have equal length")
        if not delays:
            raise ConfigurationError("at least one early tap (the direct path) is required")
        if delays[0] < 0:
            raise ConfigurationError("tap delays must be non-negative")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ConfigurationError("tap delays must be strictly increasing")
        if not all(math.isfinite(g) for g in gains):
            raise ConfigurationError("tap gains must be finite")
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "gains", gains)

    @classmethod
    def from_taps(cls, taps) -> "EarlyReflections":
        """Build from an iterable of ``(delay, gain)`` pairs in any order."""
        taps = sorted((int(d), float(g)) for d, g in taps)
        return cls(tuple(d for d, _ in taps), tuple(g for _, g in taps))

    @property
    def taps(self) -> list[tuple[int, float]]:
        return list(zip(self.delays, self.gains))

    @property
    def direct_gain(self) -> float:
        """Gain of the direct path, taken as the tap of largest magnitude."""
        return max(self.gains, key=abs)

    def __len__(self):
        return len(self.delays)


@dataclass(frozen=True)
class MetricConfig:
    clarity_ms: float = 50.0
    definition_ms: float = 80.0
    t30_level_db: float = -30.0
    edc_floor_db: float = -120.0

    def windows(self, sample_rate_hz: int) -> tuple[int, int]:
        return (
            ms_to_samples(self.clarity_ms, sample_rate_hz),
            ms_to_samples(self.definition_ms, sample_rate_hz),
        )


@dataclass(frozen=True)
class AcousticMetrics:
    clarity: float
    definition: float
    center_time_samples: float
    t30_samples: float

    def to_dict(self, sample_rate_hz: int | None = None) -> dict:
        out = {
            "clarity_log10": self.clarity,
            "definition": self.definition,
            "center_time_samples": self.center_time_samples,
            "t30_samples": self.t30_samples,
        }
        if sample_rate_hz is not None:
            out["center_time_ms"] = 1000.0 * self.center_time_samples / sample_rate_hz
            out["t30_ms"] = 1000.0 * self.t30_samples / sample_rate_hz
            out["sample_rate_hz"] = int(sample_rate_hz)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AcousticMetrics":
        return cls(
            clarity=float(d["clarity_log10"]),
            definition=float(d["definition"]),
            center_time_samples=float(d["center_time_samples"]),
            t30_samples=float(d["t30_samples"]),
        )


def compute_energy_window(rir: SampledRir, from_sample: int, to_sample: int | None = None) -> float:
    """Sum of squared samples over the half-open window ``[from_sample, to_sample)``.

    ``to_sample=None`` means the end of the response.
    """
    n = len(rir)
    if to_sample is None:
        to_sample = n
    if not 0 <= from_sample <= to_sample <= n:
        raise RangeError(f"window [{from_sample}, {to_sample}) outside [0, {n}]")
    seg = rir.samples[from_sample:to_sample]
    return float(np.dot(seg, seg))


def schroeder_edc(rir: SampledRir, floor_db: float = -120.0) -> np.ndarray:
    """Backward-integrated energy decay curve in dB, normalized to 0 dB at n=0.

    Values below ``floor_db`` (including the log of an exactly zero tail)
    are clipped to ``floor_db``.
    """
    energy = rir.samples**2
    remaining = np.cumsum(energy[::-1])[::-1]
    total = remaining[0]
    if total <= 0.0:
        raise DegenerateInputError("zero-energy input: decay curve undefined")
    with np.errstate(divide="ignore"):
        edc = 10.0 * np.log10(remaining / total)
    edc[0] = 0.0
    # float cumsum can wobble upwards by an ulp; enforce the monotone shape
    edc = np.minimum.accumulate(edc)
    return np.maximum(edc, floor_db)


def measure_t30(edc, level_db: float = -30.0, floor_db: float = -120.0) -> float:
    """First crossing of ``level_db`` on a decay curve, in fractional samples.

    Linear interpolation in dB between the bracketing samples. A drop onto
    the floor is a drop to -inf, so the crossing sits on the last finite
    sample.
    """
    if level_db >= 0:
        raise ConfigurationError("level_db must be negative")
    edc = np.asarray(edc, dtype=np.float64)
    below = np.flatnonzero(edc <= level_db)
    if below.size == 0:
        raise NotMeasurableError(
            f"decay never reaches {level_db} dB (minimum {edc.min():.1f} dB); "
            "pad the response or use a shallower level"
        )
    n = int(below[0])
    if n == 0:
        return 0.0
    hi, lo = edc[n - 1], edc[n]
    if lo <= floor_db:
        return float(n - 1)
    return float(n - 1 + (hi - level_db) / (hi - lo))


def compute_metrics(rir: SampledRir, config: MetricConfig | None = None) -> AcousticMetrics:
    """Clarity (log10 ratio), definition, center time and T30 of an RIR."""
    config = config or MetricConfig()
    w50, w80 = config.windows(rir.sample_rate_hz)
    return metrics_from_samples(
        rir.samples, w50, w80, config.t30_level_db, config.edc_floor_db
    )


def metrics_from_samples(
    x,
    early_window: int,
    definition_window: int,
    t30_level_db: float = -30.0,
    edc_floor_db: float = -120.0,
) -> AcousticMetrics:
    """The four metrics with windows already given in samples."""
    x = np.asarray(x, dtype=np.float64)
    energy = x * x
    total = float(energy.sum())
    if not total > 0.0:
        raise DegenerateInputError("zero-energy input: metrics undefined")
    n = x.size
    e50 = float(energy[: min(early_window, n)].sum())
    e80 = float(energy[: min(definition_window, n)].sum())
    center = float(np.dot(np.arange(n, dtype=np.float64), energy) / total)
    edc = schroeder_edc(SampledRir(1, x), edc_floor_db)
    t30 = measure_t30(edc, t30_level_db, edc_floor_db)
    return AcousticMetrics(
        clarity=math.log10(e50 / total),
        definition=e80 / total,
        center_time_samples=center,
        t30_samples=t30,
    )


def extract_early_reflections(
    rir: SampledRir, k: int = 43, window_ms: float = 50.0
) -> tuple[EarlyReflections, SampledRir]:
    """Pick the ``k`` strongest local peaks of ``|rir|`` inside the early window.

    Returns the taps and the residual tail (the input with the tap
    positions zeroed). Fewer than ``k`` taps come back when the window holds
    fewer nonzero local peaks.
    """
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    n = len(rir)
    window = ms_to_samples(window_ms, rir.sample_rate_hz)
    if window > n:
        raise RangeError(f"early window of {window} samples exceeds RIR length {n}")
    if window <= 0:
        raise RangeError("early window is empty")
    mag = np.abs(rir.samples)
    seg = mag[:window]
    left = np.empty(window)
    left[0] = -np.inf
    left[1:] = mag[: window - 1]
    right = np.full(window, -np.inf)
    right[: min(window, n - 1)] = mag[1 : window + 1]
    is_peak = (seg >= left) & (seg >= right) & (seg > 0.0)
    candidates = np.flatnonzero(is_peak)
    if candidates.size == 0:
        raise DegenerateInputError("no nonzero peaks inside the early window")
    # stable sort keeps the earlier index first among equal magnitudes
    order = np.argsort(-seg[candidates], kind="stable")
    picked = np.sort(candidates[order[:k]])
    taps = EarlyReflections(tuple(picked.tolist()), tuple(rir.samples[picked].tolist()))
    residual = rir.samples.copy()
    residual[picked] = 0.0
    return taps, SampledRir(rir.sample_rate_hz, residual)


def early_constants(
    early: EarlyReflections, sample_rate_hz: int, config: MetricConfig | None = None
) -> EarlyConstants:
    """Energy and first-moment constants of the delayed-sum response."""
    config = config or MetricConfig()
    w50, w80 = config.windows(sample_rate_hz)
    d = np.asarray(early.delays, dtype=np.float64)
    e = np.asarray(early.gains, dtype=np.float64) ** 2
    return EarlyConstants(
        e50=float(e[d < w50].sum()),
        e80=float(e[d < w80].sum()),
        etot=float(e.sum()),
        moment=float(np.dot(d, e)),
        i0=abs(early.direct_gain),
        delays=tuple(early.delays),
        gains=tuple(early.gains),
    )


def impulse_rir(sample_rate_hz: int, taps, length: int) -> SampledRir:
    """Sparse response with ``taps`` placed into a zero buffer of ``length``."""
    x = np.zeros(length)
    for d, g in taps:
        x[int(d)] += g
    return SampledRir(sample_rate_hz, x)
