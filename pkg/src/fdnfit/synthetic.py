"""Synthetic room impulse responses for demos and tests."""

from __future__ import annotations

import numpy as np

from .analysis import SampledRir, ms_to_samples


def make_synthetic_rir(
    seed: int = 0,
    sample_rate_hz: int = 48000,
    duration_s: float = 1.0,
    n_early: int = 43,
    early_ms: float = 50.0,
    t60_s: float = 0.3,
    tail_level: float = 0.02,
) -> SampledRir:
    """Sparse early reflections over an exponentially decaying noise tail.

    The direct path (gain 1) lands in the first 2 ms; the remaining
    ``n_early - 1`` taps are spread uniformly over the early window with
    random signs and magnitudes in [0.05, 0.6). The tail is white Gaussian
    noise of standard deviation ``tail_level`` whose amplitude falls 60 dB
    over ``t60_s`` and starts with the direct path.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    window = ms_to_samples(early_ms, sample_rate_hz)
    direct = int(rng.integers(0, max(1, ms_to_samples(2.0, sample_rate_hz))))
    others = rng.choice(np.arange(direct + 1, window), size=n_early - 1, replace=False)
    x = np.zeros(n)
    decay = 10.0 ** (-3.0 / (t60_s * sample_rate_hz))
    t = np.arange(n - direct)
    x[direct:] = tail_level * rng.standard_normal(n - direct) * decay**t
    x[direct] = 1.0
    x[others] = rng.uniform(0.05, 0.6, n_early - 1) * rng.choice([-1.0, 1.0], n_early - 1)
    return SampledRir(sample_rate_hz, x)
