"""Reverberant convolution and SNR-controlled noise mixing."""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from ..errors import EnergyError, ParameterError
from ..spectral import Waveform

MIN_SNR_DB = -100.0


def apply_rir(x: Waveform, h: Waveform, align_delay: int = 0) -> Waveform:
    """Convolve ``x`` with ``h`` and keep ``len(x)`` samples starting at ``align_delay``.

    ``align_delay=0`` keeps the causal head of the full convolution; passing the
    RIR's direct-path delay time-aligns the output with the anechoic input.
    """
    if x.sample_rate != h.sample_rate:
        raise ParameterError(f"sample rates differ: {x.sample_rate} vs {h.sample_rate}")
    if align_delay < 0:
        raise ParameterError("align_delay must be non-negative")
    n = len(x)
    if n == 0:
        return x
    full = fftconvolve(x.samples, h.samples, mode="full")
    out = full[align_delay:align_delay + n]
    if out.shape[0] < n:
        out = np.pad(out, (0, n - out.shape[0]))
    return Waveform(out, x.sample_rate)


def fit_noise(n: Waveform, length: int, rng: np.random.Generator | None = None) -> Waveform:
    """Crop or circularly tile noise to ``length`` samples at a (seeded) random offset."""
    m = len(n)
    if m == 0:
        raise EnergyError("noise is empty")
    if m >= length:
        start = 0 if rng is None or m == length else int(rng.integers(0, m - length + 1))
        return Waveform(n.samples[start:start + length], n.sample_rate)
    offset = 0 if rng is None else int(rng.integers(0, m))
    idx = (np.arange(length) + offset) % m
    return Waveform(n.samples[idx], n.sample_rate)


def power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def mix_at_snr(
    s: Waveform, n: Waveform, snr_db: float, rng: np.random.Generator | None = None
) -> tuple[Waveform, float]:
    """Return ``(s + g * n, g)`` with ``g`` setting the full-utterance SNR to ``snr_db``."""
    if s.sample_rate != n.sample_rate:
        raise ParameterError(f"sample rates differ: {s.sample_rate} vs {n.sample_rate}")
    if not np.isfinite(snr_db) or snr_db < MIN_SNR_DB:
        raise ParameterError(f"snr_db must be finite and >= {MIN_SNR_DB}, got {snr_db}")
    noise = fit_noise(n, len(s), rng)
    p_s = power(s.samples)
    p_n = power(noise.samples)
    if p_s == 0.0:
        raise EnergyError("speech signal is silent")
    if p_n == 0.0:
        raise EnergyError("noise signal is silent")
    gain = float(np.sqrt(p_s / (p_n * 10.0 ** (snr_db / 10.0))))
    return Waveform(s.samples + gain * noise.samples, s.sample_rate), gain
