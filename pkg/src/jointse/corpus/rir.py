"""Parametric room impulse responses and Schroeder decay analysis."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ParameterError
from ..spectral import Waveform

# Amplitude decay rate giving a 60 dB energy drop over one T60.
_DECAY_60DB = 3.0 * math.log(10.0)


@dataclass(frozen=True)
class RirSpec:
    """Direct impulse plus an exponentially decaying Gaussian tail.

    ``tail_length`` defaults to ``t60``; 0 gives a pure delayed impulse.
    ``drr_db`` sets the direct-to-reverberant energy ratio of the tail.
    """

    t60: float
    direct_delay: int = 0
    tail_length: float | None = None
    sample_rate: int = 16000
    seed: int = 0
    drr_db: float = 0.0

    def __post_init__(self):
        if not self.t60 > 0:
            raise ParameterError(f"t60 must be positive, got {self.t60}")
        if self.t60 * self.sample_rate < 2:
            raise ParameterError(f"t60={self.t60}s is shorter than 2 samples")
        if self.direct_delay < 0:
            raise ParameterError("direct_delay must be non-negative")
        tail = self.tail
        if tail != 0.0 and tail < self.t60 / 2:
            raise ParameterError(f"tail_length {tail}s must be 0 or at least t60/2 = {self.t60 / 2}s")
        if not math.isfinite(self.drr_db):
            raise ParameterError("drr_db must be finite")

    @property
    def tail(self) -> float:
        return self.t60 if self.tail_length is None else float(self.tail_length)

    def to_dict(self) -> dict:
        return asdict(self)


def impulse_rir(direct_delay: int = 0, sample_rate: int = 16000) -> RirSpec:
    return RirSpec(t60=2.0 / sample_rate, direct_delay=direct_delay, tail_length=0.0,
                   sample_rate=sample_rate)


def synthesize_rir(spec: RirSpec, rng: np.random.Generator | None = None) -> Waveform:
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    fs = spec.sample_rate
    n_tail = int(round(spec.tail * fs))
    h = np.zeros(spec.direct_delay + 1 + n_tail)
    h[spec.direct_delay] = 1.0
    if n_tail:
        t = np.arange(1, n_tail + 1) / fs
        env = np.exp(-_DECAY_60DB * t / spec.t60)
        gain = math.sqrt(10.0 ** (-spec.drr_db / 10.0) / np.sum(env**2))
        h[spec.direct_delay + 1:] = gain * env * rng.standard_normal(n_tail)
    h /= np.max(np.abs(h))
    return Waveform(h, fs)


def energy_decay_curve(h: np.ndarray) -> np.ndarray:
    """Schroeder backward-integrated energy, in dB relative to the total."""
    energy = np.cumsum(np.asarray(h, dtype=np.float64)[::-1] ** 2)[::-1]
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy / energy[0])


def schroeder_t60(h: Waveform, fit_range: tuple[float, float] = (-5.0, -35.0)) -> float:
    """T60 from a line fit to the decay curve between ``fit_range`` dB, extrapolated to -60 dB."""
    edc = energy_decay_curve(h.samples)
    hi, lo = fit_range
    below_hi = np.nonzero(edc <= hi)[0]
    below_lo = np.nonzero(edc <= lo)[0]
    if below_hi.size == 0 or below_lo.size == 0:
        raise ParameterError("impulse response does not decay through the fit range")
    i0, i1 = below_hi[0], below_lo[0]
    if i1 - i0 < 2:
        raise ParameterError("too few samples in the fit range")
    t = np.arange(i0, i1 + 1) / h.sample_rate
    slope, _ = np.polyfit(t, edc[i0:i1 + 1], 1)
    return float(-60.0 / slope)
