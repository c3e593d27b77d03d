"""Speech-to-reverberation modulation energy ratio (SRMR).

Plain formulation: 23 gammatone channels ERB-spaced from 125 Hz to fs/2,
Hilbert envelopes, 8 second-order modulation filters log-spaced 4-128 Hz
(Q = 2), Hamming-windowed 256 ms frames with a 64 ms hop. The score is the
total modulation energy in bands 1-4 over that in bands 5-8.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import gammatone, hilbert, lfilter

from ..errors import LengthError

N_CHANNELS = 23
LOW_FREQ = 125.0
MOD_MIN_CF = 4.0
MOD_MAX_CF = 128.0
N_MOD = 8
MOD_Q = 2.0
WIN_S = 0.256
HOP_S = 0.064

# Glasberg & Moore ERB parameters
_EAR_Q = 9.26449
_MIN_BW = 24.7


def erb_space(low: float, high: float, n: int) -> np.ndarray:
    """Centre frequencies uniformly spaced on the ERB scale, ascending."""
    i = np.arange(1, n + 1)
    c = _EAR_Q * _MIN_BW
    cf = -c + np.exp(i * (np.log(low + c) - np.log(high + c)) / n) * (high + c)
    return cf[::-1]


def modulation_cfs(n: int = N_MOD, lo: float = MOD_MIN_CF, hi: float = MOD_MAX_CF) -> np.ndarray:
    return lo * (hi / lo) ** (np.arange(n) / (n - 1))


def modulation_filter(cf: float, fs: float, q: float = MOD_Q):
    """Second-order band-pass (bilinear) centred on ``cf`` Hz."""
    w0 = np.tan(np.pi * cf / fs)
    b0 = w0 / q
    b = np.array([b0, 0.0, -b0])
    a = np.array([1.0 + b0 + w0**2, 2.0 * w0**2 - 2.0, 1.0 - b0 + w0**2])
    return b / a[0], a / a[0]


def envelopes(x: np.ndarray, fs: int) -> np.ndarray:
    """Hilbert envelopes of the gammatone channels, shape (channels, samples)."""
    out = np.empty((N_CHANNELS, x.shape[0]))
    for i, cf in enumerate(erb_space(LOW_FREQ, fs / 2.0, N_CHANNELS)):
        b, a = gammatone(cf, "iir", fs=fs)
        out[i] = np.abs(hilbert(lfilter(b, a, x)))
    return out


def framed_energy(sig: np.ndarray, fs: int) -> float:
    """Mean Hamming-windowed frame energy of ``sig``."""
    wlen = int(np.ceil(WIN_S * fs))
    hop = int(np.ceil(HOP_S * fs))
    frames = np.lib.stride_tricks.sliding_window_view(sig, wlen)[::hop]
    return float(np.mean(np.sum((frames * np.hamming(wlen)) ** 2, axis=1)))


def modulation_energies(w, fs: int = 16000) -> np.ndarray:
    """Average modulation-band energy per (gammatone channel, modulation band)."""
    x = np.asarray(getattr(w, "samples", w), dtype=np.float64)
    if x.shape[0] < fs:
        raise LengthError(f"SRMR needs at least 1 s of audio, got {x.shape[0] / fs:.3f} s")
    env = envelopes(x, fs)
    energy = np.empty((N_CHANNELS, N_MOD))
    for k, cf in enumerate(modulation_cfs()):
        b, a = modulation_filter(cf, fs)
        filtered = lfilter(b, a, env, axis=1)
        for ch in range(N_CHANNELS):
            energy[ch, k] = framed_energy(filtered[ch], fs)
    return energy


def srmr(w, fs: int = 16000) -> float:
    energy = modulation_energies(w, fs)
    return float(np.sum(energy[:, :4]) / np.sum(energy[:, 4:]))
