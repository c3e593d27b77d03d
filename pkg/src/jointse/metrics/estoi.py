"""Extended short-time objective intelligibility (ESTOI).

Both signals are resampled to 10 kHz, frames more than 40 dB below the
loudest clean frame are dropped, and the remaining signal is decomposed into
15 one-third-octave bands from 150 Hz. Short-time band envelopes are cut into
30-frame (384 ms) segments, each segment is normalised along time (rows) and
then along frequency (columns), and the score is the mean inner product of
the normalised clean and processed segments, divided by the segment length.
"""

from __future__ import annotations

from math import gcd

import numpy as np
from scipy.signal import resample_poly

from ..errors import LengthError, ParameterError

FS = 10000
N_FRAME = 256
NFFT = 512
NUM_BANDS = 15
MIN_FREQ = 150.0
SEGMENT = 30
DYN_RANGE = 40.0


def third_octave_matrix(fs: int = FS, nfft: int = NFFT, num_bands: int = NUM_BANDS,
                        min_freq: float = MIN_FREQ) -> np.ndarray:
    f = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(num_bands)
    low = min_freq * 2.0 ** ((2 * k - 1) / 6)
    high = min_freq * 2.0 ** ((2 * k + 1) / 6)
    obm = np.zeros((num_bands, f.shape[0]))
    for i in range(num_bands):
        lo = int(np.argmin((f - low[i]) ** 2))
        hi = int(np.argmin((f - high[i]) ** 2))
        obm[i, lo:hi] = 1.0
    return obm


def _hann(n: int) -> np.ndarray:
    return np.hanning(n + 2)[1:-1]


def _frames(x: np.ndarray, n: int, hop: int) -> np.ndarray:
    if x.shape[0] < n:
        return np.zeros((0, n))
    return np.lib.stride_tricks.sliding_window_view(x, n)[::hop]


def _overlap_add(frames: np.ndarray, hop: int) -> np.ndarray:
    k, n = frames.shape
    out = np.zeros((k - 1) * hop + n) if k else np.zeros(0)
    for i in range(k):
        out[i * hop:i * hop + n] += frames[i]
    return out


def remove_silent_frames(x: np.ndarray, y: np.ndarray, dyn_range: float = DYN_RANGE,
                         framelen: int = N_FRAME, hop: int = N_FRAME // 2):
    w = _hann(framelen)
    xf = _frames(x, framelen, hop) * w
    yf = _frames(y, framelen, hop) * w
    with np.errstate(divide="ignore"):
        energies = 20.0 * np.log10(np.linalg.norm(xf, axis=1))
    keep = energies > np.max(energies) - dyn_range
    return _overlap_add(xf[keep], hop), _overlap_add(yf[keep], hop)


def band_envelopes(x: np.ndarray) -> np.ndarray:
    """One-third-octave band magnitudes, shape (bands, frames)."""
    frames = _frames(x, N_FRAME, N_FRAME // 2) * _hann(N_FRAME)
    spec = np.fft.rfft(frames, n=NFFT, axis=1).T
    return np.sqrt(third_octave_matrix() @ np.abs(spec) ** 2)


def _normalize(seg: np.ndarray, axis: int) -> np.ndarray:
    seg = seg - seg.mean(axis=axis, keepdims=True)
    norm = np.linalg.norm(seg, axis=axis, keepdims=True)
    return np.divide(seg, norm, out=np.zeros_like(seg), where=norm > 0)


def estoi(clean, processed, fs: int = 16000) -> float:
    x = np.asarray(getattr(clean, "samples", clean), dtype=np.float64)
    y = np.asarray(getattr(processed, "samples", processed), dtype=np.float64)
    if x.shape != y.shape:
        raise ParameterError(f"signals differ in length: {x.shape[0]} vs {y.shape[0]}")
    if fs != FS:
        g = gcd(int(fs), FS)
        x = resample_poly(x, FS // g, int(fs) // g)
        y = resample_poly(y, FS // g, int(fs) // g)
    x, y = remove_silent_frames(x, y)
    x_env = band_envelopes(x)
    y_env = band_envelopes(y)
    n_frames = x_env.shape[1]
    if n_frames < SEGMENT:
        raise LengthError(
            f"need at least {SEGMENT} active frames (384 ms of speech), got {n_frames}"
        )
    xs = np.lib.stride_tricks.sliding_window_view(x_env, SEGMENT, axis=1).transpose(1, 0, 2)
    ys = np.lib.stride_tricks.sliding_window_view(y_env, SEGMENT, axis=1).transpose(1, 0, 2)
    xn = _normalize(_normalize(xs, axis=2), axis=1)
    yn = _normalize(_normalize(ys, axis=2), axis=1)
    return float(np.sum(xn * yn) / SEGMENT / xs.shape[0])
