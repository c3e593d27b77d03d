"""STFT front-end and magnitude compression.

Diffusion runs on the complex STFT after the magnitude compression
``v -> scale * |v|**alpha * exp(1j * angle(v))``. Frames are centred with
reflection padding of ``fft_size // 2`` samples on both sides; the last
partial frame is zero-padded. The inverse uses window-weighted overlap-add,
so any window whose squared overlap-add never vanishes reconstructs exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import EmptySignalError, ParameterError, StateError

WINDOWS = ("hann", "sqrt_hann", "hamming", "rect")


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ParameterError(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> Waveform:
        return Waveform(samples, self.sample_rate)


@dataclass(frozen=True)
class SpectralParams:
    window_length: int = 510
    hop: int = 128
    fft_size: int = 512
    window: str = "hann"
    compress_alpha: float = 0.5
    compress_scale: float = 0.15

    def __post_init__(self):
        if not 0 < self.hop <= self.window_length <= self.fft_size:
            raise ParameterError(
                "need 0 < hop <= window_length <= fft_size, got "
                f"hop={self.hop}, window_length={self.window_length}, fft_size={self.fft_size}"
            )
        if self.fft_size % 2:
            raise ParameterError("fft_size must be even")
        if self.window not in WINDOWS:
            raise ParameterError(f"unknown window {self.window!r}; choose from {WINDOWS}")
        if not 0.0 < self.compress_alpha <= 1.0:
            raise ParameterError(f"compress_alpha must lie in (0, 1], got {self.compress_alpha}")
        if not self.compress_scale > 0.0:
            raise ParameterError(f"compress_scale must be positive, got {self.compress_scale}")
        # Weighted overlap-add needs sum_k w^2(n - k*hop) > 0 everywhere.
        if overlap_add_floor(self) <= 1e-8:
            raise ParameterError(
                f"window {self.window!r} of length {self.window_length} does not overlap-add "
                f"at hop {self.hop}"
            )

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def to_dict(self) -> dict:
        return {
            "window_length": self.window_length,
            "hop": self.hop,
            "fft_size": self.fft_size,
            "window": self.window,
            "compress_alpha": self.compress_alpha,
            "compress_scale": self.compress_scale,
        }


def make_window(p: SpectralParams) -> np.ndarray:
    """Analysis window of length ``fft_size`` (taper centred, zeros outside)."""
    n = p.window_length
    k = np.arange(n)
    if p.window == "hann":
        w = 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)
    elif p.window == "sqrt_hann":
        w = np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * k / n))
    elif p.window == "hamming":
        w = 0.54 - 0.46 * np.cos(2.0 * np.pi * k / n)
    else:
        w = np.ones(n)
    full = np.zeros(p.fft_size)
    left = (p.fft_size - n) // 2
    full[left:left + n] = w
    return full


def overlap_add_floor(p: SpectralParams) -> float:
    """Minimum of the steady-state squared-window overlap-add."""
    w2 = make_window(p) ** 2
    period = np.zeros(p.hop)
    for start in range(0, p.fft_size, p.hop):
        chunk = w2[start:start + p.hop]
        period[: chunk.shape[0]] += chunk
    return float(period.min())


@dataclass(frozen=True)
class Spectrogram:
    bins: np.ndarray
    params: SpectralParams = field(default_factory=SpectralParams)
    compressed: bool = False

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.complex128)
        if bins.ndim != 2 or bins.shape[0] != self.params.n_bins:
            raise ParameterError(
                f"expected {self.params.n_bins} x K bins, got shape {bins.shape}"
            )
        if not np.all(np.isfinite(bins)):
            raise ParameterError("spectrogram contains non-finite entries")
        object.__setattr__(self, "bins", bins)

    @property
    def n_frames(self) -> int:
        return self.bins.shape[1]

    def flatten(self) -> np.ndarray:
        """Length F*K vector with the bin index varying fastest."""
        return self.bins.ravel(order="F").copy()

    @classmethod
    def from_flat(
        cls, vec: np.ndarray, params: SpectralParams, compressed: bool = False
    ) -> Spectrogram:
        vec = np.asarray(vec)
        if vec.ndim != 1 or vec.shape[0] % params.n_bins:
            raise ParameterError(
                f"flat vector of length {vec.shape} is not a multiple of {params.n_bins}"
            )
        return cls(vec.reshape(params.n_bins, -1, order="F"), params, compressed)


def n_frames_for(length: int, p: SpectralParams) -> int:
    padded = length + 2 * (p.fft_size // 2)
    return 1 + max(0, math.ceil((padded - p.fft_size) / p.hop))


def stft(w: Waveform, p: SpectralParams | None = None) -> Spectrogram:
    p = p or SpectralParams()
    x = w.samples
    if x.shape[0] == 0:
        raise EmptySignalError("cannot transform an empty waveform")
    pad = p.fft_size // 2
    xp = np.pad(x, pad, mode="reflect") if x.shape[0] > 1 else np.pad(x, pad)
    k = n_frames_for(x.shape[0], p)
    total = (k - 1) * p.hop + p.fft_size
    xp = np.pad(xp, (0, total - xp.shape[0]))
    frames = np.lib.stride_tricks.sliding_window_view(xp, p.fft_size)[:: p.hop]
    spec = np.fft.rfft(frames * make_window(p), axis=1).T
    return Spectrogram(spec, p, compressed=False)


def istft(s: Spectrogram, p: SpectralParams | None = None, target_length: int | None = None,
          sample_rate: int = 16000) -> Waveform:
    p = p or s.params
    if s.compressed:
        raise StateError("istft needs an uncompressed spectrogram; call decompress first")
    if p != s.params:
        raise ParameterError("spectral params do not match the spectrogram")
    win = make_window(p)
    frames = np.fft.irfft(s.bins.T, n=p.fft_size, axis=1) * win
    k = frames.shape[0]
    total = (k - 1) * p.hop + p.fft_size
    out = np.zeros(total)
    norm = np.zeros(total)
    w2 = win**2
    for i in range(k):
        start = i * p.hop
        out[start:start + p.fft_size] += frames[i]
        norm[start:start + p.fft_size] += w2
    nz = norm > 1e-10
    out[nz] /= norm[nz]
    pad = p.fft_size // 2
    if target_length is None:
        target_length = total - 2 * pad
    out = out[pad:pad + target_length]
    if out.shape[0] < target_length:
        out = np.pad(out, (0, target_length - out.shape[0]))
    return Waveform(out, sample_rate)


def compress(s: Spectrogram, alpha: float | None = None, scale: float | None = None) -> Spectrogram:
    if s.compressed:
        raise StateError("spectrogram is already compressed")
    alpha = s.params.compress_alpha if alpha is None else alpha
    scale = s.params.compress_scale if scale is None else scale
    if not 0.0 < alpha <= 1.0 or scale <= 0.0:
        raise ParameterError(f"invalid compression alpha={alpha}, scale={scale}")
    mag = np.abs(s.bins)
    out = scale * mag**alpha * np.exp(1j * np.angle(s.bins))
    return replace(s, bins=out, compressed=True)


def decompress(s: Spectrogram, alpha: float | None = None, scale: float | None = None) -> Spectrogram:
    """Invert :func:`compress`.

    The (alpha, scale) pair used for compression is not stored in the bins, so a
    mismatch cannot be detected here; passing the right pair is up to the caller.
    """
    if not s.compressed:
        raise StateError("spectrogram is not compressed")
    alpha = s.params.compress_alpha if alpha is None else alpha
    scale = s.params.compress_scale if scale is None else scale
    if alpha == 0.0 or scale <= 0.0:
        raise ParameterError(f"invalid compression alpha={alpha}, scale={scale}")
    mag = (np.abs(s.bins) / scale) ** (1.0 / alpha)
    out = mag * np.exp(1j * np.angle(s.bins))
    return replace(s, bins=out, compressed=False)


def read_wav(path: str | Path) -> Waveform:
    """Read a mono WAV file (16-bit PCM, 32-bit PCM or float) as float64."""
    rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ParameterError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype.kind == "f":
        samples = data.astype(np.float64)
    else:
        raise ParameterError(f"{path}: unsupported sample format {data.dtype}")
    return Waveform(samples, int(rate))


def write_wav(path: str | Path, w: Waveform) -> None:
    """Write as 32-bit float WAV."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), w.sample_rate, w.samples.astype(np.float32))
