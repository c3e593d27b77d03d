"""Synthetic speech-shaped signals and noises for desk-scale corpora.

Utterances are strings of vowel-like syllables: a harmonic source with a
drifting f0, shaped by three formant resonances and a spectral tilt, under a
raised-cosine syllable envelope at roughly 4 Hz, with occasional fricative
bursts and short pauses. Good enough to exercise intelligibility and
modulation metrics; not meant to sound like a person.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import signal

from ..spectral import Waveform, write_wav


def _formant_gain(freqs, formants, bandwidths):
    gain = np.zeros_like(freqs)
    for f, bw in zip(formants, bandwidths):
        gain += 1.0 / (1.0 + ((freqs - f) / bw) ** 2)
    return gain


def synth_utterance(
    rng: np.random.Generator,
    duration: float = 2.0,
    sample_rate: int = 16000,
    rms: float = 0.05,
) -> Waveform:
    n = int(round(duration * sample_rate))
    out = np.zeros(n)
    base_f0 = rng.uniform(90.0, 220.0)
    pos = int(rng.uniform(0.05, 0.15) * sample_rate)
    while pos < n:
        syl_len = int(rng.uniform(0.12, 0.28) * sample_rate)
        seg_end = min(n, pos + syl_len)
        m = seg_end - pos
        if m < 16:
            break
        t = np.arange(m) / sample_rate
        f0 = base_f0 * (1.0 + rng.uniform(-0.15, 0.15)) * (1.0 + 0.05 * np.sin(2 * np.pi * rng.uniform(2, 5) * t))
        phase = 2 * np.pi * np.cumsum(f0) / sample_rate
        formants = (rng.uniform(300, 850), rng.uniform(900, 2300), rng.uniform(2400, 3200))
        bandwidths = (80.0, 120.0, 180.0)
        seg = np.zeros(m)
        n_harm = int(min(40, (sample_rate / 2 - 200) // f0.max()))
        for k in range(1, n_harm + 1):
            fk = k * f0.mean()
            amp = _formant_gain(np.array([fk]), formants, bandwidths)[0] * (fk / 100.0) ** -0.5
            seg += amp * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
        env = np.sin(np.pi * np.arange(m) / m) ** 2
        if rng.random() < 0.3:
            # fricative onset
            fl = min(m, int(rng.uniform(0.03, 0.07) * sample_rate))
            b, a = signal.butter(4, [3000, 6500], btype="bandpass", fs=sample_rate)
            fric = signal.lfilter(b, a, rng.standard_normal(fl)) * np.hanning(fl)
            seg[:fl] += fric * 2.0 * np.std(seg)
        out[pos:seg_end] += seg * env
        pos = seg_end + int(rng.uniform(0.03, 0.18) * sample_rate)
    out += 1e-4 * rms * rng.standard_normal(n)
    out *= rms / np.sqrt(np.mean(out**2))
    return Waveform(out, sample_rate)


def synth_noise(
    rng: np.random.Generator,
    duration: float = 2.0,
    sample_rate: int = 16000,
    kind: str = "pink",
    rms: float = 0.05,
) -> Waveform:
    n = int(round(duration * sample_rate))
    white = rng.standard_normal(n)
    if kind == "white":
        x = white
    elif kind == "pink":
        spec = np.fft.rfft(white)
        f = np.fft.rfftfreq(n, 1.0 / sample_rate)
        spec[1:] /= np.sqrt(f[1:] / f[1])
        spec[0] = 0.0
        x = np.fft.irfft(spec, n)
    elif kind == "babble":
        x = np.zeros(n)
        for _ in range(6):
            x += synth_utterance(rng, duration, sample_rate, rms=1.0).samples
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    x *= rms / np.sqrt(np.mean(x**2))
    return Waveform(x, sample_rate)


def write_toy_sources(
    root: str | Path,
    n_clean: int,
    n_noise: int,
    seed: int,
    duration: float = 2.0,
    sample_rate: int = 16000,
) -> tuple[dict[str, Path], dict[str, Path]]:
    """Render a toy clean/noise source set as WAV files under ``root``."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    clean, noise = {}, {}
    for i in range(n_clean):
        path = root / "clean" / f"utt{i:03d}.wav"
        write_wav(path, synth_utterance(rng, duration, sample_rate))
        clean[path.stem] = path
    kinds = ("pink", "babble", "white")
    for i in range(n_noise):
        path = root / "noise" / f"noise{i:03d}.wav"
        write_wav(path, synth_noise(rng, duration * 1.5, sample_rate, kind=kinds[i % len(kinds)]))
        noise[path.stem] = path
    return clean, noise
