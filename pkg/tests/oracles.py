"""Independent reference computations used by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np

from jointse.sde import complex_normal, diffusion_coeff


def naive_convolution(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Direct O(n*m) full linear convolution."""
    out = np.zeros(len(x) + len(h) - 1)
    for k, hk in enumerate(h):
        if hk != 0.0:
            out[k:k + len(x)] += hk * x
    return out


def two_pass_moments(values) -> tuple[float, float]:
    v = [float(a) for a in values]
    mean = math.fsum(v) / len(v)
    if len(v) == 1:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((a - mean) ** 2 for a in v) / (len(v) - 1))


def all_sequences(max_len: int, vocab: int):
    by_len = {}
    for n in range(max_len + 1):
        by_len[n] = np.array(list(itertools.product(range(vocab), repeat=n)), dtype=np.int64).reshape(vocab**n, n)
    return by_len


def exhaustive_edit_distance(refs: np.ndarray, hyps: np.ndarray) -> np.ndarray:
    """Minimum edit cost over all alignments, for every (ref, hyp) pair of two fixed lengths.

    An alignment pairs k reference words with k hypothesis words, increasing in
    both indices. Its cost is (k - matches) substitutions + (n - k) deletions
    + (m - k) insertions. Every such pairing is enumerated depth first; the
    match count of a pairing is its parent's plus one equality table.
    """
    n, m = refs.shape[1], hyps.shape[1]
    eq = [[(refs[:, i, None] == hyps[None, :, j]).astype(np.int16) for j in range(m)] for i in range(n)]
    best = np.full((len(refs), len(hyps)), n + m, dtype=np.int16)

    def extend(i0, j0, k, matches):
        for i in range(i0, n):
            for j in range(j0, m):
                total = matches + eq[i][j]
                np.minimum(best, n + m - (k + 1) - total, out=best)
                extend(i + 1, j + 1, k + 1, total)

    extend(0, 0, 0, np.zeros_like(best))
    return best


def bandpass_power_response(freqs: np.ndarray, cf: float, q: float) -> np.ndarray:
    """|H|^2 of the analog second-order band-pass with unit peak gain."""
    w = 2 * np.pi * freqs
    w0 = 2 * np.pi * cf
    num = (w * w0 / q) ** 2
    return num / ((w0**2 - w**2) ** 2 + num)


def euler_maruyama(x0, y, t, p, n_paths, n_steps, rng):
    """Complex forward paths of dx = gamma (y - x) dt + g(t) dw."""
    x = np.full(n_paths, x0, dtype=np.complex128)
    dt = t / n_steps
    for i in range(n_steps):
        s = i * dt
        x = x + p.gamma * (y - x) * dt + diffusion_coeff(s, p) * math.sqrt(dt) * complex_normal(rng, n_paths)
    return x
