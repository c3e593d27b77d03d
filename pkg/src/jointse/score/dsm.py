"""Denoising score matching objective, framework-free.

For a pair (x0, y), draw t ~ U(t_eps, t_max) and z ~ CN(0, I), form
x_t = mean(t) + std(t) z and score the residual ||s(x_t, y, t) + z / std(t)||^2.
The loss is the batch mean of that squared norm (no weighting over t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..sde import OuveParams, ScoreFunction, complex_normal, perturbation_kernel


@dataclass(frozen=True)
class DsmDraws:
    t: np.ndarray
    z: np.ndarray

    def permuted(self, order) -> DsmDraws:
        order = np.asarray(order)
        return DsmDraws(self.t[order], self.z[order])


def draw_dsm(shape: tuple[int, ...], p: OuveParams, rng: np.random.Generator) -> DsmDraws:
    """Times and unit complex noise for a batch of shape ``(B, ...)``."""
    if not shape or shape[0] < 1:
        raise ParameterError("batch must be non-empty")
    t = rng.uniform(p.t_eps, p.t_max, size=shape[0])
    return DsmDraws(t=t, z=complex_normal(rng, shape))


def perturb(x0: np.ndarray, y: np.ndarray, draws: DsmDraws, p: OuveParams):
    """Perturbed states and kernel stds for each batch item."""
    x_t = np.empty(np.shape(x0), dtype=np.complex128)
    std = np.empty(len(draws.t))
    for b, t in enumerate(draws.t):
        m = perturbation_kernel(x0[b], y[b], float(t), p)
        x_t[b] = m.mean + m.std * draws.z[b]
        std[b] = m.std
    return x_t, std


def dsm_loss(
    score: ScoreFunction,
    x0: np.ndarray,
    y: np.ndarray,
    p: OuveParams,
    rng: np.random.Generator | None = None,
    draws: DsmDraws | None = None,
) -> float:
    x0 = np.asarray(x0)
    y = np.asarray(y)
    if x0.ndim == 0 or x0.shape[0] == 0:
        raise ParameterError("batch must be non-empty")
    if x0.shape != y.shape:
        raise ParameterError(f"x0 shape {x0.shape} does not match y shape {y.shape}")
    if draws is None:
        if rng is None:
            raise ParameterError("need either rng or pre-drawn randomness")
        draws = draw_dsm(x0.shape, p, rng)
    x_t, std = perturb(x0, y, draws, p)
    total = 0.0
    for b in range(x0.shape[0]):
        s = np.asarray(score(x_t[b], y[b], float(draws.t[b])))
        total += float(np.sum(np.abs(s + draws.z[b] / std[b]) ** 2))
    return total / x0.shape[0]
