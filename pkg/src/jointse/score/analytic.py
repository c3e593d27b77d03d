"""Exact scores for Gaussian clean data, used to verify the samplers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, DomainError, ParameterError
from ..sde import OuveParams, marginal_std, mean_weight


def marginal_moments(y, t: float, m0, var0: float, p: OuveParams):
    """Mean and total variance of x_t when x0 ~ CN(m0, var0 I)."""
    w = float(mean_weight(t, p))
    mean = w * np.asarray(m0) + (1.0 - w) * np.asarray(y)
    var = w * w * var0 + marginal_std(t, p) ** 2
    return mean, var


def analytic_score(x_t, y, t: float, m0, var0: float, p: OuveParams) -> np.ndarray:
    x_t = np.asarray(x_t)
    y = np.asarray(y)
    if x_t.shape != y.shape:
        raise DimensionError(f"x_t shape {x_t.shape} does not match y shape {y.shape}")
    if not p.t_eps - 1e-12 <= t <= p.t_max + 1e-12:
        raise DomainError(f"t={t} outside [{p.t_eps}, {p.t_max}]")
    if not var0 > 0:
        raise ParameterError("var0 must be positive")
    mean, var = marginal_moments(y, t, m0, var0, p)
    return -(x_t - mean) / var


def log_density(x_t, y, t: float, m0, var0: float, p: OuveParams) -> float:
    """Log of the circular complex Gaussian marginal density of x_t given y."""
    x_t = np.asarray(x_t, dtype=np.complex128)
    mean, var = marginal_moments(y, t, m0, var0, p)
    d = x_t.size
    return float(-d * np.log(np.pi * var) - np.sum(np.abs(x_t - mean) ** 2) / var)


@dataclass(frozen=True)
class AnalyticGaussianScore:
    """Score function of the OUVE marginal for x0 ~ CN(m0, var0 I).

    ``m0`` may be ``None``, in which case the clean mean is taken to be the
    conditioning observation itself; with a tiny ``var0`` this gives a score
    whose reverse process collapses onto ``y`` (a pass-through enhancer).
    """

    m0: np.ndarray | None
    var0: float
    p: OuveParams

    def __post_init__(self):
        if not self.var0 > 0:
            raise ParameterError("var0 must be positive")

    def __call__(self, x_t, y, t: float) -> np.ndarray:
        m0 = y if self.m0 is None else self.m0
        return analytic_score(x_t, y, t, m0, self.var0, self.p)
