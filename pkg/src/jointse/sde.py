"""Ornstein-Uhlenbeck variance-exploding (OUVE) diffusion.

Forward process::

    dx_t = gamma * (y - x_t) dt + g(t) dw,
    g(t) = sigma_min * (sigma_max / sigma_min)**t * sqrt(2 * log(sigma_max / sigma_min))

Complex states use circularly-symmetric noise whose real and imaginary parts
are i.i.d. N(0, 1/2), so a complex Wiener increment has total variance ``dt``
and ``std**2`` below is the total complex variance. Scores follow the same
convention: for a complex Gaussian with mean ``m`` and total variance ``v`` the
score is ``-(x - m) / v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, DomainError, NumericError, ParameterError

ScoreFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

_T_TOL = 1e-12


@dataclass(frozen=True)
class OuveParams:
    gamma: float = 1.5
    sigma_min: float = 0.05
    sigma_max: float = 0.5
    t_max: float = 1.0
    t_eps: float = 0.03

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.sigma_min < self.sigma_max:
            raise ParameterError(
                f"need 0 < sigma_min < sigma_max, got {self.sigma_min}, {self.sigma_max}"
            )
        if not 0 < self.t_eps < self.t_max:
            raise ParameterError(f"need 0 < t_eps < t_max, got {self.t_eps}, {self.t_max}")

    @property
    def log_ratio(self) -> float:
        return math.log(self.sigma_max / self.sigma_min)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "t_max": self.t_max,
            "t_eps": self.t_eps,
        }


@dataclass(frozen=True)
class DiffusionState:
    x_t: np.ndarray
    t: float


@dataclass(frozen=True)
class PerturbationMoments:
    mean: np.ndarray
    std: float


@dataclass(frozen=True)
class SamplerConfig:
    n_predictor_steps: int = 30
    n_corrector_steps: int = 1
    corrector_snr: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_predictor_steps < 1:
            raise ParameterError("n_predictor_steps must be at least 1")
        if self.n_corrector_steps < 0:
            raise ParameterError("n_corrector_steps must be non-negative")
        if not self.corrector_snr > 0:
            raise ParameterError("corrector_snr must be positive")

    def to_dict(self) -> dict:
        return {
            "n_predictor_steps": self.n_predictor_steps,
            "n_corrector_steps": self.n_corrector_steps,
            "corrector_snr": self.corrector_snr,
            "seed": self.seed,
        }


def _check_time(t, p: OuveParams):
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < -_T_TOL) or np.any(t_arr > p.t_max + _T_TOL) or not np.all(np.isfinite(t_arr)):
        raise DomainError(f"process time {t} outside [0, {p.t_max}]")
    return t_arr


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian draws."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * math.sqrt(0.5)


def drift(x_t: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    x_t = np.asarray(x_t)
    y = np.asarray(y)
    if x_t.shape != y.shape:
        raise DimensionError(f"x_t shape {x_t.shape} does not match y shape {y.shape}")
    return gamma * (y - x_t)


def diffusion_coeff(t, p: OuveParams):
    t_arr = _check_time(t, p)
    ratio = p.sigma_max / p.sigma_min
    g = p.sigma_min * ratio**t_arr * math.sqrt(2.0 * p.log_ratio)
    return float(g) if g.ndim == 0 else g


def marginal_std(t, p: OuveParams):
    """Standard deviation of the perturbation kernel at time ``t``.

    Solves dv/dt = -2 gamma v + g(t)^2 with v(0) = 0.
    """
    t_arr = _check_time(t, p)
    lr = p.log_ratio
    ratio = p.sigma_max / p.sigma_min
    var = p.sigma_min**2 * (ratio ** (2.0 * t_arr) - np.exp(-2.0 * p.gamma * t_arr)) * lr
    var /= p.gamma + lr
    std = np.sqrt(np.maximum(var, 0.0))
    return float(std) if std.ndim == 0 else std


def mean_weight(t, p: OuveParams):
    """Weight ``exp(-gamma t)`` on x0 in the kernel mean."""
    return np.exp(-p.gamma * np.asarray(t, dtype=np.float64))


def perturbation_kernel(x0: np.ndarray, y: np.ndarray, t: float, p: OuveParams) -> PerturbationMoments:
    x0 = np.asarray(x0)
    y = np.asarray(y)
    if x0.shape != y.shape:
        raise DimensionError(f"x0 shape {x0.shape} does not match y shape {y.shape}")
    _check_time(t, p)
    w = mean_weight(t, p)
    return PerturbationMoments(mean=w * x0 + (1.0 - w) * y, std=marginal_std(t, p))


def sample_forward(x0, y, t: float, p: OuveParams, rng: np.random.Generator) -> DiffusionState:
    moments = perturbation_kernel(x0, y, t, p)
    z = complex_normal(rng, np.shape(moments.mean))
    return DiffusionState(x_t=moments.mean + moments.std * z, t=float(t))


def time_grid(p: OuveParams, n_steps: int) -> np.ndarray:
    return np.linspace(p.t_max, p.t_eps, n_steps + 1)


def sample_reverse(
    y: np.ndarray,
    score: ScoreFunction,
    p: OuveParams,
    cfg: SamplerConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Predictor-corrector sampling of the reverse OUVE process.

    Starts from ``x_T ~ N(y, std(T)^2)``, then for each of the uniform steps
    from ``t_max`` down to ``t_eps`` takes one reverse Euler-Maruyama step
    followed by ``n_corrector_steps`` annealed Langevin steps with step size
    ``2 * (corrector_snr * std(t))**2``. Returns the state reached at ``t_eps``.
    """
    if cfg.n_predictor_steps < 1:
        raise ParameterError("n_predictor_steps must be at least 1")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    y = np.asarray(y, dtype=np.complex128)
    grid = time_grid(p, cfg.n_predictor_steps)
    x = y + marginal_std(p.t_max, p) * complex_normal(rng, y.shape)

    for i in range(cfg.n_predictor_steps):
        t, t_next = grid[i], grid[i + 1]
        dt = t - t_next
        s = _eval_score(score, x, y, t, i)
        g = diffusion_coeff(t, p)
        rev_drift = drift(x, y, p.gamma) - g * g * s
        x = x - rev_drift * dt + g * math.sqrt(dt) * complex_normal(rng, y.shape)

        if cfg.n_corrector_steps:
            step = 2.0 * (cfg.corrector_snr * marginal_std(t_next, p)) ** 2
            for _ in range(cfg.n_corrector_steps):
                s = _eval_score(score, x, y, t_next, i)
                x = x + step * s + math.sqrt(2.0 * step) * complex_normal(rng, y.shape)

    if not np.all(np.isfinite(x)):
        raise NumericError("reverse sampler produced non-finite output", step=cfg.n_predictor_steps)
    return x


def _eval_score(score: ScoreFunction, x, y, t: float, step: int) -> np.ndarray:
    s = np.asarray(score(x, y, float(t)))
    if s.shape != x.shape:
        raise DimensionError(f"score returned shape {s.shape}, expected {x.shape}")
    if not np.all(np.isfinite(s)):
        raise NumericError(f"score returned non-finite values at predictor step {step} (t={t:.4f})",
                           step=step)
    return s
