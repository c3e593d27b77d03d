"""Fitting score networks by denoising score matching."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from ..errors import NumericError, ParameterError, TrainingError
from ..sde import OuveParams, complex_normal, marginal_std, mean_weight
from ..spectral import SpectralParams, compress, stft
from .dsm import DsmDraws, draw_dsm
from .network import flat_parameters, from_channels, to_channels

log = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "momentum")


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings.

    The step direction is the gradient of the batch loss divided by the number
    of complex components per item, so the learning rate does not depend on
    the crop size. ``t_eps=None`` takes the value from the SDE parameters.
    """

    learning_rate: float = 1e-2
    batch_size: int = 4
    n_steps: int = 500
    t_eps: float | None = None
    seed: int = 0
    optimizer: str = "momentum"
    momentum: float = 0.9
    crop_frames: int = 64
    clip_norm: float | None = 1.0

    def __post_init__(self):
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ParameterError("learning_rate must be finite and >= 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.n_steps < 1:
            raise ParameterError("n_steps must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ParameterError(f"optimizer must be one of {OPTIMIZERS}")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError("momentum must be in [0, 1)")
        if self.crop_frames < 1:
            raise ParameterError("crop_frames must be >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ParameterError("clip_norm must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    parameters: dict[str, np.ndarray]
    losses: list[float]
    seed: int
    config: dict = field(default_factory=dict)


class SpectrogramPairs:
    """Compressed (clean, observation) spectrogram pairs with random frame crops."""

    def __init__(self, pairs: list[tuple[np.ndarray, np.ndarray]], crop_frames: int):
        if not pairs:
            raise ParameterError("training set is empty")
        self.pairs = pairs
        self.crop_frames = int(crop_frames)

    @classmethod
    def from_manifest(cls, manifest, spectral: SpectralParams, crop_frames: int) -> SpectrogramPairs:
        if len(manifest) == 0:
            raise ParameterError("training manifest is empty")
        pairs = []
        for entry in manifest:
            clean, noisy = manifest.load_pair(entry)
            pairs.append((compress(stft(clean, spectral)).bins, compress(stft(noisy, spectral)).bins))
        return cls(pairs, crop_frames)

    def sample(self, rng: np.random.Generator, batch_size: int) -> tuple[np.ndarray, np.ndarray]:
        idx = rng.integers(0, len(self.pairs), size=batch_size)
        n_f = self.pairs[0][0].shape[0]
        x0 = np.zeros((batch_size, n_f, self.crop_frames), dtype=np.complex128)
        y = np.zeros_like(x0)
        for b, i in enumerate(idx):
            cx, cy = self.pairs[i]
            n_k = cx.shape[1]
            if n_k <= self.crop_frames:
                x0[b, :, :n_k] = cx
                y[b, :, :n_k] = cy
            else:
                k = int(rng.integers(0, n_k - self.crop_frames + 1))
                x0[b] = cx[:, k:k + self.crop_frames]
                y[b] = cy[:, k:k + self.crop_frames]
        return x0, y


@dataclass
class GaussianToyData:
    """x0 ~ CN(m0, var0 I) with a fixed observation y per draw."""

    m0: np.ndarray
    var0: float
    y: np.ndarray

    def sample(self, rng: np.random.Generator, batch_size: int) -> tuple[np.ndarray, np.ndarray]:
        shape = (batch_size, *np.shape(self.m0))
        x0 = self.m0 + math.sqrt(self.var0) * complex_normal(rng, shape)
        return x0, np.broadcast_to(self.y, shape).copy()


def batch_loss(net: nn.Module, x0, y, draws: DsmDraws, p: OuveParams) -> torch.Tensor:
    """Differentiable DSM loss (batch mean of squared residual norms)."""
    dtype = next(net.parameters()).dtype
    t = np.asarray(draws.t, dtype=np.float64)
    shape = (-1,) + (1,) * (np.ndim(x0) - 1)
    w = mean_weight(t, p).reshape(shape)
    std = np.asarray(marginal_std(t, p), dtype=np.float64).reshape(shape)
    x_t = w * x0 + (1 - w) * y + std * draws.z
    xs = to_channels(x_t).to(dtype)
    ys = to_channels(np.asarray(y)).to(dtype)
    ts = torch.from_numpy(t).to(dtype)
    s = from_channels(net(xs, ys, ts))
    target = torch.from_numpy(np.ascontiguousarray(draws.z / std)).to(s.dtype)
    res = s + target
    per_item = (res.real**2 + res.imag**2).reshape(len(t), -1).sum(dim=1)
    return per_item.mean()


def loss_and_grad(net: nn.Module, x0, y, draws: DsmDraws, p: OuveParams) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient, flattened in ``net.parameters()`` order."""
    net.zero_grad(set_to_none=True)
    loss = batch_loss(net, x0, y, draws, p)
    if not torch.isfinite(loss):
        raise NumericError("non-finite loss")
    loss.backward()
    grads = [(v.grad if v.grad is not None else torch.zeros_like(v)).reshape(-1) for v in net.parameters()]
    return float(loss.detach()), torch.cat(grads).detach().cpu().numpy().astype(np.float64)


def train(net: nn.Module, data, cfg: TrainConfig, p: OuveParams | None = None,
          spectral: SpectralParams | None = None, callback=None) -> TrainResult:
    """Fit ``net`` in place and return its final parameters and the loss trace.

    ``data`` is a manifest (with materialized audio) or any object exposing
    ``sample(rng, batch_size) -> (x0, y)``. Randomness comes from ``cfg.seed``
    alone, so equal inputs give bit-identical traces.
    """
    p = p or getattr(net, "p", None) or OuveParams()
    if cfg.t_eps is not None:
        p = OuveParams(gamma=p.gamma, sigma_min=p.sigma_min, sigma_max=p.sigma_max, t_max=p.t_max, t_eps=cfg.t_eps)
    if not hasattr(data, "sample"):
        data = SpectrogramPairs.from_manifest(data, spectral or SpectralParams(), cfg.crop_frames)
    rng = np.random.default_rng(cfg.seed)
    momentum = cfg.momentum if cfg.optimizer == "momentum" else 0.0
    opt = torch.optim.SGD(net.parameters(), lr=cfg.learning_rate, momentum=momentum)
    losses = []
    net.train()
    for step in range(1, cfg.n_steps + 1):
        x0, y = data.sample(rng, cfg.batch_size)
        draws = draw_dsm(x0.shape, p, rng)
        opt.zero_grad(set_to_none=True)
        loss = batch_loss(net, x0, y, draws, p)
        value = float(loss.detach())
        if not math.isfinite(value):
            raise TrainingError(f"loss diverged at step {step}", step=step)
        (loss / (x0[0].size)).backward()
        if cfg.clip_norm is not None:
            nn.utils.clip_grad_norm_(net.parameters(), cfg.clip_norm)
        opt.step()
        if not all(torch.isfinite(v).all() for v in net.parameters()):
            raise TrainingError(f"parameters became non-finite at step {step}", step=step)
        losses.append(value)
        if callback is not None:
            callback(step, value, net)
        if step % 50 == 0:
            log.info("step %d loss %.4g", step, value)
    net.eval()
    params = {k: v.detach().cpu().numpy().copy() for k, v in net.state_dict().items()}
    return TrainResult(parameters=params, losses=losses, seed=cfg.seed, config=cfg.to_dict())


def average_parameters(snapshots: list[dict]) -> dict:
    """Element-wise mean of state dicts (iterate averaging over checkpoints)."""
    if not snapshots:
        raise ParameterError("no snapshots to average")
    keys = snapshots[0].keys()
    return {k: sum(torch.as_tensor(s[k]) for s in snapshots) / len(snapshots) for k in keys}


def smoothed(losses, window: int = 10) -> np.ndarray:
    """Trailing moving average; the first entries average what is available."""
    x = np.asarray(losses, dtype=np.float64)
    c = np.cumsum(np.insert(x, 0, 0.0))
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


__all__ = [
    "GaussianToyData",
    "SpectrogramPairs",
    "TrainConfig",
    "TrainResult",
    "average_parameters",
    "batch_loss",
    "flat_parameters",
    "loss_and_grad",
    "smoothed",
    "train",
]
