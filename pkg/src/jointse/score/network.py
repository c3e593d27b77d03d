"""Trainable score estimators (torch).

Complex inputs travel as paired real channels. Both networks return
``raw / sigma(t)`` so the output already lives on the scale of the
perturbation score ``-z / sigma(t)``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..errors import NumericError, ParameterError
from ..sde import OuveParams


def fourier_features(t: torch.Tensor, n_features: int = 16, max_freq: float = 32.0) -> torch.Tensor:
    """Deterministic sin/cos features of process time, shape ``(B, n_features)``."""
    if n_features % 2:
        raise ParameterError("n_features must be even")
    half = n_features // 2
    freqs = torch.exp(torch.linspace(0.0, math.log(max_freq), half, dtype=t.dtype, device=t.device))
    arg = 2.0 * math.pi * t[:, None] * freqs[None, :]
    return torch.cat([torch.sin(arg), torch.cos(arg)], dim=1)


def sigma_t(t: torch.Tensor, p: OuveParams) -> torch.Tensor:
    """Torch twin of ``sde.marginal_std`` for batched times."""
    lr = p.log_ratio
    var = p.sigma_min**2 * (torch.exp(2 * lr * t) - torch.exp(-2 * p.gamma * t)) * lr / (p.gamma + lr)
    return torch.sqrt(var)


def to_channels(z: np.ndarray | torch.Tensor) -> torch.Tensor:
    """Complex ``(B, ...)`` to real ``(B, 2, ...)``."""
    if isinstance(z, np.ndarray):
        z = torch.from_numpy(np.ascontiguousarray(z))
    return torch.stack([z.real, z.imag], dim=1)


def from_channels(t: torch.Tensor) -> torch.Tensor:
    return torch.complex(t[:, 0], t[:, 1])


class _Block(nn.Module):
    def __init__(self, c_in: int, c_out: int, n_time: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.time = nn.Linear(n_time, c_out)

    def forward(self, h, emb):
        h = F.silu(self.conv1(h))
        h = h + self.time(emb)[:, :, None, None]
        return F.silu(self.conv2(h))


class ToyScoreNet(nn.Module):
    """Small 2-D convolutional encoder-decoder over (frequency, frame).

    Parameters
    ----------
    p : OuveParams
        Sets the ``1 / sigma(t)`` output scaling and the input normalisation.
    widths : sequence of int
        Channel count per resolution level.
    n_time : int
        Size of the Fourier time embedding added at every level.
    """

    kind = "toy_unet"

    def __init__(self, p: OuveParams | None = None, widths: Sequence[int] = (16, 32, 64), n_time: int = 16):
        super().__init__()
        widths = tuple(int(w) for w in widths)
        if len(widths) < 1 or min(widths) < 1:
            raise ParameterError("widths must be positive")
        self.p = p or OuveParams()
        self.widths = widths
        self.n_time = int(n_time)
        self.down = nn.ModuleList()
        c = 4
        for w in widths:
            self.down.append(_Block(c, w, self.n_time))
            c = w
        self.up = nn.ModuleList()
        for w_skip in reversed(widths[:-1]):
            self.up.append(_Block(c + w_skip, w_skip, self.n_time))
            c = w_skip
        self.head = nn.Conv2d(c, 2, 1)

    def config(self) -> dict:
        return {"kind": self.kind, "widths": list(self.widths), "n_time": self.n_time}

    def forward(self, x_t: torch.Tensor, y: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        """Real-channel score; ``x_t`` and ``y`` are ``(B, 2, F, K)``, ``t`` is ``(B,)``."""
        sig = sigma_t(t, self.p)[:, None, None, None]
        # on the 1/sigma scale the target -z is a near-linear map of the inputs
        # wherever the clean spectrum is small compared with sigma
        h = torch.cat([x_t / sig, y / sig], dim=1)
        n_f, n_k = h.shape[-2:]
        mult = 2 ** (len(self.widths) - 1)
        h = F.pad(h, (0, -n_k % mult, 0, -n_f % mult))
        emb = fourier_features(t, self.n_time)
        skips = []
        for i, block in enumerate(self.down):
            if i:
                h = F.avg_pool2d(h, 2)
            h = block(h, emb)
            skips.append(h)
        skips.pop()
        for block in self.up:
            h = F.interpolate(h, scale_factor=2.0, mode="nearest")
            h = block(torch.cat([h, skips.pop()], dim=1), emb)
        out = self.head(h)[..., :n_f, :n_k]
        return out / sig


class AffineScoreNet(nn.Module):
    """Score affine in ``(x_t, y)`` with time-varying coefficients.

    ``s = (a(t) x_t + b(t) y + c(t)) / sigma(t)`` where ``a, b`` are scalars and
    ``c`` a complex vector, all linear in the Fourier features of ``t``. This
    family contains the exact score of Gaussian data up to feature resolution.
    """

    kind = "affine"

    def __init__(self, dim: int, p: OuveParams | None = None, n_time: int = 16):
        super().__init__()
        if dim < 1:
            raise ParameterError("dim must be >= 1")
        self.p = p or OuveParams()
        self.dim = int(dim)
        self.n_time = int(n_time)
        n_feat = self.n_time + 1
        self.ab = nn.Linear(n_feat, 2, bias=False)
        self.c = nn.Linear(n_feat, 2 * self.dim, bias=False)

    def config(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "n_time": self.n_time}

    def forward(self, x_t: torch.Tensor, y: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        """``x_t`` and ``y`` are ``(B, 2, dim)``."""
        feat = torch.cat([torch.ones_like(t)[:, None], fourier_features(t, self.n_time, max_freq=2.0)], dim=1)
        ab = self.ab(feat)
        c = self.c(feat).reshape(-1, 2, self.dim)
        out = ab[:, 0, None, None] * x_t + ab[:, 1, None, None] * y + c
        return out / sigma_t(t, self.p)[:, None, None]


def build_network(config: dict, p: OuveParams, seed: int = 0) -> nn.Module:
    """Instantiate from ``config()`` output with seeded initial weights."""
    kind = config.get("kind")
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed))
        if kind == ToyScoreNet.kind:
            return ToyScoreNet(p, widths=config.get("widths", (16, 32, 64)), n_time=config.get("n_time", 16))
        if kind == AffineScoreNet.kind:
            return AffineScoreNet(int(config["dim"]), p, n_time=config.get("n_time", 16))
    raise ParameterError(f"unknown network kind {kind!r}")


def n_parameters(net: nn.Module) -> int:
    return sum(int(v.numel()) for v in net.parameters())


def flat_parameters(net: nn.Module) -> np.ndarray:
    return torch.cat([v.detach().reshape(-1) for v in net.parameters()]).cpu().numpy().astype(np.float64)


class NetworkScore:
    """Adapt a torch score network to the complex numpy ``ScoreFunction`` contract."""

    def __init__(self, net: nn.Module):
        self.net = net.eval()
        self.dtype = next(net.parameters()).dtype

    def __call__(self, x_t, y, t: float) -> np.ndarray:
        x_t = np.asarray(x_t)
        y = np.asarray(y)
        with torch.no_grad():
            xs = to_channels(x_t[None]).to(self.dtype)
            ys = to_channels(y[None]).to(self.dtype)
            ts = torch.tensor([float(t)], dtype=self.dtype)
            out = from_channels(self.net(xs, ys, ts))[0].numpy()
        if not np.all(np.isfinite(out)):
            raise NumericError("score network produced non-finite values")
        return out.astype(np.complex128)
