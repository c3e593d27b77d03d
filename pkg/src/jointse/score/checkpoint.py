"""Checkpoint container: a numpy ``.npz`` with one JSON metadata entry.

Parameters are stored under ``param/<name>``; ``meta`` holds the format
version, the architecture description, SDE and spectral settings and the
training seed. Loading checks the stored settings against what the caller
expects and refuses to mix configurations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import CheckpointError, ParameterError
from ..sde import OuveParams, ScoreFunction
from ..spectral import SpectralParams
from .analytic import AnalyticGaussianScore
from .network import NetworkScore, build_network

FORMAT_VERSION = 1
ANALYTIC_KIND = "analytic_passthrough"


@dataclass
class Checkpoint:
    architecture: dict
    ouve: OuveParams
    spectral: SpectralParams
    seed: int
    parameters: dict[str, np.ndarray] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "architecture": self.architecture,
            "ouve": self.ouve.to_dict(),
            "spectral": self.spectral.to_dict(),
            "seed": int(self.seed),
            "extra": self.extra,
        }

    def network(self, dtype=torch.float32):
        if self.architecture.get("kind") == ANALYTIC_KIND:
            raise CheckpointError("analytic checkpoints carry no network")
        net = build_network(self.architecture, self.ouve, seed=self.seed)
        state = {k: torch.from_numpy(np.asarray(v)) for k, v in self.parameters.items()}
        try:
            net.load_state_dict(state, strict=True)
        except RuntimeError as exc:
            raise CheckpointError(f"parameters do not fit architecture: {exc}") from exc
        return net.to(dtype).eval()

    def score(self) -> ScoreFunction:
        if self.architecture.get("kind") == ANALYTIC_KIND:
            return AnalyticGaussianScore(None, float(self.architecture["var0"]), self.ouve)
        return NetworkScore(self.network())


def passthrough_checkpoint(ouve: OuveParams | None = None, spectral: SpectralParams | None = None,
                           var0: float = 1e-12) -> Checkpoint:
    """Analytic score of a near-delta prior at the observation (for plumbing checks)."""
    if not var0 > 0:
        raise ParameterError("var0 must be positive")
    return Checkpoint({"kind": ANALYTIC_KIND, "var0": float(var0)}, ouve or OuveParams(),
                      spectral or SpectralParams(), seed=0)


def from_network(net, ouve: OuveParams, spectral: SpectralParams, seed: int, extra: dict | None = None) -> Checkpoint:
    params = {k: v.detach().cpu().numpy().copy() for k, v in net.state_dict().items()}
    return Checkpoint(net.config(), ouve, spectral, int(seed), params, dict(extra or {}))


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {f"param/{k}": np.asarray(v) for k, v in ckpt.parameters.items()}
    arrays["meta"] = np.array(json.dumps(ckpt.metadata(), sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def _check(name: str, stored: dict, expected) -> None:
    if expected is None:
        return
    want = expected.to_dict()
    diff = sorted(k for k in set(stored) | set(want) if stored.get(k) != want.get(k))
    if diff:
        details = ", ".join(f"{k}: stored {stored.get(k)!r} vs expected {want.get(k)!r}" for k in diff)
        raise CheckpointError(f"{name} settings do not match checkpoint ({details})")


def load_checkpoint(path: str | Path, expect_ouve: OuveParams | None = None,
                    expect_spectral: SpectralParams | None = None) -> Checkpoint:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            params = {k[len("param/"):]: data[k].copy() for k in data.files if k.startswith("param/")}
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"{path}: not a readable checkpoint ({exc})") from exc
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {meta.get('format_version')!r}")
    _check("SDE", meta["ouve"], expect_ouve)
    _check("spectral", meta["spectral"], expect_spectral)
    try:
        ouve = OuveParams(**meta["ouve"])
        spectral = SpectralParams(**meta["spectral"])
    except (TypeError, ParameterError) as exc:
        raise CheckpointError(f"{path}: invalid stored settings ({exc})") from exc
    return Checkpoint(meta["architecture"], ouve, spectral, int(meta["seed"]), params, meta.get("extra", {}))
