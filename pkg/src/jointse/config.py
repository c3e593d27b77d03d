"""Run configuration: one YAML file, sections named after the modules."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .metrics.report import KNOWN_METRICS
from .score.training import TrainConfig
from .sde import OuveParams, SamplerConfig
from .spectral import SpectralParams


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SpectralSection(_Section):
    window_length: int = 510
    hop: int = 128
    fft_size: int = 512
    window: str = "hann"
    compress_alpha: float = 0.5
    compress_scale: float = 0.15

    def build(self) -> SpectralParams:
        return SpectralParams(**self.model_dump())


class SdeSection(_Section):
    gamma: float = 1.5
    sigma_min: float = 0.05
    sigma_max: float = 0.5
    t_max: float = 1.0
    t_eps: float = 0.03

    def build(self) -> OuveParams:
        return OuveParams(**self.model_dump())


class SamplerSection(_Section):
    n_predictor_steps: int = 30
    n_corrector_steps: int = 1
    corrector_snr: float = 0.5

    def build(self) -> SamplerConfig:
        return SamplerConfig(**self.model_dump())


class NetworkSection(_Section):
    widths: list[int] = Field(default_factory=lambda: [16, 32, 64])
    n_time: int = 16


class TrainingSection(_Section):
    learning_rate: float = 1e-2
    batch_size: int = 4
    n_steps: int = 500
    t_eps: Optional[float] = None
    optimizer: Literal["sgd", "momentum"] = "momentum"
    momentum: float = 0.9
    crop_frames: int = 64
    clip_norm: Optional[float] = 1.0
    network: NetworkSection = Field(default_factory=NetworkSection)

    def build(self, seed: int) -> TrainConfig:
        d = self.model_dump(exclude={"network"})
        return TrainConfig(seed=seed, **d)


class SyntheticSources(_Section):
    n_clean: int = 20
    n_noise: int = 4
    duration: float = 2.0


class RirEntry(_Section):
    t60: float
    direct_delay: int = 0
    drr_db: float = 0.0


class CorpusSection(_Section):
    kind: Literal["noisy", "reverb", "joint", "mixed"] = "joint"
    n_entries: int = 20
    sample_rate: int = 16000
    clean_dir: Optional[str] = None
    noise_dir: Optional[str] = None
    synthetic: Optional[SyntheticSources] = None
    snr_range: tuple[float, float] = (-2.5, 17.5)
    t60_range: tuple[float, float] = (0.2, 1.0)
    delay_range: tuple[int, int] = (0, 80)
    rir: Optional[Literal["impulse"]] = None
    rir_grid: Optional[list[RirEntry]] = None

    @model_validator(mode="after")
    def _sources(self):
        if self.clean_dir is None and self.synthetic is None:
            raise ValueError("corpus needs clean_dir or a synthetic section")
        if self.n_entries < 1:
            raise ValueError("n_entries must be >= 1")
        if self.rir is not None and self.rir_grid is not None:
            raise ValueError("give either rir or rir_grid, not both")
        return self


class StageSection(_Section):
    label: str
    checkpoint: str  # path, or "passthrough"


class StrategySection(_Section):
    label: str = ""
    stages: list[StageSection]

    @field_validator("stages")
    @classmethod
    def _length(cls, v):
        if len(v) not in (1, 2):
            raise ValueError("a strategy has 1 or 2 stages")
        return v


class PathsSection(_Section):
    out: str = "runs"
    manifest: Optional[str] = None
    reference_transcripts: Optional[str] = None
    hypothesis_transcripts: Optional[str] = None
    external_scores: Optional[str] = None


class RunConfig(_Section):
    seed: int = 0
    workers: int = 1
    spectral: SpectralSection = Field(default_factory=SpectralSection)
    sde: SdeSection = Field(default_factory=SdeSection)
    sampler: SamplerSection = Field(default_factory=SamplerSection)
    training: TrainingSection = Field(default_factory=TrainingSection)
    corpus: Optional[CorpusSection] = None
    strategy: Optional[StrategySection] = None
    metrics: list[str] = Field(default_factory=lambda: ["estoi", "srmr"])
    paths: PathsSection = Field(default_factory=PathsSection)

    @field_validator("metrics")
    @classmethod
    def _known(cls, v):
        bad = [m for m in v if m not in KNOWN_METRICS]
        if bad:
            raise ValueError(f"unknown metrics {bad}; known: {list(KNOWN_METRICS)}")
        return v

    @field_validator("workers")
    @classmethod
    def _workers(cls, v):
        if v < 1:
            raise ValueError("workers must be >= 1")
        return v

    def resolved(self) -> dict:
        return self.model_dump(mode="json")

    def digest(self, sections: tuple[str, ...] | None = None) -> str:
        """Hash of the resolved config, optionally restricted to some top-level keys."""
        tree = self.resolved()
        if sections is not None:
            tree = {k: tree[k] for k in sections}
        blob = json.dumps(tree, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _set_path(tree: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        if node.get(k) is None:
            node[k] = {}
        node = node[k]
        if not isinstance(node, dict):
            raise ValueError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    """``section.key=value`` with the value parsed as YAML."""
    if "=" not in text:
        raise ValueError(f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    tree: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if loaded is not None and not isinstance(loaded, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        tree = loaded or {}
    for key, value in (overrides or {}).items():
        _set_path(tree, key, value)
    return RunConfig.model_validate(tree)


def write_resolved(cfg: RunConfig, directory: str | Path) -> Path:
    path = Path(directory) / "resolved_config.yaml"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(cfg.resolved(), sort_keys=True), encoding="utf-8")
    return path
