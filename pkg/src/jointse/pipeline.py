"""Enhancement strategies and experiment execution over a manifest."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus.manifest import DatasetManifest, read_manifest
from .errors import (
    EnhancementError,
    JointSEError,
    NumericError,
    ParameterError,
    StateError,
)
from .metrics import HIGHER_IS_BETTER, MetricReport, estoi, read_external_scores, read_transcripts, snr_db, srmr, wer
from .metrics.wer import TranscriptPair
from .score.checkpoint import Checkpoint, load_checkpoint
from .sde import OuveParams, SamplerConfig, sample_reverse
from .seeding import derive_seed
from .spectral import SpectralParams, Spectrogram, Waveform, compress, decompress, istft, read_wav, stft, write_wav

log = logging.getLogger(__name__)

FAILURE_LIMIT = 0.10


@dataclass
class Enhancer:
    """A score model plus the sampler budget used to run it."""

    checkpoint: Checkpoint
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    label: str = ""
    sample_rate: int = 16000
    _score: Callable | None = field(default=None, init=False, repr=False, compare=False)

    @classmethod
    def from_file(cls, path: str | Path, sampler: SamplerConfig | None = None, label: str = "",
                  ouve: OuveParams | None = None, spectral: SpectralParams | None = None) -> Enhancer:
        ckpt = load_checkpoint(path, expect_ouve=ouve, expect_spectral=spectral)
        sr = int(ckpt.extra.get("sample_rate", 16000))
        return cls(ckpt, sampler or SamplerConfig(), label or Path(path).stem, sr)

    @property
    def ouve(self) -> OuveParams:
        return self.checkpoint.ouve

    @property
    def spectral(self) -> SpectralParams:
        return self.checkpoint.spectral

    def score(self):
        if self._score is None:
            self._score = self.checkpoint.score()
        return self._score


@dataclass(frozen=True)
class Strategy:
    stages: tuple[Enhancer, ...]
    label: str = ""

    def __post_init__(self):
        stages = tuple(self.stages)
        if len(stages) not in (1, 2):
            raise ParameterError(f"a strategy has 1 or 2 stages, got {len(stages)}")
        object.__setattr__(self, "stages", stages)
        if not self.label:
            object.__setattr__(self, "label", "-".join(e.label or f"stage{i + 1}" for i, e in enumerate(stages)))


def stage_seed(master_seed: int, utterance_id: str, stage_index: int) -> int:
    return derive_seed(master_seed, utterance_id, stage_index)


def enhance(w: Waveform, e: Enhancer, seed: int, utterance_id: str | None = None,
            stage: int | None = None) -> Waveform:
    """Run one enhancer on a waveform; the output has the input's length."""
    if w.sample_rate != e.sample_rate:
        raise ParameterError(f"input sample rate {w.sample_rate} != model sample rate {e.sample_rate}")
    y = compress(stft(w, e.spectral))
    rng = np.random.default_rng(seed)
    try:
        x = sample_reverse(y.bins, e.score(), e.ouve, e.sampler, rng)
    except NumericError as exc:
        raise EnhancementError(f"{utterance_id or 'input'}: {exc}", utterance_id=utterance_id, stage=stage) from exc
    out = istft(decompress(Spectrogram(x, e.spectral, compressed=True)), target_length=len(w),
                sample_rate=w.sample_rate)
    if not np.all(np.isfinite(out.samples)):
        raise EnhancementError(f"{utterance_id or 'input'}: non-finite output", utterance_id=utterance_id, stage=stage)
    return out


def run_strategy(w: Waveform, s: Strategy, seed: int, utterance_id: str = "",
                 stage1_dir: str | Path | None = None) -> Waveform:
    """Apply the stages in order, each with its own derived seed.

    When ``stage1_dir`` is given and the strategy is a cascade, the signal
    between the two stages is written there as ``<utterance_id>.wav``.
    """
    out = w
    for i, e in enumerate(s.stages):
        try:
            out = enhance(out, e, stage_seed(seed, utterance_id, i), utterance_id, stage=i)
        except EnhancementError as exc:
            exc.stage = i
            raise
        except JointSEError as exc:
            raise EnhancementError(f"{utterance_id}: stage {i}: {exc}", utterance_id=utterance_id, stage=i) from exc
        if stage1_dir is not None and i == 0 and len(s.stages) > 1:
            write_wav(Path(stage1_dir) / f"{utterance_id}.wav", out)
    return out


def peak_normalize(w: Waveform, reference: Waveform) -> Waveform:
    """Scale ``w`` so its peak magnitude equals the reference's."""
    peak = float(np.max(np.abs(w.samples))) if len(w) else 0.0
    ref = float(np.max(np.abs(reference.samples))) if len(reference) else 0.0
    if peak == 0.0 or ref == 0.0:
        return w
    return w.with_samples(w.samples * (ref / peak))


@dataclass
class MetricInputs:
    """Optional side inputs: transcripts (reference and hypothesis) and external scores."""

    references: dict[str, str] = field(default_factory=dict)
    hypotheses: dict[str, str] = field(default_factory=dict)
    external: dict[str, float] = field(default_factory=dict)


def compute_metrics(utterance_id: str, processed: Waveform, clean: Waveform | None, names: Sequence[str],
                    side: MetricInputs | None = None) -> dict[str, float | None]:
    """Metric values for one utterance; unavailable metrics map to ``None``."""
    side = side or MetricInputs()
    out: dict[str, float | None] = {}
    for name in names:
        if name == "estoi":
            out[name] = None if clean is None else estoi(clean, processed, processed.sample_rate)
        elif name == "srmr":
            out[name] = srmr(processed, processed.sample_rate)
        elif name == "snr":
            out[name] = None if clean is None else snr_db(clean, processed.samples - clean.samples)
        elif name == "wer":
            ref = side.references.get(utterance_id)
            hyp = side.hypotheses.get(utterance_id)
            out[name] = None if ref is None or hyp is None else wer(TranscriptPair.from_text(ref, hyp))
        elif name == "dnsmos":
            out[name] = side.external.get(utterance_id)
        else:
            raise ParameterError(f"unknown metric {name!r}")
    return out


@dataclass
class ExperimentConfig:
    manifest: DatasetManifest | str | Path
    strategy: Strategy | None
    metrics: tuple[str, ...] = ("estoi", "srmr")
    out_dir: str | Path = "results"
    master_seed: int = 0
    workers: int = 1
    keep_intermediates: bool = False
    side: MetricInputs = field(default_factory=MetricInputs)
    label: str = ""
    # evaluate pre-computed outputs (``<id>.wav``) instead of enhancing
    enhanced_dir: str | Path | None = None

    def __post_init__(self):
        unknown = [m for m in self.metrics if m not in HIGHER_IS_BETTER]
        if unknown:
            raise ParameterError(f"unknown metrics {unknown}")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if self.strategy is None and self.enhanced_dir is None:
            raise ParameterError("need a strategy or a directory of enhanced outputs")
        if self.enhanced_dir is not None and not Path(self.enhanced_dir).is_dir():
            raise ParameterError(f"enhanced directory {self.enhanced_dir} does not exist")
        if not isinstance(self.manifest, DatasetManifest):
            if not Path(self.manifest).exists():
                raise ParameterError(f"manifest {self.manifest} does not exist")
            self.manifest = read_manifest(self.manifest)

    @property
    def run_label(self) -> str:
        return self.label or (self.strategy.label if self.strategy else Path(self.enhanced_dir).name)


def load_side_inputs(reference: str | Path | None = None, hypothesis: str | Path | None = None,
                     external: str | Path | None = None) -> MetricInputs:
    return MetricInputs(
        references=read_transcripts(reference) if reference else {},
        hypotheses=read_transcripts(hypothesis) if hypothesis else {},
        external=read_external_scores(external) if external else {},
    )


def _row_path(out: Path, uid: str) -> Path:
    return out / "rows" / f"{uid}.json"


def run_experiment(cfg: ExperimentConfig) -> MetricReport:
    """Enhance and score every manifest entry; resumable by utterance id.

    Writes ``enhanced/<id>.wav``, one ``rows/<id>.json`` per finished
    utterance, then ``results.csv`` and ``summary.json``. Failed utterances
    are recorded and skipped; more than 10% failures marks the run failed.
    """
    out = Path(cfg.out_dir)
    (out / "rows").mkdir(parents=True, exist_ok=True)
    manifest = cfg.manifest
    metrics = list(cfg.metrics)
    stage1 = out / "stage1" if cfg.keep_intermediates else None

    def work(entry) -> tuple[str, dict | None, str | None]:
        uid = entry.id
        row_file = _row_path(out, uid)
        if row_file.exists():
            return uid, json.loads(row_file.read_text(encoding="utf-8"))["values"], None
        try:
            clean, noisy = manifest.load_pair(entry)
            if cfg.enhanced_dir is not None:
                processed = read_wav(Path(cfg.enhanced_dir) / f"{uid}.wav")
            else:
                enh_file = out / "enhanced" / f"{uid}.wav"
                processed = run_strategy(noisy, cfg.strategy, cfg.master_seed, uid, stage1)
                write_wav(enh_file, processed)
                processed = read_wav(enh_file)
            if len(processed) != len(clean):
                raise StateError(f"{uid}: output length {len(processed)} != reference length {len(clean)}")
            values = compute_metrics(uid, peak_normalize(processed, noisy), clean, metrics, cfg.side)
        except (JointSEError, OSError, ValueError) as exc:
            log.warning("utterance %s failed: %s", uid, exc)
            return uid, None, f"{type(exc).__name__}: {exc}"
        row_file.write_text(json.dumps({"id": uid, "values": values}, sort_keys=True) + "\n", encoding="utf-8")
        return uid, values, None

    entries = list(manifest)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, entries))
    else:
        results = [work(e) for e in entries]

    report = MetricReport(metrics=metrics, label=cfg.run_label)
    for uid, values, error in results:
        if error is not None:
            report.failures[uid] = error
        else:
            report.add(uid, values)
    n = len(entries)
    failed = n > 0 and len(report.failures) / n > FAILURE_LIMIT
    report.write_csv(out / "results.csv")
    report.write_summary(out / "summary.json", extra={"status": "failed" if failed else "ok", "n_entries": n})
    return report


def run_status(out_dir: str | Path) -> str:
    return json.loads((Path(out_dir) / "summary.json").read_text(encoding="utf-8")).get("status", "ok")

