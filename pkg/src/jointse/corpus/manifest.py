"""Declarative degraded-speech datasets and their rendering to disk.

A manifest lists one :class:`MixtureSpec` per utterance. Building a manifest
only draws the random degradation parameters; :func:`materialize` renders the
clean target and degraded observation of every entry to WAV files and fills
in the noise gains. All draws derive from a master seed, so a manifest and
its audio are a pure function of (sources, configuration, master seed).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import BudgetError, ParameterError
from ..seeding import derive_seed
from ..spectral import Waveform, read_wav, write_wav
from .mixing import apply_rir, mix_at_snr
from .rir import RirSpec, synthesize_rir

GENERATOR_VERSION = "jointse-corpus/1"
DEFAULT_SNR_RANGE = (-2.5, 17.5)
DEFAULT_T60_RANGE = (0.2, 1.0)
DEFAULT_DELAY_RANGE = (0, 80)


class MixtureKind(str, Enum):
    NOISY_ONLY = "NoisyOnly"
    REVERB_ONLY = "ReverbOnly"
    NOISY_REVERB = "NoisyReverb"

    @property
    def has_noise(self) -> bool:
        return self is not MixtureKind.REVERB_ONLY

    @property
    def has_rir(self) -> bool:
        return self is not MixtureKind.NOISY_ONLY


@dataclass(frozen=True)
class MixtureSpec:
    id: str
    kind: MixtureKind
    clean_id: str
    clean_path: str
    noise_id: str | None = None
    noise_path: str | None = None
    rir: RirSpec | None = None
    snr_db: float | None = None
    seed: int = 0
    noise_gain: float | None = None
    paths: Mapping[str, str] | None = None

    def __post_init__(self):
        kind = MixtureKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.has_noise != (self.noise_id is not None):
            raise ParameterError(f"{self.id}: kind {kind.value} inconsistent with noise presence")
        if kind.has_rir != (self.rir is not None):
            raise ParameterError(f"{self.id}: kind {kind.value} inconsistent with RIR presence")
        if (self.snr_db is not None) != kind.has_noise:
            raise ParameterError(f"{self.id}: snr_db is required exactly when noise is present")
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise ParameterError(f"{self.id}: snr_db must be finite")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "clean": self.clean_id,
            "noise": self.noise_id,
            "noise_gain": self.noise_gain,
            "snr_db": self.snr_db,
            "rir_t60": None if self.rir is None else self.rir.t60,
            "rir": None if self.rir is None else self.rir.to_dict(),
            "seeds": {"mix": self.seed, "rir": None if self.rir is None else self.rir.seed},
            "sources": {"clean": self.clean_path, "noise": self.noise_path},
            "paths": None if self.paths is None else dict(self.paths),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> MixtureSpec:
        rir = None if rec.get("rir") is None else RirSpec(**rec["rir"])
        return cls(
            id=rec["id"],
            kind=MixtureKind(rec["kind"]),
            clean_id=rec["clean"],
            clean_path=rec["sources"]["clean"],
            noise_id=rec["noise"],
            noise_path=rec["sources"]["noise"],
            rir=rir,
            snr_db=rec["snr_db"],
            seed=rec["seeds"]["mix"],
            noise_gain=rec["noise_gain"],
            paths=rec.get("paths"),
        )


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[MixtureSpec, ...]
    sample_rate: int = 16000
    provenance: Mapping = field(default_factory=dict)
    root: Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ParameterError("manifest ids are not unique")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def counts(self) -> dict[MixtureKind, int]:
        out = {k: 0 for k in MixtureKind}
        for e in self.entries:
            out[e.kind] += 1
        return out

    def path(self, entry: MixtureSpec, which: str) -> Path:
        if entry.paths is None or which not in entry.paths:
            raise ParameterError(f"{entry.id}: manifest is not materialized")
        p = Path(entry.paths[which])
        return p if p.is_absolute() or self.root is None else self.root / p

    def load_pair(self, entry: MixtureSpec) -> tuple[Waveform, Waveform]:
        """(clean target, degraded observation) of a materialized entry."""
        return read_wav(self.path(entry, "clean")), read_wav(self.path(entry, "noisy"))


def _sorted_items(sources: Mapping[str, str | Path]) -> list[tuple[str, str]]:
    if not sources:
        raise ParameterError("source set is empty")
    return [(k, str(sources[k])) for k in sorted(sources)]


def _build(
    kind: MixtureKind,
    clean: Mapping[str, str | Path],
    noise: Mapping[str, str | Path] | None,
    rir_grid: Sequence[RirSpec] | None,
    snr_range: tuple[float, float],
    t60_range: tuple[float, float],
    master_seed: int,
    n_entries: int | None,
    sample_rate: int,
    delay_range: tuple[int, int],
) -> DatasetManifest:
    clean_items = _sorted_items(clean)
    noise_items = _sorted_items(noise) if kind.has_noise else []
    lo, hi = snr_range
    if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
        raise ParameterError(f"invalid SNR range {snr_range}")
    if rir_grid is not None and len(rir_grid) == 0:
        raise ParameterError("rir grid is empty")
    n = len(clean_items) if n_entries is None else n_entries
    if n < 1:
        raise ParameterError("n_entries must be positive")

    entries = []
    for i in range(n):
        seed = derive_seed(master_seed, kind.value, i)
        rng = np.random.default_rng(seed)
        clean_id, clean_path = clean_items[i % len(clean_items)]
        noise_id = noise_path = snr = rir = None
        if kind.has_noise:
            noise_id, noise_path = noise_items[int(rng.integers(len(noise_items)))]
            snr = float(rng.uniform(lo, hi))
        if kind.has_rir:
            rir_seed = derive_seed(seed, "rir")
            if rir_grid is None:
                rir = RirSpec(
                    t60=float(rng.uniform(*t60_range)),
                    direct_delay=int(rng.integers(delay_range[0], delay_range[1] + 1)),
                    sample_rate=sample_rate,
                    seed=rir_seed,
                )
            else:
                template = rir_grid[int(rng.integers(len(rir_grid)))]
                rir = replace(template, seed=rir_seed)
        entries.append(
            MixtureSpec(
                id=f"{kind.value.lower()}-{i:05d}-{clean_id}",
                kind=kind,
                clean_id=clean_id,
                clean_path=clean_path,
                noise_id=noise_id,
                noise_path=noise_path,
                rir=rir,
                snr_db=snr,
                seed=seed,
            )
        )
    provenance = {"generator": GENERATOR_VERSION, "master_seed": master_seed, "kind": kind.value}
    return DatasetManifest(tuple(entries), sample_rate, provenance)


def build_noisy_corpus(clean, noise, snr_range=DEFAULT_SNR_RANGE, master_seed: int = 0,
                       n_entries: int | None = None, sample_rate: int = 16000) -> DatasetManifest:
    return _build(MixtureKind.NOISY_ONLY, clean, noise, None, snr_range, DEFAULT_T60_RANGE,
                  master_seed, n_entries, sample_rate, DEFAULT_DELAY_RANGE)


def build_reverb_corpus(clean, rir_grid: Sequence[RirSpec] | None = None,
                        t60_range=DEFAULT_T60_RANGE, master_seed: int = 0,
                        n_entries: int | None = None, sample_rate: int = 16000,
                        delay_range=DEFAULT_DELAY_RANGE) -> DatasetManifest:
    return _build(MixtureKind.REVERB_ONLY, clean, None, rir_grid, DEFAULT_SNR_RANGE, t60_range,
                  master_seed, n_entries, sample_rate, delay_range)


def build_joint_corpus(clean, noise, rir_grid: Sequence[RirSpec] | None = None,
                       snr_range=DEFAULT_SNR_RANGE, master_seed: int = 0,
                       n_entries: int | None = None, sample_rate: int = 16000,
                       t60_range=DEFAULT_T60_RANGE,
                       delay_range=DEFAULT_DELAY_RANGE) -> DatasetManifest:
    """Noisy-reverberant corpus: every clean utterance is reverberated, then noise is
    added at an SNR measured against the reverberant speech."""
    return _build(MixtureKind.NOISY_REVERB, clean, noise, rir_grid, snr_range, t60_range,
                  master_seed, n_entries, sample_rate, delay_range)


def mixed_counts(total_budget: int) -> dict[MixtureKind, int]:
    base, rem = divmod(total_budget, 3)
    order = (MixtureKind.NOISY_ONLY, MixtureKind.REVERB_ONLY, MixtureKind.NOISY_REVERB)
    return {k: base + (1 if i < rem else 0) for i, k in enumerate(order)}


def compose_mixed_objective(
    noisy: DatasetManifest,
    reverb: DatasetManifest,
    joint: DatasetManifest,
    total_budget: int,
    master_seed: int = 0,
) -> DatasetManifest:
    """Draw a third of ``total_budget`` from each single- and joint-distortion set.

    Remainders go to NoisyOnly first, then ReverbOnly. Selection is without
    replacement and keeps source order.
    """
    if total_budget < 1:
        raise ParameterError("total_budget must be positive")
    need = math.ceil(total_budget / 3)
    sources = {MixtureKind.NOISY_ONLY: noisy, MixtureKind.REVERB_ONLY: reverb,
               MixtureKind.NOISY_REVERB: joint}
    for kind, src in sources.items():
        if len(src) < need:
            raise BudgetError(
                f"{kind.value} source has {len(src)} entries, needs {need} for budget {total_budget}",
                kind=kind.value,
            )
        if any(e.kind is not kind for e in src):
            raise ParameterError(f"source for {kind.value} contains entries of another kind")
    entries = []
    roots = {src.root for src in sources.values()}
    for kind, count in mixed_counts(total_budget).items():
        src = sources[kind]
        rng = np.random.default_rng(derive_seed(master_seed, "mixed", kind.value))
        picks = np.sort(rng.choice(len(src), size=count, replace=False))
        for j in picks:
            e = src.entries[int(j)]
            if e.paths is not None and src.root is not None and len(roots) > 1:
                e = replace(e, paths={k: str(src.root / v) for k, v in e.paths.items()})
            entries.append(e)
    provenance = {"generator": GENERATOR_VERSION, "master_seed": master_seed, "kind": "Mixed",
                  "total_budget": total_budget}
    root = next(iter(roots)) if len(roots) == 1 else None
    return DatasetManifest(tuple(entries), noisy.sample_rate, provenance, root)


def render_entry(entry: MixtureSpec, sample_rate: int = 16000) -> tuple[Waveform, Waveform, float | None]:
    """Return (clean target, degraded observation, noise gain) for one entry."""
    x = read_wav(entry.clean_path)
    if x.sample_rate != sample_rate:
        raise ParameterError(f"{entry.clean_path}: sample rate {x.sample_rate} != {sample_rate}")
    rng = np.random.default_rng(entry.seed)
    y = x
    if entry.rir is not None:
        h = synthesize_rir(entry.rir)
        y = apply_rir(x, h, align_delay=entry.rir.direct_delay)
    gain = None
    if entry.noise_path is not None:
        n = read_wav(entry.noise_path)
        y, gain = mix_at_snr(y, n, entry.snr_db, rng)
    return x, y, gain


def materialize(manifest: DatasetManifest, out_dir: str | Path, name: str = "manifest",
                workers: int = 1) -> DatasetManifest:
    """Render every entry under ``out_dir`` and write ``<name>.jsonl`` there."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(entry: MixtureSpec) -> MixtureSpec:
        x, y, gain = render_entry(entry, manifest.sample_rate)
        rel = {"clean": f"clean/{entry.id}.wav", "noisy": f"noisy/{entry.id}.wav"}
        write_wav(out_dir / rel["clean"], x)
        write_wav(out_dir / rel["noisy"], y)
        return replace(entry, noise_gain=gain, paths=rel)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rendered = list(pool.map(work, manifest.entries))
    else:
        rendered = [work(e) for e in manifest.entries]
    result = DatasetManifest(tuple(rendered), manifest.sample_rate, manifest.provenance, out_dir)
    write_manifest(result, out_dir / f"{name}.jsonl")
    return result


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(e.to_record(), sort_keys=True) for e in manifest.entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {"sample_rate": manifest.sample_rate, "provenance": dict(manifest.provenance),
            "n_entries": len(manifest)}
    meta_path = path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            entries.append(MixtureSpec.from_record(json.loads(line)))
    meta_path = path.with_suffix(".meta.json")
    sample_rate, provenance = 16000, {}
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        sample_rate, provenance = meta["sample_rate"], meta["provenance"]
    return DatasetManifest(tuple(entries), sample_rate, provenance, path.parent)
