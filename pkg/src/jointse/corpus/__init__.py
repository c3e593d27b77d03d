from .manifest import (
    DatasetManifest,
    MixtureKind,
    MixtureSpec,
    build_joint_corpus,
    build_noisy_corpus,
    build_reverb_corpus,
    compose_mixed_objective,
    materialize,
    mixed_counts,
    read_manifest,
    render_entry,
    write_manifest,
)
from .mixing import apply_rir, fit_noise, mix_at_snr
from .rir import RirSpec, energy_decay_curve, impulse_rir, schroeder_t60, synthesize_rir
from .synth import synth_noise, synth_utterance, write_toy_sources

__all__ = [
    "DatasetManifest",
    "MixtureKind",
    "MixtureSpec",
    "RirSpec",
    "apply_rir",
    "build_joint_corpus",
    "build_noisy_corpus",
    "build_reverb_corpus",
    "compose_mixed_objective",
    "energy_decay_curve",
    "fit_noise",
    "impulse_rir",
    "materialize",
    "mix_at_snr",
    "mixed_counts",
    "read_manifest",
    "render_entry",
    "schroeder_t60",
    "synth_noise",
    "synth_utterance",
    "synthesize_rir",
    "write_manifest",
    "write_toy_sources",
]
