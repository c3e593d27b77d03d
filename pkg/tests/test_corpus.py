from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from jointse.corpus import (
    MixtureKind,
    MixtureSpec,
    RirSpec,
    apply_rir,
    build_joint_corpus,
    build_noisy_corpus,
    build_reverb_corpus,
    compose_mixed_objective,
    fit_noise,
    impulse_rir,
    materialize,
    mix_at_snr,
    mixed_counts,
    read_manifest,
    render_entry,
    schroeder_t60,
    synthesize_rir,
    write_manifest,
)
from jointse.errors import BudgetError, EnergyError, ParameterError
from jointse.metrics import estoi
from jointse.spectral import Waveform

from oracles import naive_convolution


def _power(x):
    return float(np.mean(np.square(x)))


# ---- RIR --------------------------------------------------------------------

@pytest.mark.parametrize("t60", [0.2, 0.4, 0.7, 1.0])
def test_schroeder_t60_matches_requested(t60):
    for seed in range(3):
        h = synthesize_rir(RirSpec(t60=t60, direct_delay=40, seed=seed))
        assert abs(schroeder_t60(h) / t60 - 1) <= 0.10


def test_rir_shape_and_determinism():
    spec = RirSpec(t60=0.3, direct_delay=25, seed=4)
    h = synthesize_rir(spec)
    assert h.samples[25] == 1.0 and np.all(h.samples[:25] == 0) and np.max(np.abs(h.samples)) == 1.0
    assert np.array_equal(h.samples, synthesize_rir(spec).samples)
    assert not np.array_equal(h.samples, synthesize_rir(RirSpec(t60=0.3, direct_delay=25, seed=5)).samples)


def test_rir_zero_tail_is_delayed_impulse():
    h = synthesize_rir(RirSpec(t60=0.5, direct_delay=7, tail_length=0.0))
    expected = np.zeros(8)
    expected[7] = 1.0
    assert np.array_equal(h.samples, expected)
    assert np.array_equal(synthesize_rir(impulse_rir(3)).samples, [0, 0, 0, 1.0])


@pytest.mark.parametrize("kwargs", [
    {"t60": 0.0}, {"t60": -1.0}, {"t60": 1e-4}, {"t60": 0.5, "direct_delay": -1},
    {"t60": 0.5, "tail_length": 0.1}, {"t60": 0.5, "drr_db": math.inf},
])
def test_rir_invalid(kwargs):
    with pytest.raises(ParameterError):
        RirSpec(**kwargs)


# ---- convolution --------------------------------------------------------------

def test_apply_rir_matches_naive_convolution(rng):
    for n, m in [(1, 1), (50, 7), (1000, 300), (10_000, 600)]:
        x = Waveform(rng.standard_normal(n))
        h = Waveform(rng.standard_normal(m))
        full = naive_convolution(x.samples, h.samples)
        got = apply_rir(x, h).samples
        assert got.shape == (n,)
        assert np.max(np.abs(got - full[:n])) <= 1e-9
        d = min(5, m - 1)
        shifted = apply_rir(x, h, align_delay=d).samples
        ref = np.pad(full, (0, d))[d:d + n]
        assert np.max(np.abs(shifted - ref)) <= 1e-9


def test_apply_rir_identity_shift_and_linearity(rng):
    x = Waveform(rng.standard_normal(400))
    assert np.allclose(apply_rir(x, Waveform(np.array([1.0]))).samples, x.samples, rtol=0, atol=1e-12)
    h = Waveform(np.r_[np.zeros(9), 1.0])
    out = apply_rir(x, h).samples
    assert np.allclose(out[:9], 0, atol=1e-12) and np.allclose(out[9:], x.samples[:-9], rtol=0, atol=1e-12)
    assert np.allclose(apply_rir(x, h, align_delay=9).samples, x.samples)
    g = Waveform(rng.standard_normal(30))
    z = Waveform(rng.standard_normal(400))
    lhs = apply_rir(x.with_samples(2 * x.samples - 3 * z.samples), g).samples
    assert np.allclose(lhs, 2 * apply_rir(x, g).samples - 3 * apply_rir(z, g).samples, atol=1e-12)


def test_apply_rir_rate_mismatch():
    with pytest.raises(ParameterError):
        apply_rir(Waveform(np.ones(10), 16000), Waveform(np.ones(3), 8000))


# ---- mixing --------------------------------------------------------------------

def test_mix_equal_power_gain_is_one(rng):
    s = rng.standard_normal(5000)
    n = rng.standard_normal(5000)
    n *= math.sqrt(_power(s) / _power(n))
    y, g = mix_at_snr(Waveform(s), Waveform(n), 0.0)
    assert g == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(y.samples, s + n)


@pytest.mark.parametrize("snr", [-20.0, -2.5, 0.0, 7.3, 20.0, 60.0])
def test_mix_snr_remeasured(rng, speech, snr):
    for x in speech[:5]:
        for noise_len in (len(x) // 3, len(x), 2 * len(x)):
            n = Waveform(rng.standard_normal(noise_len))
            y, g = mix_at_snr(x, n, snr, rng)
            resid = y.samples - x.samples
            measured = 10 * math.log10(_power(x.samples) / _power(resid))
            assert abs(measured - snr) <= 0.01


def test_mix_errors(rng):
    s = Waveform(rng.standard_normal(100))
    with pytest.raises(ParameterError):
        mix_at_snr(s, s, -101.0)
    with pytest.raises(ParameterError):
        mix_at_snr(s, s, math.nan)
    with pytest.raises(EnergyError):
        mix_at_snr(Waveform(np.zeros(100)), s, 0.0)
    with pytest.raises(EnergyError):
        mix_at_snr(s, Waveform(np.zeros(100)), 0.0)
    with pytest.raises(EnergyError):
        mix_at_snr(s, Waveform(np.zeros(0)), 0.0)
    with pytest.raises(ParameterError):
        mix_at_snr(s, Waveform(np.ones(100), 8000), 0.0)


def test_fit_noise_tiles_and_crops(rng):
    n = Waveform(np.arange(10.0))
    assert np.array_equal(fit_noise(n, 25).samples, np.arange(25.0) % 10)
    tiled = fit_noise(n, 25, np.random.default_rng(0)).samples
    assert np.all(np.diff(tiled) % 10 == 1)  # circular continuation
    crop = fit_noise(n, 4, np.random.default_rng(1)).samples
    assert crop.shape == (4,) and np.all(np.diff(crop) == 1)


# ---- manifests -------------------------------------------------------------------

def _fake_sources(n_clean, n_noise=3):
    clean = {f"c{i:03d}": f"/nowhere/c{i:03d}.wav" for i in range(n_clean)}
    noise = {f"n{i}": f"/nowhere/n{i}.wav" for i in range(n_noise)}
    return clean, noise


def test_joint_corpus_counts_and_ids():
    clean, noise = _fake_sources(17)
    m = build_joint_corpus(clean, noise, master_seed=1)
    assert len(m) == 17 and len({e.id for e in m}) == 17
    assert all(e.kind is MixtureKind.NOISY_REVERB and e.rir is not None and e.snr_db is not None for e in m)
    assert m.provenance["master_seed"] == 1 and "generator" in m.provenance
    again = build_joint_corpus(clean, noise, master_seed=1)
    assert [e.to_record() for e in m] == [e.to_record() for e in again]
    other = build_joint_corpus(clean, noise, master_seed=2)
    assert [e.snr_db for e in m] != [e.snr_db for e in other]


def test_joint_corpus_snr_uniform():
    clean, noise = _fake_sources(50)
    m = build_joint_corpus(clean, noise, snr_range=(-2.5, 17.5), master_seed=11, n_entries=1000)
    snrs = np.array([e.snr_db for e in m])
    assert snrs.min() >= -2.5 and snrs.max() <= 17.5
    p = stats.kstest(snrs, stats.uniform(loc=-2.5, scale=20.0).cdf).pvalue
    assert p > 0.01


def test_corpus_errors():
    clean, noise = _fake_sources(3)
    with pytest.raises(ParameterError):
        build_joint_corpus({}, noise)
    with pytest.raises(ParameterError):
        build_joint_corpus(clean, {})
    with pytest.raises(ParameterError):
        build_noisy_corpus(clean, noise, snr_range=(0, math.inf))
    with pytest.raises(ParameterError):
        build_reverb_corpus(clean, rir_grid=[])


def test_mixture_spec_consistency():
    rir = RirSpec(t60=0.3)
    with pytest.raises(ParameterError):
        MixtureSpec("a", MixtureKind.NOISY_ONLY, "c", "c.wav")
    with pytest.raises(ParameterError):
        MixtureSpec("a", MixtureKind.REVERB_ONLY, "c", "c.wav", rir=rir, noise_id="n", snr_db=1.0)
    with pytest.raises(ParameterError):
        MixtureSpec("a", MixtureKind.NOISY_ONLY, "c", "c.wav", noise_id="n", snr_db=math.inf)
    MixtureSpec("a", MixtureKind.NOISY_REVERB, "c", "c.wav", noise_id="n", noise_path="n.wav", rir=rir, snr_db=3.0)


def test_degenerate_joint_corpus_is_clean(toy_sources):
    clean, noise = toy_sources
    m = build_joint_corpus(clean, noise, rir_grid=[impulse_rir()], snr_range=(60.0, 60.0), master_seed=0)
    for e in m:
        x, y, _ = render_entry(e)
        assert estoi(x, y) >= 0.99


@pytest.mark.parametrize("budget", range(3, 31))
def test_mixed_thirds_rule(budget):
    c = mixed_counts(budget)
    counts = [c[MixtureKind.NOISY_ONLY], c[MixtureKind.REVERB_ONLY], c[MixtureKind.NOISY_REVERB]]
    assert sum(counts) == budget and max(counts) - min(counts) <= 1
    assert counts == sorted(counts, reverse=True)  # remainder goes to NoisyOnly, then ReverbOnly
    clean, noise = _fake_sources(12)
    need = math.ceil(budget / 3)
    m = compose_mixed_objective(
        build_noisy_corpus(clean, noise, n_entries=need),
        build_reverb_corpus(clean, n_entries=need),
        build_joint_corpus(clean, noise, n_entries=need),
        budget, master_seed=budget)
    got = m.counts()
    assert [got[k] for k in MixtureKind] == counts and len(m) == budget
    assert len({e.id for e in m}) == budget


def test_mixed_examples_and_budget_error():
    assert list(mixed_counts(9).values()) == [3, 3, 3]
    assert list(mixed_counts(10).values()) == [4, 3, 3]
    clean, noise = _fake_sources(5)
    noisy = build_noisy_corpus(clean, noise, n_entries=5)
    reverb = build_reverb_corpus(clean, n_entries=3)
    joint = build_joint_corpus(clean, noise, n_entries=5)
    with pytest.raises(BudgetError) as info:
        compose_mixed_objective(noisy, reverb, joint, 12)
    assert "ReverbOnly" in str(info.value)
    with pytest.raises(ParameterError):
        compose_mixed_objective(noisy, reverb, joint, 0)
    with pytest.raises(ParameterError):
        compose_mixed_objective(joint, reverb, joint, 3)
    a = compose_mixed_objective(noisy, reverb, joint, 9, master_seed=4)
    b = compose_mixed_objective(noisy, reverb, joint, 9, master_seed=4)
    assert [e.id for e in a] == [e.id for e in b]


def test_materialize_round_trip_and_idempotent(tmp_path, toy_sources):
    clean, noise = toy_sources
    m = build_joint_corpus(clean, noise, master_seed=9, n_entries=4)
    out1 = materialize(m, tmp_path / "a")
    out2 = materialize(m, tmp_path / "b", workers=2)
    for e in out1:
        for which in ("clean", "noisy"):
            assert (tmp_path / "a" / e.paths[which]).read_bytes() == (tmp_path / "b" / e.paths[which]).read_bytes()
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == (tmp_path / "b" / "manifest.jsonl").read_bytes()
    back = read_manifest(tmp_path / "a" / "manifest.jsonl")
    assert [e.to_record() for e in back] == [e.to_record() for e in out1]
    assert back.provenance == m.provenance and back.sample_rate == 16000
    before = (tmp_path / "a" / "manifest.jsonl").read_bytes()
    materialize(back, tmp_path / "a")
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == before
    x, y = back.load_pair(back.entries[0])
    assert len(x) == len(y)
    rec = back.entries[0].to_record()
    for key in ("id", "kind", "clean", "noise", "noise_gain", "snr_db", "rir_t60", "seeds", "paths"):
        assert key in rec


def test_joint_entry_snr_against_reverberant_speech(toy_sources):
    clean, noise = toy_sources
    m = build_joint_corpus(clean, noise, master_seed=2, n_entries=3)
    from jointse.spectral import read_wav
    for e in m:
        x, y, g = render_entry(e)
        rev = apply_rir(read_wav(e.clean_path), synthesize_rir(e.rir), align_delay=e.rir.direct_delay)
        measured = 10 * math.log10(_power(rev.samples) / _power(y.samples - rev.samples))
        assert abs(measured - e.snr_db) <= 0.01


def test_write_manifest_meta(tmp_path):
    clean, noise = _fake_sources(2)
    m = build_noisy_corpus(clean, noise)
    write_manifest(m, tmp_path / "m.jsonl")
    assert (tmp_path / "m.meta.json").exists()
    assert len(read_manifest(tmp_path / "m.jsonl")) == 2
