from __future__ import annotations

import math

import numpy as np
import pytest
import torch
from scipy import integrate

from jointse.errors import CheckpointError, DimensionError, DomainError, ParameterError, TrainingError
from jointse.score import (
    AnalyticGaussianScore,
    GaussianToyData,
    NetworkScore,
    SpectrogramPairs,
    ToyScoreNet,
    TrainConfig,
    analytic_score,
    build_network,
    draw_dsm,
    dsm_loss,
    from_network,
    load_checkpoint,
    log_density,
    loss_and_grad,
    n_parameters,
    passthrough_checkpoint,
    save_checkpoint,
    smoothed,
    train,
)
from jointse.score.network import flat_parameters
from jointse.score.training import batch_loss
from jointse.sde import OuveParams, complex_normal, marginal_std, mean_weight
from jointse.spectral import SpectralParams

import toy

P = OuveParams()


# ---- analytic score ---------------------------------------------------------------

def test_analytic_zero_at_mean(rng):
    m0 = complex_normal(rng, (5,))
    y = complex_normal(rng, (5,))
    for t in (0.03, 0.4, 1.0):
        w = mean_weight(t, P)
        mu = w * m0 + (1 - w) * y
        assert np.max(np.abs(analytic_score(mu, y, t, m0, 0.3, P))) <= 1e-12


def test_analytic_delta_limit(rng):
    p = OuveParams(t_eps=1e-9)
    m0 = complex_normal(rng, (4,))
    y = complex_normal(rng, (4,))
    x = m0 + 1e-3 * complex_normal(rng, (4,))
    t = 1e-8
    got = analytic_score(x, y, t, m0, 1e-16, p)
    want = -(x - m0) / marginal_std(t, p) ** 2
    assert np.allclose(got, want, rtol=1e-3, atol=0)


def test_analytic_matches_log_density_gradient(rng):
    h = 1e-6
    for _ in range(5):
        m0 = complex_normal(rng, (1,))
        y = complex_normal(rng, (1,))
        x = complex_normal(rng, (1,))
        var0 = float(rng.uniform(0.05, 2.0))
        t = float(rng.uniform(P.t_eps, P.t_max))
        lp = lambda z: log_density(z, y, t, m0, var0, P)  # noqa: E731
        d_re = (lp(x + h) - lp(x - h)) / (2 * h)
        d_im = (lp(x + 1j * h) - lp(x - 1j * h)) / (2 * h)
        fd = 0.5 * (d_re + 1j * d_im)  # Wirtinger derivative of a real function
        s = analytic_score(x, y, t, m0, var0, P)[0]
        assert abs(fd - s) <= 1e-6 * abs(s)


def test_analytic_errors(rng):
    x = complex_normal(rng, (3,))
    with pytest.raises(DomainError):
        analytic_score(x, x, 0.0, x, 1.0, P)
    with pytest.raises(DomainError):
        analytic_score(x, x, 1.5, x, 1.0, P)
    with pytest.raises(DimensionError):
        analytic_score(x, x[:2], 0.5, x, 1.0, P)
    with pytest.raises(ParameterError):
        AnalyticGaussianScore(None, 0.0, P)


# ---- DSM loss --------------------------------------------------------------------

def test_dsm_oracle_score_gives_zero(rng):
    x0 = complex_normal(rng, (6, 10))
    y = complex_normal(rng, (6, 10))
    draws = draw_dsm(x0.shape, P, rng)
    by_t = {}
    for b, t in enumerate(draws.t):
        by_t[float(t)] = -draws.z[b] / marginal_std(float(t), P)
    cheat = lambda x_t, y_, t: by_t[t]  # noqa: E731
    assert dsm_loss(cheat, x0, y, P, draws=draws) <= 1e-20


def _expected_zero_score_loss(p, d):
    val, _ = integrate.quad(lambda t: 1.0 / marginal_std(t, p) ** 2, p.t_eps, p.t_max, limit=200)
    return d * val / (p.t_max - p.t_eps)


def test_dsm_zero_score_monte_carlo_vs_quadrature():
    d = 2
    rng = np.random.default_rng(31)
    n = 100_000
    x0 = complex_normal(rng, (n, d))
    y = complex_normal(rng, (n, d))
    zero = lambda x_t, y_, t: np.zeros_like(x_t)  # noqa: E731
    mc = dsm_loss(zero, x0, y, P, rng=rng)
    assert abs(mc / _expected_zero_score_loss(P, d) - 1) <= 0.02


def test_dsm_analytic_beats_zero_and_permutation(rng):
    m0, y, data = toy.gaussian_task()
    x0, ys = data.sample(rng, 64)
    draws = draw_dsm(x0.shape, P, rng)
    exact = AnalyticGaussianScore(m0, toy.VAR0, P)
    zero = lambda x_t, y_, t: np.zeros_like(x_t)  # noqa: E731
    a = dsm_loss(exact, x0, ys, P, draws=draws)
    assert 0 <= a <= dsm_loss(zero, x0, ys, P, draws=draws)
    order = rng.permutation(64)
    b = dsm_loss(exact, x0[order], ys[order], P, draws=draws.permuted(order))
    assert b == pytest.approx(a, rel=1e-12)


def test_dsm_errors(rng):
    zero = lambda x_t, y_, t: np.zeros_like(x_t)  # noqa: E731
    with pytest.raises(ParameterError):
        dsm_loss(zero, np.zeros((0, 3)), np.zeros((0, 3)), P, rng=rng)
    with pytest.raises(ParameterError):
        dsm_loss(zero, np.zeros((2, 3)), np.zeros((2, 4)), P, rng=rng)
    with pytest.raises(ParameterError):
        dsm_loss(zero, np.zeros((2, 3)), np.zeros((2, 3)), P)
    with pytest.raises(ParameterError):
        draw_dsm((0, 3), P, rng)


def test_batch_loss_agrees_with_numpy_loss(rng):
    net = ToyScoreNet(P).double()
    x0 = complex_normal(rng, (3, 9, 6))
    y = x0 + 0.3 * complex_normal(rng, (3, 9, 6))
    draws = draw_dsm(x0.shape, P, rng)
    with torch.no_grad():
        tl = float(batch_loss(net, x0, y, draws, P))
    assert tl == pytest.approx(dsm_loss(NetworkScore(net), x0, y, P, draws=draws), rel=1e-9)


# ---- gradients ---------------------------------------------------------------------

def _grad_setup(seed=0, batch=2):
    torch.manual_seed(seed)
    net = ToyScoreNet(P).double()
    rng = np.random.default_rng(seed)
    x0 = complex_normal(rng, (batch, 8, 12))
    y = x0 + 0.3 * complex_normal(rng, (batch, 8, 12))
    draws = draw_dsm(x0.shape, P, rng)
    return net, x0, y, draws


def test_gradient_matches_finite_differences():
    for grad, fd in toy.gradient_check():
        assert toy.relative_gap(grad, fd) <= 1e-4, (grad, fd)


def test_gradient_of_duplicated_batch():
    net, x0, y, draws = _grad_setup(batch=2)
    l1, g1 = loss_and_grad(net, x0, y, draws, P)
    dup = draws.permuted([0, 1, 0, 1])
    l2, g2 = loss_and_grad(net, np.concatenate([x0, x0]), np.concatenate([y, y]), dup, P)
    assert l2 == pytest.approx(l1, rel=1e-12)
    assert np.allclose(g2, g1, rtol=1e-10, atol=1e-14)


def test_zero_head_blocks_earlier_gradients():
    net, x0, y, draws = _grad_setup()
    with torch.no_grad():
        net.head.weight.zero_()
        net.head.bias.zero_()
    loss_and_grad(net, x0, y, draws, P)
    for name, v in net.named_parameters():
        if not name.startswith("head."):
            assert v.grad is None or torch.count_nonzero(v.grad) == 0, name
    assert torch.count_nonzero(net.head.weight.grad) > 0


# ---- network ------------------------------------------------------------------------

def test_toy_net_shape_and_size():
    net = ToyScoreNet(P)
    assert 50_000 <= n_parameters(net) <= 200_000
    x = torch.randn(2, 2, 257, 13)
    out = net(x, x, torch.tensor([0.1, 0.9]))
    assert out.shape == x.shape and torch.isfinite(out).all()
    score = NetworkScore(net)
    z = complex_normal(np.random.default_rng(0), (257, 13))
    assert score(z, z, 0.5).shape == z.shape


def test_build_network_seeded():
    a = build_network({"kind": "toy_unet", "widths": [8, 16], "n_time": 8}, P, seed=4)
    b = build_network({"kind": "toy_unet", "widths": [8, 16], "n_time": 8}, P, seed=4)
    c = build_network({"kind": "toy_unet", "widths": [8, 16], "n_time": 8}, P, seed=5)
    assert np.array_equal(flat_parameters(a), flat_parameters(b))
    assert not np.array_equal(flat_parameters(a), flat_parameters(c))
    with pytest.raises(ParameterError):
        build_network({"kind": "resnet"}, P)


# ---- training -------------------------------------------------------------------------

def _small_data():
    rng = np.random.default_rng(0)
    m0 = complex_normal(rng, (8, 8))
    return GaussianToyData(m0, 0.1, m0 + 0.2)


def test_train_config_validation():
    for bad in ({"learning_rate": -1.0}, {"learning_rate": math.nan}, {"batch_size": 0}, {"n_steps": 0},
                {"optimizer": "adam"}, {"momentum": 1.0}, {"clip_norm": 0.0}):
        with pytest.raises(ParameterError):
            TrainConfig(**bad)


def test_zero_learning_rate_keeps_parameters():
    cfg = TrainConfig(learning_rate=0.0, n_steps=6, batch_size=2, seed=3)
    data = _small_data()
    net = build_network({"kind": "toy_unet", "widths": [8, 16], "n_time": 8}, P, seed=1)
    before = flat_parameters(net)
    result = train(net, data, cfg, P)
    assert np.array_equal(flat_parameters(net), before)
    # the trace is the fixed network's loss on each step's batch
    rng = np.random.default_rng(cfg.seed)
    expected = []
    for _ in range(cfg.n_steps):
        x0, y = data.sample(rng, cfg.batch_size)
        draws = draw_dsm(x0.shape, P, rng)
        with torch.no_grad():
            expected.append(float(batch_loss(net, x0, y, draws, P)))
    assert result.losses == expected


def test_training_bit_reproducible():
    cfg = TrainConfig(n_steps=5, batch_size=2, seed=11)
    runs = []
    for _ in range(2):
        net = build_network({"kind": "toy_unet", "widths": [8, 16], "n_time": 8}, P, seed=2)
        runs.append((train(net, _small_data(), cfg, P), flat_parameters(net)))
    (a, pa), (b, pb) = runs
    assert a.losses == b.losses and np.array_equal(pa, pb) and a.seed == 11
    assert all(np.array_equal(a.parameters[k], b.parameters[k]) for k in a.parameters)


def test_divergence_raises_training_error():
    net = build_network({"kind": "affine", "dim": toy.DIM}, P, seed=0)
    _, _, data = toy.gaussian_task()
    cfg = TrainConfig(learning_rate=1e6, n_steps=50, batch_size=4, clip_norm=None, optimizer="sgd")
    with pytest.raises(TrainingError) as info:
        train(net, data, cfg, P)
    assert 1 <= info.value.step <= 50


def test_train_on_manifest(toy_manifest):
    net = build_network({"kind": "toy_unet", "widths": [8, 16], "n_time": 8}, P, seed=0)
    res = train(net, toy_manifest, TrainConfig(n_steps=3, batch_size=2, crop_frames=16))
    assert len(res.losses) == 3 and all(np.isfinite(res.losses))
    with pytest.raises(ParameterError):
        SpectrogramPairs([], 8)


def test_smoothed_trailing_mean():
    x = np.arange(1.0, 13.0)
    s = smoothed(x, window=3)
    assert s[0] == 1.0 and s[1] == 1.5 and s[2] == 2.0 and s[-1] == 11.0


@pytest.fixture(scope="module")
def affine():
    return toy.affine_run()


def test_affine_polyak_averages_approach_oracle(affine):
    net, snaps, p, m0, y = affine
    curve = toy.polyak_curve(net, snaps, p, m0, y)
    assert all(b < a for a, b in zip(curve, curve[1:])), curve


def test_analytic_loss_not_above_trained_affine(affine):
    net, snaps, p, m0, y = affine
    exact, learned, zero = toy.shared_draw_losses(net, p, m0, y)
    assert exact <= learned < zero


# ---- checkpoints -----------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    net = build_network({"kind": "toy_unet", "widths": [8, 16], "n_time": 8}, P, seed=6)
    sp = SpectralParams()
    ck = from_network(net, P, sp, seed=6, extra={"sample_rate": 16000})
    path = save_checkpoint(ck, tmp_path / "c.npz")
    back = load_checkpoint(path, expect_ouve=P, expect_spectral=sp)
    assert back.seed == 6 and back.extra == {"sample_rate": 16000} and back.architecture == net.config()
    assert np.array_equal(flat_parameters(back.network()), flat_parameters(net))
    z = complex_normal(np.random.default_rng(1), (257, 4))
    assert np.array_equal(back.score()(z, z, 0.3), NetworkScore(net)(z, z, 0.3))


def test_checkpoint_rejects_mismatch(tmp_path):
    path = save_checkpoint(passthrough_checkpoint(P, SpectralParams()), tmp_path / "p.npz")
    with pytest.raises(CheckpointError, match="gamma"):
        load_checkpoint(path, expect_ouve=OuveParams(gamma=2.0))
    with pytest.raises(CheckpointError, match="hop"):
        load_checkpoint(path, expect_spectral=SpectralParams(hop=64))
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.npz")
    with pytest.raises(CheckpointError):
        passthrough_checkpoint().network()
