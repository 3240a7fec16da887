import math

import numpy as np
import pytest
import scipy.fft
import scipy.linalg
from hypothesis import given, strategies as st

from sctpose import tensor as T
from sctpose.blocks import RunContext
from sctpose.gradcheck import grad_check
from sctpose.network import (ModelConfig, embed, evaluate_metrics, fd_loss, flatten, forward, init_params,
                             interpolation_matrix, mpjpe_loss, procrustes_align, total_loss, upsample_linear)
from sctpose.tensor import ContractError, Tensor


def tiny(**kw):
    base = dict(layers=2, channels=16, frames=9, joints=5, heads=2, dropout=0.0)
    base.update(kw)
    return ModelConfig(**base)


# config ----------------------------------------------------------------------

def test_defaults():
    cfg = ModelConfig()
    assert (cfg.layers, cfg.channels, cfg.frames, cfg.joints, cfg.sigma, cfg.lam) == (5, 512, 243, 17, 0.6, 1.0)
    assert (cfg.lr, cfg.lr_decay, cfg.dropout, cfg.batch_size, cfg.weight_decay) == (2e-4, 0.99, 0.1, 16, 0.01)


def test_schedule():
    assert ModelConfig().schedule() == [243, 146, 88, 53, 32, 20]
    assert ModelConfig(vanilla=True).schedule() == [243] * 6


@given(st.integers(1, 300), st.sampled_from([0.3, 0.5, 0.6, 0.9]), st.integers(0, 6))
def test_schedule_is_ceil_recurrence(frames, sigma, layers):
    cfg = ModelConfig(frames=frames, sigma=sigma, layers=layers, channels=8, heads=2)
    expect = [frames]
    for _ in range(layers):
        expect.append(math.ceil(round(expect[-1] * sigma, 9)))
    assert cfg.schedule() == expect and expect[-1] >= 1


def test_config_roundtrip_and_validation():
    cfg = tiny()
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ContractError):
        ModelConfig.from_dict({"bogus": 1})
    with pytest.raises(ContractError):
        ModelConfig(lam=-1)
    with pytest.raises(ContractError):
        ModelConfig(channels=10, heads=4)


# embedding -------------------------------------------------------------------

def test_embed_zero(f64):
    cfg = tiny()
    p = init_params(cfg, init="identity")
    p["embed"]["w"].data[...] = 0
    assert np.all(embed(np.zeros((9, 5, 5)), cfg, p["embed"]).data == 0)


def test_embed_shape_and_locality(f64, rng):
    cfg = tiny()
    p = init_params(cfg, rng)
    a = rng.normal(size=(2, 9, 5, 5))
    b = a.copy()
    b[:, 4] += 1.0
    ea, eb = embed(a, cfg, p["embed"]).data, embed(b, cfg, p["embed"]).data
    assert ea.shape == (2, 9, 5, 16)
    diff = np.abs(ea - eb).max(axis=(0, 2, 3))
    assert diff[4] > 0 and np.all(np.delete(diff, 4) == 0)


def test_embed_errors(f64, rng):
    cfg = tiny()
    p = init_params(cfg, rng)["embed"]
    with pytest.raises(ContractError):
        embed(np.zeros((1, 10, 5, 5)), cfg, p)
    with pytest.raises(ContractError):
        embed(np.zeros((1, 9, 5, 3)), cfg, p)


# upsampling ------------------------------------------------------------------

def test_upsample_identity(f64, rng):
    h = Tensor(rng.normal(size=(1, 4, 2, 3)))
    assert upsample_linear(h, 4) is h


def test_upsample_ramp(f64):
    h = Tensor(np.array([0.0, 1.0, 2.0]).reshape(1, 3, 1, 1))
    np.testing.assert_allclose(upsample_linear(h, 5).data.ravel(), [0, 0.5, 1, 1.5, 2], atol=1e-15)


def test_upsample_single_frame(f64):
    h = Tensor(np.full((1, 1, 2, 2), 3.0))
    assert np.all(upsample_linear(h, 7).data == 3.0)


def test_upsample_rejects_longer(f64):
    with pytest.raises(ContractError):
        upsample_linear(Tensor(np.zeros((1, 5, 1, 1))), 3)


@given(st.integers(2, 40), st.integers(0, 60), st.floats(-5, 5), st.floats(-5, 5))
def test_upsample_affine_exact(src, extra, a, b):
    dst = src + extra
    m = interpolation_matrix(src, dst)
    t_src = np.linspace(0, 1, src)
    t_dst = np.linspace(0, 1, dst)
    np.testing.assert_allclose(m @ (a * t_src + b), a * t_dst + b, atol=1e-9)


def test_upsample_gradient(f64, rng):
    h = Tensor(rng.normal(size=(1, 3, 2, 2)), requires_grad=True)
    w = Tensor(rng.normal(size=(1, 8, 2, 2)))
    assert grad_check(lambda t: (upsample_linear(t, 8) * w).sum(), h) < 1e-8


# forward ---------------------------------------------------------------------

def test_forward_full_scale_schedule(rng):
    cfg = ModelConfig(channels=8, heads=2, dropout=0.0)
    p = init_params(cfg, rng)
    with T.no_grad():
        out, acts = forward(Tensor(rng.normal(size=(1, 243, 17, 5))), cfg, p)
    assert acts.lengths == [243, 146, 88, 53, 32, 20]
    assert out.shape == (1, 243, 17, 3)


@pytest.mark.parametrize("layers,frames,sigma", [(0, 5, 0.6), (3, 10, 0.3), (4, 27, 0.9)])
def test_forward_output_length(rng, layers, frames, sigma):
    cfg = ModelConfig(layers=layers, channels=8, heads=2, frames=frames, joints=3, sigma=sigma, dropout=0.0)
    with T.no_grad():
        out, acts = forward(Tensor(rng.normal(size=(2, frames, 3, 5))), cfg, init_params(cfg, rng))
    assert out.shape == (2, frames, 3, 3)
    assert acts.lengths == cfg.schedule()


def test_zero_network_zero_output(f64, rng):
    cfg = tiny()
    p = init_params(cfg, rng)
    for t in flatten(p).values():
        t.data[...] = 0.0
    out, _ = forward(Tensor(rng.normal(size=(1, 9, 5, 5))), cfg, p)
    assert np.all(out.data == 0)


def test_three_channel_mode(rng):
    cfg = tiny(use_lpg=False)
    p = init_params(cfg, rng)
    assert p["embed"]["w"].shape == (3, 16)
    with T.no_grad():
        out, _ = forward(Tensor(rng.normal(size=(1, 9, 5, 3))), cfg, p)
    assert out.shape == (1, 9, 5, 3)


def test_tiny_network_gradient_sampled(f64, rng):
    cfg = tiny()
    p = init_params(cfg, rng)
    x = Tensor(rng.normal(size=(1, 9, 5, 5)), requires_grad=True)
    y = rng.normal(size=(1, 9, 5, 3)) * 0.1
    tensors = [x, *flatten(p).values()]
    err = grad_check(lambda: total_loss(forward(x, cfg, p)[0], y, 1.0), tensors, max_coords=3)
    assert err < 1e-3


# losses ----------------------------------------------------------------------

def test_mpjpe_cases(f64):
    gt = np.zeros((1, 2, 2, 3))
    assert mpjpe_loss(Tensor(gt), gt).item() == 0.0
    pred = gt.copy()
    pred[0, 1, 0] = [3.0, 4.0, 0.0]
    assert mpjpe_loss(Tensor(pred), gt).item() == pytest.approx(5 / 4)


def test_mpjpe_loop_oracle(f64, rng):
    p, g = rng.normal(size=(2, 2, 3, 4, 3))
    s = 0.0
    for b in range(2):
        for f in range(3):
            for j in range(4):
                s += math.sqrt(sum((p[b, f, j, k] - g[b, f, j, k]) ** 2 for k in range(3)))
    assert abs(mpjpe_loss(Tensor(p), g).item() - s / 24) < 1e-6


def test_loss_shape_mismatch(f64):
    with pytest.raises(ContractError):
        mpjpe_loss(Tensor(np.zeros((1, 2, 3, 3))), np.zeros((1, 3, 3, 3)))
    with pytest.raises(ContractError):
        fd_loss(Tensor(np.zeros((1, 2, 3, 3))), np.zeros((1, 3, 3, 3)))
    with pytest.raises(ContractError):
        total_loss(Tensor(np.zeros((1, 2, 3, 3))), np.zeros((1, 2, 3, 3)), -1.0)


def fd_oracle(pred, gt):
    c = scipy.fft.dct(pred - gt, type=2, norm="ortho", axis=1)
    return np.linalg.norm(c, axis=-1).mean()


def test_fd_loss_oracle_and_zero(f64, rng):
    p, g = rng.normal(size=(2, 2, 6, 4, 3))
    assert fd_loss(Tensor(g), g).item() == 0.0
    assert abs(fd_loss(Tensor(p), g).item() - fd_oracle(p, g)) < 1e-10


def test_fd_parseval_per_joint(rng):
    d = rng.normal(size=(8, 3))
    c = scipy.fft.dct(d, norm="ortho", axis=0)
    assert abs((c ** 2).sum() - (d ** 2).sum()) < 1e-10


def test_fd_dc_shift(f64, rng):
    f, j, dval = 10, 4, 0.7
    gt = rng.normal(size=(1, f, j, 3))
    pred = gt.copy()
    pred[0, :, 2, 1] += dval
    assert abs(fd_loss(Tensor(pred), gt).item() - math.sqrt(f) * dval / (f * j)) < 1e-12


def test_total_loss(f64, rng):
    p, g = rng.normal(size=(2, 1, 5, 3, 3))
    assert total_loss(Tensor(p), g, 0.0).item() == mpjpe_loss(Tensor(p), g).item()
    assert total_loss(Tensor(g), g, 2.5).item() == 0.0
    m = np.linalg.norm(p - g, axis=-1).mean()
    assert abs(total_loss(Tensor(p), g, 1.0).item() - (m + fd_oracle(p, g))) < 1e-6


def test_fd_loss_gradient(f64, rng):
    p = Tensor(rng.normal(size=(1, 7, 3, 3)), requires_grad=True)
    g = rng.normal(size=(1, 7, 3, 3))
    assert grad_check(lambda t: fd_loss(t, g), p) < 1e-5


# metrics ---------------------------------------------------------------------

def random_rotation(r):
    q, _ = np.linalg.qr(r.normal(size=(3, 3)))
    return q * np.sign(np.linalg.det(q))


def test_similarity_copy(rng):
    gt = rng.normal(size=(5, 17, 3)) * 300
    rot = random_rotation(rng)
    pred = 1.3 * gt @ rot + np.array([10.0, -40.0, 5.0])
    m = evaluate_metrics(pred, gt)
    assert m["p_mpjpe"] < 1e-5 and m["mpjpe"] > 0


def test_constant_100mm_error(rng):
    gt = np.round(rng.normal(size=(4, 17, 3)) * 200)
    # offsets with an exactly representable norm of 100
    exact = np.array([[100.0, 0, 0], [0, -100.0, 0], [60.0, 80.0, 0], [0, -28.0, 96.0]])
    d = exact[rng.integers(0, 4, size=(4, 17))]
    m = evaluate_metrics(gt + d, gt)
    assert m["pck"] == 100.0
    assert abs(m["auc"] - 100 * 10 / 31) < 1e-9


def test_perfect_prediction(rng):
    gt = rng.normal(size=(3, 17, 3)) * 200
    m = evaluate_metrics(gt, gt)
    assert m["mpjpe"] == 0 and m["p_mpjpe"] < 1e-9 and m["pck"] == 100.0
    assert abs(m["auc"] - 100 * 30 / 31) < 1e-9


def test_procrustes_matches_scipy(rng):
    gt = rng.normal(size=(17, 3))
    pred = rng.normal(size=(17, 3))
    a = pred - pred.mean(0)
    b = gt - gt.mean(0)
    r, s = scipy.linalg.orthogonal_procrustes(a, b)
    if np.linalg.det(r) < 0:
        pytest.skip("oracle has no reflection handling")
    oracle = (s / (a ** 2).sum()) * a @ r + gt.mean(0)
    np.testing.assert_allclose(procrustes_align(pred[None], gt[None])[0][0], oracle, atol=1e-10)


def test_reflection_is_corrected(rng):
    gt = rng.normal(size=(1, 17, 3))
    pred = gt * np.array([-1.0, 1.0, 1.0])
    aligned, _ = procrustes_align(pred, gt)
    # a proper rotation cannot undo a mirror, so error stays positive
    assert np.linalg.norm(aligned - gt, axis=-1).mean() > 1e-3


def test_degenerate_frame_flagged(rng):
    gt = rng.normal(size=(2, 17, 3))
    pred = gt.copy()
    pred[1] = 5.0
    m = evaluate_metrics(pred, gt)
    assert m["degenerate_frames"] == 1
    assert math.isfinite(m["p_mpjpe"])


@given(st.integers(0, 2**32 - 1), st.floats(1, 400))
def test_alignment_never_increases_squared_error(seed, noise):
    r = np.random.default_rng(seed)
    gt = r.normal(size=(2, 17, 3)) * 250
    pred = gt + r.normal(size=gt.shape) * noise
    aligned, _ = procrustes_align(pred, gt)
    assert ((aligned - gt) ** 2).sum(axis=(1, 2)).max() <= ((pred - gt) ** 2).sum(axis=(1, 2)).max() + 1e-6
    assert np.all(((aligned - gt) ** 2).sum(axis=(1, 2)) <= ((pred - gt) ** 2).sum(axis=(1, 2)) + 1e-6)


def test_mean_norm_can_rise_after_alignment():
    # least-squares alignment lowers squared error, not mean Euclidean error
    r = np.random.default_rng(1272)
    gt = r.normal(size=(1, 17, 3)) * 250
    pred = gt + r.normal(size=gt.shape) * 10
    aligned, _ = procrustes_align(pred, gt)
    assert ((aligned - gt) ** 2).sum() < ((pred - gt) ** 2).sum()
    m = evaluate_metrics(pred, gt)
    assert m["p_mpjpe"] > m["mpjpe"]
    assert abs(m["mpjpe"] - 14.698631846305439) < 1e-9 and abs(m["p_mpjpe"] - 14.739707803061753) < 1e-9


def test_metric_shape_error():
    with pytest.raises(ContractError):
        evaluate_metrics(np.zeros((2, 17, 3)), np.zeros((2, 16, 3)))
