"""Acceptance criteria 1-10, one test each.

Every test prints a single ``[ACCEPT n] PASS|FAIL`` line to the terminal
(even under output capture) with the measured numbers, then asserts.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import contextlib
import dataclasses
import math
import time

import numpy as np
import pytest

from sctpose import tensor as T
from sctpose.bench import bench_throughput
from sctpose.blocks import BlockConfig, init_encoder, sct_encoder, vanilla_temporal_encoder
from sctpose.gradcheck import grad_check
from sctpose.lpg import bone_length_variance, h36m_topology, horizontal_flip, line_pose
from sctpose.macs import macs_count
from sctpose.network import ModelConfig, evaluate_metrics, flatten, forward, init_params, total_loss
from sctpose.spectral import Spectrum, dct, idct
from sctpose.synthetic import REST_POSE_H36M, SKELETON_HEIGHT_MM, SyntheticMotionSpec, generate_synthetic, rigid_motion
from sctpose.tensor import Tensor
from sctpose.training import run_eval, spectrum_report, train

TOPO = h36m_topology()
OVERFIT_LIMIT_MM = 0.05 * SKELETON_HEIGHT_MM

# desk overfitting setup shared by criteria 5 and 9
DESK = dict(layers=2, channels=32, frames=27, joints=17, sigma=0.6, heads=4, lam=1.0, dropout=0.0,
            lr=1e-3, lr_decay=1.0, batch_size=4, epochs=500, max_steps=500, flip_augment=False, seed=0)


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def run(n, title):
        info = {}
        t0 = time.perf_counter()
        ok = False
        try:
            yield info
            ok = info.pop("ok")
        finally:
            info["seconds"] = round(time.perf_counter() - t0, 2)
            detail = ", ".join(f"{k}={v}" for k, v in info.items())
            with capsys.disabled():
                print(f"\n[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        assert ok, f"criterion {n} failed: {detail}"
    return run


def _fmt(x):
    return float(f"{x:.4g}")


_runs = {}


def overfit(key, **overrides):
    """Train once per key and cache (config, train result, eval metrics)."""
    if key not in _runs:
        data_kw = overrides.pop("data", {})
        data = generate_synthetic(SyntheticMotionSpec(frames=27, clips=4, seed=1, **data_kw))
        cfg = ModelConfig(**dict(DESK, **overrides))
        res = train(cfg, data)
        metrics, _ = run_eval(cfg, res.params, data)
        _runs[key] = (cfg, res, metrics, data)
    return _runs[key]


def test_criterion_01_dct(criterion):
    with criterion(1, "DCT fast vs naive, roundtrip, Parseval for N=1..512") as info:
        rng = np.random.default_rng(0)
        worst_fast = worst_rt = worst_pars = 0.0
        for n in range(1, 513):
            x = rng.normal(size=n)
            fast = dct(x, "fast").coefficients
            naive = dct(x, "naive").coefficients
            worst_fast = max(worst_fast, np.max(np.abs(fast - naive)) / np.max(np.abs(naive)))
            worst_rt = max(worst_rt, np.linalg.norm(idct(Spectrum(fast, n)) - x) / np.linalg.norm(x))
            worst_pars = max(worst_pars, abs(np.linalg.norm(fast) - np.linalg.norm(x)) / np.linalg.norm(x))
        info.update(fast_vs_naive=_fmt(worst_fast), roundtrip=_fmt(worst_rt), parseval=_fmt(worst_pars))
        info["ok"] = worst_fast < 1e-4 and worst_rt < 1e-5 and worst_pars < 1e-5


def test_criterion_02_schedule(criterion):
    with criterion(2, "compression schedule F=243 sigma=0.6 L=5") as info:
        cfg = ModelConfig(channels=8, heads=2, dropout=0.0)
        with T.no_grad():
            out, acts = forward(Tensor(np.zeros((1, 243, 17, 5))), cfg, init_params(cfg))
        info.update(lengths=tuple(acts.lengths), output_length=out.shape[1])
        info["ok"] = tuple(acts.lengths) == (243, 146, 88, 53, 32, 20) and out.shape[1] == 243


def _np_vanilla_encoder(x, p, heads):
    """Straight-line pre-norm temporal encoder without any spectral step."""
    from scipy.special import erf

    def ln(z, q):
        mu = z.mean(-1, keepdims=True)
        return (z - mu) / np.sqrt(z.var(-1, keepdims=True) + 1e-5) * q["gamma"].data + q["beta"].data

    b, f, j, c = x.shape
    dk = c // heads
    y = ln(x, p["ln1"]).transpose(0, 2, 1, 3).reshape(b * j, f, c)
    a = p["attn"]
    q, k, v = y @ a["wq"].data, y @ a["wk"].data, y @ a["wv"].data
    heads_out = []
    for h in range(heads):
        s = slice(h * dk, (h + 1) * dk)
        sc = q[..., s] @ k[..., s].transpose(0, 2, 1) / math.sqrt(dk)
        w = np.exp(sc - sc.max(-1, keepdims=True))
        heads_out.append((w / w.sum(-1, keepdims=True)) @ v[..., s])
    y = y + np.concatenate(heads_out, -1) @ a["wo"].data
    hdn = ln(y, p["ln2"]) @ p["ffn"]["w1"].data + p["ffn"]["b1"].data
    hdn = hdn * 0.5 * (1 + erf(hdn / math.sqrt(2)))
    y = y + hdn @ p["ffn"]["w2"].data + p["ffn"]["b2"].data
    return y.reshape(b, j, f, c).transpose(0, 2, 1, 3)


def test_criterion_03_vanilla_equivalence(criterion):
    with criterion(3, "no-truncation SCT equals vanilla encoder") as info, T.default_dtype("float64"):
        rng = np.random.default_rng(3)
        frames, sigma = 27, 0.99
        p = init_encoder(32, 4, rng)
        for t in flatten(p).values():
            t.data[...] += rng.normal(0, 0.2, size=t.shape)
        x = rng.normal(size=(2, frames, 5, 32))
        sct = sct_encoder(Tensor(x), BlockConfig(32, 4, sigma=sigma), p).data
        oracle = _np_vanilla_encoder(x, p, 4)
        lib = vanilla_temporal_encoder(Tensor(x), BlockConfig(32, 4, sigma=None), p).data
        enc_err = float(max(np.abs(sct - oracle).max(), np.abs(sct - lib).max()))

        cfg = ModelConfig(layers=3, channels=16, frames=frames, joints=5, heads=4, sigma=sigma, dropout=0.0)
        params = init_params(cfg, rng)
        inp = Tensor(rng.normal(size=(1, frames, 5, 5)))
        a, acts = forward(inp, cfg, params)
        b, _ = forward(inp, dataclasses.replace(cfg, vanilla=True), params)
        net_err = float(np.abs(a.data - b.data).max())
        info.update(schedule=tuple(acts.lengths), encoder_max_abs=_fmt(enc_err), network_max_abs=_fmt(net_err))
        info["ok"] = set(acts.lengths) == {frames} and enc_err < 1e-5 and net_err < 1e-5


@pytest.mark.slow
def test_criterion_04_gradients(criterion):
    with criterion(4, "end-to-end finite-difference check, all parameters and inputs") as info, \
            T.default_dtype("float64"):
        rng = np.random.default_rng(4)
        cfg = ModelConfig(layers=2, channels=16, frames=9, joints=5, heads=4, sigma=0.6, dropout=0.0)
        params = init_params(cfg, rng)
        for t in flatten(params).values():
            t.data[...] += rng.normal(0, 0.1, size=t.shape)
        x = Tensor(rng.normal(size=(1, 9, 5, 5)), requires_grad=True)
        y = rng.normal(size=(1, 9, 5, 3))
        tensors = [x, *flatten(params).values()]
        err = grad_check(lambda: total_loss(forward(x, cfg, params)[0], y, cfg.lam), tensors)
        info.update(coordinates=sum(t.size for t in tensors), max_rel_error=_fmt(err))
        info["ok"] = err < 1e-3


@pytest.mark.slow
def test_criterion_05_learning(criterion):
    with criterion(5, "overfit 4 clips in 500 steps, lambda 1 and 0") as info:
        _, res1, m1, _ = overfit("lam1")
        _, res0, m0, _ = overfit("lam0", lam=0.0)
        info.update(limit_mm=OVERFIT_LIMIT_MM, steps=res1.steps,
                    mpjpe_lam1=_fmt(m1["mpjpe"]), mpjpe_lam0=_fmt(m0["mpjpe"]),
                    train_mpjpe_lam1=_fmt(res1.final_mpjpe), train_mpjpe_lam0=_fmt(res0.final_mpjpe))
        info["ok"] = (res1.steps == 500 and res0.steps == 500
                      and m1["mpjpe"] < OVERFIT_LIMIT_MM and m0["mpjpe"] < OVERFIT_LIMIT_MM)


def test_criterion_06_macs(criterion):
    with criterion(6, "MACs compression ratio and sigma monotonicity") as info:
        cfg = ModelConfig()
        ratio = macs_count(cfg).total / macs_count(cfg, vanilla=True).total
        grid = [round(0.3 + 0.1 * i, 1) for i in range(7)]
        totals = [macs_count(dataclasses.replace(cfg, sigma=s)).total for s in grid]
        increasing = all(b > a for a, b in zip(totals, totals[1:]))
        info.update(ratio=_fmt(ratio), target=_fmt(58.9 / 174.7), gmacs=[round(t / 1e9, 1) for t in totals])
        info["ok"] = abs(ratio - 58.9 / 174.7) <= 0.15 and increasing


def test_criterion_07_throughput(criterion):
    with criterion(7, "forward median time, sigma=0.6 vs vanilla at F=243") as info:
        cfg = ModelConfig(layers=2, channels=64, frames=243, joints=17, heads=8, sigma=0.6, dropout=0.0)
        rep = bench_throughput(cfg, repeats=5)
        info.update({k: _fmt(v) for k, v in rep.items()})
        info["ok"] = rep["sct_median_s"] < rep["vanilla_median_s"]


def test_criterion_08_metrics(criterion):
    with criterion(8, "P-MPJPE invariance, P-MPJPE <= MPJPE, PCK/AUC arithmetic") as info:
        rng = np.random.default_rng(8)
        gt = rng.normal(size=(6, 17, 3)) * 300
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        q *= np.sign(np.linalg.det(q))
        sim = evaluate_metrics(0.8 * gt @ q + np.array([50.0, -20.0, 300.0]), gt)

        violations = 0
        for _ in range(1000):
            g = rng.normal(size=(1, 17, 3)) * 250
            p = g + rng.normal(size=g.shape) * rng.uniform(1, 400)
            m = evaluate_metrics(p, g)
            violations += m["p_mpjpe"] > m["mpjpe"]

        g = np.round(rng.normal(size=(5, 17, 3)) * 200)
        exact = np.array([[100.0, 0, 0], [0, 0, -100.0], [60.0, 80.0, 0]])
        m100 = evaluate_metrics(g + exact[rng.integers(0, 3, size=(5, 17))], g)
        info.update(sim_p_mpjpe=_fmt(sim["p_mpjpe"]), sim_mpjpe=_fmt(sim["mpjpe"]), violations=violations,
                    pck=m100["pck"], auc=_fmt(m100["auc"]), auc_expected=_fmt(1000 / 31))
        info["ok"] = (sim["p_mpjpe"] < 1e-5 and sim["mpjpe"] > 0 and violations == 0
                      and m100["pck"] == 100.0 and abs(m100["auc"] - 1000 / 31) < 1e-9)


@pytest.mark.slow
def test_criterion_09_lpg(criterion):
    with criterion(9, "LPG midpoints, flip involution, rigid variance, LPG vs no LPG") as info:
        rng = np.random.default_rng(9)
        pose = rng.normal(size=(4, 17, 2)) * 100
        lp = line_pose(pose, TOPO)
        mid = all(np.array_equal(lp[:, c], (pose[:, TOPO.parents[c]] + pose[:, c]) / 2) for c in range(1, 17))
        mid = mid and np.array_equal(lp[:, 0], pose[:, 0])
        p3 = rng.normal(size=(4, 17, 3))
        involution = np.array_equal(horizontal_flip(horizontal_flip(p3, TOPO), TOPO), p3)
        var = bone_length_variance(rigid_motion(REST_POSE_H36M, 50, seed=9), TOPO)[1]

        noisy = {"noise_2d": 5.0}
        cfg_on, _, with_lpg, data = overfit("noisy_lpg", data=dict(noisy))
        cfg_off, _, without_lpg, _ = overfit("noisy_nolpg", use_lpg=False, data=dict(noisy))
        _, pred_on = run_eval(cfg_on, _runs["noisy_lpg"][1].params, data)
        _, pred_off = run_eval(cfg_off, _runs["noisy_nolpg"][1].params, data)
        var_on = np.mean([bone_length_variance(p, TOPO)[1] for p in pred_on])
        var_off = np.mean([bone_length_variance(p, TOPO)[1] for p in pred_off])
        var_gt = np.mean([bone_length_variance(c["frames"], TOPO)[1] for c in data])
        info.update(midpoints=mid, involution=involution, rigid_variance=_fmt(var),
                    mpjpe_lpg=_fmt(with_lpg["mpjpe"]), mpjpe_no_lpg=_fmt(without_lpg["mpjpe"]),
                    bone_var_lpg=_fmt(var_on), bone_var_no_lpg=_fmt(var_off), bone_var_gt=_fmt(var_gt))
        info["ok"] = mid and involution and var < 1e-10 and with_lpg["mpjpe"] <= without_lpg["mpjpe"]


def test_criterion_10_spectrum(criterion):
    with criterion(10, "band-limited input power concentration and report length") as info:
        rng = np.random.default_rng(10)
        frames, band = 27, 4
        cfg = ModelConfig(layers=2, channels=16, frames=frames, joints=17, heads=4, sigma=0.6, dropout=0.0,
                          unit_scale=1.0)
        params = init_params(cfg, rng, init="identity")
        m = np.arange(frames)
        basis = np.stack([np.cos(np.pi * k * (2 * m + 1) / (2 * frames)) for k in range(band)])
        clips = []
        for _ in range(3):
            xy = np.einsum("kf,kjd->fjd", basis, rng.normal(size=(band, 17, 2)))
            kp = np.concatenate([xy, np.ones((frames, 17, 1))], -1)
            clips.append({"frames": np.zeros((frames, 17, 3)), "keypoints2d": kp})
        rep0 = spectrum_report(cfg, params, clips, 0)
        rep1 = spectrum_report(cfg, params, clips, 1)
        frac = rep0.low_band_fraction(band)
        info.update(in_band_fraction=_fmt(frac), rows_block0=len(rep0), rows_block1=len(rep1),
                    expected_rows=(frames, cfg.schedule()[1]))
        info["ok"] = frac >= 0.99 and len(rep0) == frames and len(rep1) == cfg.schedule()[1]


@pytest.mark.slow
def test_overfit_checkpoint_properties(criterion):
    """Evaluation of the overfit model on its own clips and its hidden spectra."""
    with criterion("5b", "overfit model: eval below threshold, low-band share of block input") as info:
        cfg, res, metrics, data = overfit("lam1")
        rep = spectrum_report(cfg, res.params, data, 1)
        info.update(eval_mpjpe=_fmt(metrics["mpjpe"]), low_band_fraction=_fmt(rep.meta["low_band_fraction"]),
                    low_band_bins=rep.meta["low_band_bins"])
        info["ok"] = metrics["mpjpe"] < OVERFIT_LIMIT_MM and rep.meta["low_band_fraction"] > 0.5
