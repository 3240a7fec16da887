"""Training loop, checkpoint round-trip, evaluation, and spectrum reports."""
import csv
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .blocks import RunContext
from .checkpoint import check_compatible, load_arrays, save_arrays
from .config import dump_dataclass, load_dataclass
from .lpg import augment_sequence, h36m_topology, horizontal_flip, swap_pairs
from .network import ModelConfig, evaluate_metrics, flatten, forward, init_params, total_loss
from .optim import AdamW
from .spectral import compressed_length, power_spectrum
from .tensor import ContractError, NonFiniteError, Tensor

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainResult:
    params: dict
    history: list = field(default_factory=list)  # dicts: epoch, step, loss, mpjpe_mm, lr
    steps: int = 0

    @property
    def final_mpjpe(self):
        return self.history[-1]["mpjpe_mm"] if self.history else math.nan


def prepare_inputs(clips, cfg, topo=None):
    """Model inputs [B, F, J, 3|5] in model units from clip dicts."""
    topo = topo or h36m_topology()
    kp = np.stack([c["keypoints2d"] for c in clips])
    xy = kp[..., :2] / cfg.unit_scale
    conf = kp[..., 2] if kp.shape[-1] > 2 else None
    return augment_sequence(xy, topo, conf, use_lpg=cfg.use_lpg)


def prepare_targets(clips, cfg):
    return np.stack([c["frames"] for c in clips]) / cfg.unit_scale


def _flip_clip(clip, topo):
    kp = clip["keypoints2d"]
    flipped_kp = np.concatenate([horizontal_flip(kp[..., :2], topo), swap_pairs(kp[..., 2:], topo)], axis=-1)
    return dict(clip, keypoints2d=flipped_kp, frames=horizontal_flip(clip["frames"], topo))


def train(cfg, dataset, out_dir=None, params=None, topo=None, log_every=0):
    """Minibatch AdamW on ``total_loss``; the learning rate is multiplied by
    ``cfg.lr_decay`` after every epoch. Stops after ``cfg.epochs`` epochs or
    ``cfg.max_steps`` updates (when positive)."""
    if not dataset:
        raise ContractError("training needs a non-empty dataset")
    topo = topo or h36m_topology()
    rng = np.random.default_rng(cfg.seed)
    params = params or init_params(cfg, np.random.default_rng(cfg.seed))
    named = flatten(params)
    opt = AdamW(named, lr=cfg.lr, weight_decay=cfg.weight_decay)
    ctx = RunContext(training=True, rng=rng)
    result = TrainResult(params)
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        losses, errs = [], []
        for start in range(0, len(order), cfg.batch_size):
            batch = [dataset[i] for i in order[start:start + cfg.batch_size]]
            if cfg.flip_augment:
                batch = [_flip_clip(c, topo) if rng.random() < 0.5 else c for c in batch]
            x = prepare_inputs(batch, cfg, topo)
            y = prepare_targets(batch, cfg)
            opt.zero_grad()
            try:
                pred, _ = forward(Tensor(x), cfg, params, ctx)
                loss = total_loss(pred, y, cfg.lam)
                loss.backward()
            except NonFiniteError as exc:
                T.clear_tape()
                raise TrainingDiverged(f"non-finite values at epoch {epoch}, step {step}: {exc}") from exc
            opt.step()
            step += 1
            losses.append(loss.item())
            errs.append(float(np.linalg.norm(pred.data - y, axis=-1).mean()) * cfg.unit_scale)
            if cfg.max_steps and step >= cfg.max_steps:
                break
        result.history.append({"epoch": epoch, "step": step, "loss": float(np.mean(losses)),
                               "mpjpe_mm": float(np.mean(errs)), "lr": opt.lr})
        if log_every and epoch % log_every == 0:
            log.info("epoch %d step %d loss %.5f mpjpe %.2fmm", epoch, step,
                     result.history[-1]["loss"], result.history[-1]["mpjpe_mm"])
        opt.lr *= cfg.lr_decay
        if cfg.max_steps and step >= cfg.max_steps:
            break
    result.steps = step
    if out_dir is not None:
        save_run(out_dir, cfg, params, result.history)
    return result


def save_run(out_dir, cfg, params, history=()):
    os.makedirs(out_dir, exist_ok=True)
    save_arrays(os.path.join(out_dir, "model.sctl"), {k: t.data for k, t in flatten(params).items()})
    dump_dataclass(cfg, os.path.join(out_dir, "config.txt"))
    if history:
        with open(os.path.join(out_dir, "loss.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["epoch", "step", "loss", "mpjpe_mm", "lr"])
            w.writeheader()
            w.writerows(history)


def load_checkpoint(path, cfg=None):
    """(cfg, params) from an SCTL file; the config defaults to ``config.txt`` beside it."""
    if cfg is None:
        cfg_path = os.path.join(os.path.dirname(os.path.abspath(path)), "config.txt")
        if not os.path.exists(cfg_path):
            raise ContractError(f"no config given and {cfg_path} does not exist")
        cfg = load_dataclass(ModelConfig, cfg_path, env_seed=False)
    params = init_params(cfg, np.random.default_rng(0))
    named = flatten(params)
    arrays = load_arrays(path)
    check_compatible({k: t.data for k, t in named.items()}, arrays)
    for k, t in named.items():
        t.data = arrays[k].astype(T.get_default_dtype())
    return cfg, params


def predict(cfg, params, clips, batch_size=16, topo=None, capture=None):
    """Predicted 3D poses in millimetres, [N, F, J, 3]; dropout is off."""
    out = []
    with T.no_grad():
        for start in range(0, len(clips), batch_size):
            x = prepare_inputs(clips[start:start + batch_size], cfg, topo)
            pred, _ = forward(Tensor(x), cfg, params, RunContext(training=False, capture=capture))
            out.append(pred.data.astype(np.float64) * cfg.unit_scale)
    return np.concatenate(out)


def run_eval(cfg, params, clips, topo=None):
    pred = predict(cfg, params, clips, topo=topo)
    gt = np.stack([c["frames"] for c in clips])
    return evaluate_metrics(pred, gt), pred


def spectrum_report(cfg, params, clips, block_index, topo=None):
    """Power spectrum of the pre-LayerNorm features entering block ``block_index``.

    ``report.meta['low_band_fraction']`` is the share of power in the lowest
    ``ceil(sigma * f)`` bins of that block's input length ``f``.
    """
    if not 0 <= block_index < cfg.layers:
        raise ContractError(f"block index {block_index} outside 0..{cfg.layers - 1}")
    feats = []
    with T.no_grad():
        for clip in clips:
            capture = {}
            x = prepare_inputs([clip], cfg, topo)
            forward(Tensor(x), cfg, params, RunContext(training=False, capture=capture))
            feats.append(capture[f"block{block_index}.input"][0])
    report = power_spectrum(np.stack(feats), block_index=block_index)
    f = len(report)
    bins = f if cfg.vanilla else compressed_length(f, cfg.sigma)
    report.meta.update(low_band_bins=bins, low_band_fraction=report.low_band_fraction(bins))
    return report
