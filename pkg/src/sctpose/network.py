"""Full lifting network, losses, and evaluation metrics."""
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import tensor as T
from .blocks import BlockConfig, RunContext, dual_stream_block, init_dual_block
from .spectral import compression_schedule, dct_op
from .tensor import ContractError, Tensor


@dataclass
class ModelConfig:
    layers: int = 5
    channels: int = 512
    frames: int = 243
    joints: int = 17
    sigma: float = 0.6
    heads: int = 8
    lam: float = 1.0
    dropout: float = 0.1
    mlp_ratio: int = 4
    use_lpg: bool = True
    vanilla: bool = False
    lr: float = 2e-4
    lr_decay: float = 0.99
    weight_decay: float = 0.01
    batch_size: int = 16
    epochs: int = 120
    max_steps: int = 0
    flip_augment: bool = True
    unit_scale: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        self.block_config()
        if self.layers < 0 or self.frames < 1 or self.joints < 1:
            raise ContractError("layers >= 0, frames >= 1 and joints >= 1 required")
        if self.lam < 0:
            raise ContractError(f"lambda must be non-negative, got {self.lam}")

    @property
    def in_channels(self):
        return 5 if self.use_lpg else 3

    def block_config(self):
        return BlockConfig(self.channels, self.heads, self.mlp_ratio,
                           None if self.vanilla else self.sigma, self.dropout)

    def schedule(self):
        """Temporal lengths f_0 = F, f_1, ..., f_L."""
        if self.vanilla:
            return [self.frames] * (self.layers + 1)
        return compression_schedule(self.frames, self.sigma, self.layers)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class LayerActivations:
    hidden: list  # Tensors H_0 (embedding, length F), H_1..H_L (block outputs, length f_i)

    @property
    def lengths(self):
        return [h.shape[1] for h in self.hidden]


# parameters -----------------------------------------------------------------

def init_params(cfg, rng=None, init="normal"):
    """``init='normal'``: N(0, 0.02) weights. ``init='identity'``: embedding copies
    input channels into the first feature channels, positional encodings and
    all attention/FFN/fusion weights are zero."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    bc = cfg.block_config()
    c = cfg.channels

    def normal(shape):
        return Tensor(rng.normal(0.0, 0.02, size=shape), requires_grad=True)

    params = {
        "embed": {"w": normal((cfg.in_channels, c)),
                  "temporal": normal((cfg.frames, c)),
                  "spatial": normal((cfg.joints, c))},
        "blocks": [init_dual_block(bc, rng) for _ in range(cfg.layers)],
        "head": {"w": normal((c, 3))},
    }
    if init == "identity":
        for name, t in flatten(params).items():
            if not (name.endswith("gamma") or name.endswith("beta")):
                t.data[...] = 0.0
        w = params["embed"]["w"].data
        n = min(w.shape)
        w[np.arange(n), np.arange(n)] = 1.0
    elif init != "normal":
        raise ValueError(f"unknown init {init!r}")
    return params


def flatten(params, prefix=""):
    out = {}
    if isinstance(params, Tensor):
        out[prefix] = params
    elif isinstance(params, dict):
        for k, v in params.items():
            out.update(flatten(v, f"{prefix}.{k}" if prefix else k))
    else:
        for i, v in enumerate(params):
            out.update(flatten(v, f"{prefix}.{i}" if prefix else str(i)))
    return out


def param_count(params):
    return sum(t.size for t in flatten(params).values())


# forward --------------------------------------------------------------------

def embed(inp, cfg, p):
    """Per-position linear projection plus learnable temporal and spatial encodings."""
    x = inp if isinstance(inp, Tensor) else Tensor(inp)
    if x.ndim == 3:
        x = x.reshape(1, *x.shape)
    b, f, j, ch = x.shape
    if ch != p["w"].shape[0]:
        raise ContractError(f"input has {ch} channels, embedding expects {p['w'].shape[0]}")
    if f > p["temporal"].shape[0]:
        raise ContractError(f"{f} frames exceed the configured maximum {p['temporal'].shape[0]}")
    if j != p["spatial"].shape[0]:
        raise ContractError(f"input has {j} joints, embedding expects {p['spatial'].shape[0]}")
    temporal = p["temporal"] if f == p["temporal"].shape[0] else p["temporal"][:f]
    return x @ p["w"] + temporal.reshape(1, f, 1, -1) + p["spatial"].reshape(1, 1, j, -1)


def interpolation_matrix(src, dst):
    """Align-corners linear interpolation from ``src`` to ``dst`` samples, shape (dst, src)."""
    if not 1 <= src <= dst:
        raise ContractError(f"upsampling needs 1 <= f <= F, got f={src}, F={dst}")
    m = np.zeros((dst, src))
    if src == 1:
        m[:, 0] = 1.0
        return m
    pos = np.arange(dst) * (src - 1) / (dst - 1)
    lo = np.minimum(np.floor(pos).astype(int), src - 2)
    w = pos - lo
    m[np.arange(dst), lo] = 1.0 - w
    m[np.arange(dst), lo + 1] += w
    return m


def upsample_linear(h, frames):
    """Linearly interpolate ``h`` [B, f, J, C] along time to ``frames`` samples."""
    f = h.shape[1]
    if f == frames:
        return h
    return T.linear_along_axis(h, interpolation_matrix(f, frames), axis=1)


def forward(inp, cfg, params, ctx=None):
    """Returns (pose3d [B, F, J, 3], LayerActivations)."""
    ctx = ctx or RunContext()
    bc = cfg.block_config()
    x = embed(inp, cfg, params["embed"])
    frames = x.shape[1]
    hidden = [x]
    for i, bp in enumerate(params["blocks"]):
        x = dual_stream_block(x, bc, bp, ctx, tag=f"block{i}")
        hidden.append(x)
    total = hidden[0]
    for h in hidden[1:]:
        total = total + upsample_linear(h, frames)
    return total @ params["head"]["w"], LayerActivations(hidden)


# losses ---------------------------------------------------------------------

def _check_pair(pred, gt):
    if pred.shape != gt.shape:
        raise ContractError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")


def mpjpe_loss(pred, gt):
    """Mean per-joint Euclidean error over batch, frames, joints."""
    gt = gt if isinstance(gt, Tensor) else Tensor(gt)
    _check_pair(pred, gt)
    return T.mean(T.norm(pred - gt, axis=-1))


def fd_loss(pred, gt):
    """Mean over clips of (1/(F*J)) sum_{k,j} ||DCT_k(pred_j) - DCT_k(gt_j)||, DCT over frames."""
    gt = gt if isinstance(gt, Tensor) else Tensor(gt)
    _check_pair(pred, gt)
    return T.mean(T.norm(dct_op(pred - gt, axis=-3), axis=-1))


def total_loss(pred, gt, lam):
    if lam < 0:
        raise ContractError(f"lambda must be non-negative, got {lam}")
    loss = mpjpe_loss(pred, gt)
    return loss if lam == 0 else loss + lam * fd_loss(pred, gt)


# metrics --------------------------------------------------------------------

PCK_THRESHOLD = 150.0
AUC_THRESHOLDS = np.linspace(0.0, 150.0, 31)


def procrustes_align(pred, gt):
    """Similarity-align each frame of ``pred`` [N, J, 3] onto ``gt``.

    Returns the aligned poses and a boolean mask of frames that were
    degenerate (all joints coincident) and only translated.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mu_x = gt.mean(axis=1, keepdims=True)
    mu_y = pred.mean(axis=1, keepdims=True)
    x0 = gt - mu_x
    y0 = pred - mu_y
    norm_x = np.sqrt((x0 ** 2).sum(axis=(1, 2), keepdims=True))
    norm_y = np.sqrt((y0 ** 2).sum(axis=(1, 2), keepdims=True))
    degenerate = (norm_x[:, 0, 0] < 1e-12) | (norm_y[:, 0, 0] < 1e-12)
    nx = np.where(norm_x > 0, norm_x, 1.0)
    ny = np.where(norm_y > 0, norm_y, 1.0)
    x0 = x0 / nx
    y0 = y0 / ny
    h = np.matmul(x0.transpose(0, 2, 1), y0)
    u, s, vt = np.linalg.svd(h)
    v = vt.transpose(0, 2, 1)
    r = np.matmul(v, u.transpose(0, 2, 1))
    flip = np.linalg.det(r) < 0
    v[flip, :, -1] *= -1
    s[flip, -1] *= -1
    r = np.matmul(v, u.transpose(0, 2, 1))
    scale = s.sum(axis=1)[:, None, None] * nx / ny
    shift = mu_x - scale * np.matmul(mu_y, r)
    aligned = scale * np.matmul(pred, r) + shift
    aligned[degenerate] = (pred - mu_y + mu_x)[degenerate]
    return aligned, degenerate


def evaluate_metrics(pred, gt):
    """MPJPE, P-MPJPE (mm), PCK@150mm (%) and AUC over 0..150mm (%)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.shape[-1] != 3:
        raise ContractError(f"prediction {pred.shape} and ground truth {gt.shape} must match [..., J, 3]")
    j = pred.shape[-2]
    p = pred.reshape(-1, j, 3)
    g = gt.reshape(-1, j, 3)
    err = np.linalg.norm(p - g, axis=-1)
    aligned, degenerate = procrustes_align(p, g)
    perr = np.linalg.norm(aligned - g, axis=-1)
    pck_curve = [(err < t).mean() for t in AUC_THRESHOLDS]
    return {
        "mpjpe": float(err.mean()),
        "p_mpjpe": float(perr.mean()),
        "pck": float(100.0 * (err < PCK_THRESHOLD).mean()),
        "auc": float(100.0 * np.mean(pck_curve)),
        "degenerate_frames": int(degenerate.sum()),
    }
