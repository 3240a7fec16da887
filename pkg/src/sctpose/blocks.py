"""Attention encoders: spatial, spectral-compression temporal, dual-stream block.

Parameters are nested dicts of Tensors. Feature tensors are laid out as
``[batch, frames, joints, channels]`` throughout.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .spectral import compressed_length, spectral_compress
from .tensor import ContractError, Tensor


@dataclass
class BlockConfig:
    channels: int
    heads: int = 8
    mlp_ratio: int = 4
    sigma: float = 0.6  # None disables compression
    dropout: float = 0.0

    def __post_init__(self):
        if self.channels % self.heads:
            raise ContractError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.sigma is not None and not 0.0 < self.sigma < 1.0:
            raise ContractError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not 0.0 <= self.dropout < 1.0:
            raise ContractError(f"dropout must lie in [0, 1), got {self.dropout}")

    def out_length(self, frames):
        return frames if self.sigma is None else compressed_length(frames, self.sigma)


class RunContext:
    """Training flag, dropout RNG, and optional capture dict for one forward pass."""

    def __init__(self, training=False, rng=None, capture=None):
        self.training = training
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.capture = capture

    def keep(self, key, value):
        if self.capture is not None:
            self.capture[key] = value


_EVAL = RunContext()


# initialisation -------------------------------------------------------------

def _normal(rng, shape, std=0.02):
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)


def _zeros(shape):
    return Tensor(np.zeros(shape), requires_grad=True)


def init_layer_norm(c):
    return {"gamma": Tensor(np.ones(c), requires_grad=True), "beta": _zeros(c)}


def init_attention(c, rng):
    return {k: _normal(rng, (c, c)) for k in ("wq", "wk", "wv", "wo")}


def init_ffn(c, ratio, rng):
    h = c * ratio
    return {"w1": _normal(rng, (c, h)), "b1": _zeros(h), "w2": _normal(rng, (h, c)), "b2": _zeros(c)}


def init_encoder(c, ratio, rng):
    return {"ln1": init_layer_norm(c), "attn": init_attention(c, rng),
            "ln2": init_layer_norm(c), "ffn": init_ffn(c, ratio, rng)}


def init_dual_block(cfg, rng):
    c, r = cfg.channels, cfg.mlp_ratio
    return {
        "branch1": {"spatial": init_encoder(c, r, rng), "temporal": init_encoder(c, r, rng)},
        "branch2": {"temporal": init_encoder(c, r, rng), "spatial": init_encoder(c, r, rng)},
        "fusion": {"w": _normal(rng, (2 * c, 2))},
    }


# building blocks ------------------------------------------------------------

def _split_heads(z, heads):
    n, t, c = z.shape
    return z.reshape(n, t, heads, c // heads).transpose(0, 2, 1, 3)


def _merge_heads(z):
    n, h, t, dk = z.shape
    return z.transpose(0, 2, 1, 3).reshape(n, t, h * dk)


def attention(x, wq, wk, wv, wo, heads):
    """Scaled dot-product multi-head attention over axis 1 of ``x`` [N, T, C].

    Recorded as one tape node; returns (output Tensor, attention weights
    [N, H, T, T] as an array).
    """
    n, t, c = x.shape
    if c % heads:
        raise ContractError(f"channels {c} not divisible by heads {heads}")
    scale = 1.0 / math.sqrt(c // heads)
    xd = x.data
    q = _split_heads(xd @ wq.data, heads)
    k = _split_heads(xd @ wk.data, heads)
    v = _split_heads(xd @ wv.data, heads)
    s = (q @ k.transpose(0, 1, 3, 2)) * scale
    s -= s.max(axis=-1, keepdims=True)
    a = np.exp(s)
    a /= a.sum(axis=-1, keepdims=True)
    o = _merge_heads(a @ v)

    def bw(g):
        g2 = g.reshape(-1, c)
        d_wo = o.reshape(-1, c).T @ g2
        d_o = _split_heads(g @ wo.data.T, heads)
        d_a = d_o @ v.transpose(0, 1, 3, 2)
        d_v = a.transpose(0, 1, 3, 2) @ d_o
        d_s = a * (d_a - (d_a * a).sum(axis=-1, keepdims=True)) * scale
        d_q = _merge_heads(d_s @ k).reshape(-1, c)
        d_k = _merge_heads(d_s.transpose(0, 1, 3, 2) @ q).reshape(-1, c)
        d_v = _merge_heads(d_v).reshape(-1, c)
        x2 = xd.reshape(-1, c)
        dx = d_q @ wq.data.T + d_k @ wk.data.T + d_v @ wv.data.T
        return dx.reshape(x.shape), x2.T @ d_q, x2.T @ d_k, x2.T @ d_v, d_wo

    return T.record(o @ wo.data, (x, wq, wk, wv, wo), bw, "attention"), a


def mhsa(x, p, heads, ctx=_EVAL, tag=None, rate=0.0):
    """Multi-head self-attention over axis 1 of ``x`` [N, T, C]; no projection biases."""
    out, attn = attention(x, p["wq"], p["wk"], p["wv"], p["wo"], heads)
    if tag is not None:
        ctx.keep(tag, attn)
    return T.dropout(out, rate, ctx.rng, ctx.training)


def ffn(x, p, ctx=_EVAL, rate=0.0):
    h = T.gelu(x @ p["w1"] + p["b1"])
    h = T.dropout(h, rate, ctx.rng, ctx.training)
    out = h @ p["w2"] + p["b2"]
    return T.dropout(out, rate, ctx.rng, ctx.training)


def _ln(x, p):
    return T.layer_norm(x, p["gamma"], p["beta"])


def _temporal_attention(y, p, cfg, ctx, tag):
    b, f, j, c = y.shape
    tokens = y.transpose(0, 2, 1, 3).reshape(b * j, f, c)
    a = mhsa(tokens, p, cfg.heads, ctx, tag, cfg.dropout)
    return a.reshape(b, j, f, c).transpose(0, 2, 1, 3)


def sct_encoder(x, cfg, p, ctx=_EVAL, tag=None):
    """LayerNorm, temporal spectral truncation, then attention and FFN residuals on the short sequence."""
    if tag is not None:
        ctx.keep(tag + ".input", x.data)
    y = _ln(x, p["ln1"])
    if cfg.sigma is not None:
        y = spectral_compress(y, cfg.sigma, axis=1)
    y = y + _temporal_attention(y, p["attn"], cfg, ctx, tag and tag + ".attn")
    return y + ffn(_ln(y, p["ln2"]), p["ffn"], ctx, cfg.dropout)


def vanilla_temporal_encoder(x, cfg, p, ctx=_EVAL, tag=None):
    """Same encoder without any spectral path: y = LN(x); y += MSA(y); y += FFN(LN(y))."""
    y = _ln(x, p["ln1"])
    y = y + _temporal_attention(y, p["attn"], cfg, ctx, tag and tag + ".attn")
    return y + ffn(_ln(y, p["ln2"]), p["ffn"], ctx, cfg.dropout)


def spatial_encoder(x, cfg, p, ctx=_EVAL, tag=None):
    """Pre-norm encoder attending over joints, frames folded into the batch."""
    b, f, j, c = x.shape
    tokens = x.reshape(b * f, j, c)
    y = tokens + mhsa(_ln(tokens, p["ln1"]), p["attn"], cfg.heads, ctx, tag and tag + ".attn", cfg.dropout)
    y = y + ffn(_ln(y, p["ln2"]), p["ffn"], ctx, cfg.dropout)
    return y.reshape(b, f, j, c)


def adaptive_fusion(a, b, p):
    """Per-position convex mix ``w0*a + w1*b`` with ``w = softmax([a, b] @ W)``."""
    if a.shape != b.shape:
        raise ContractError(f"adaptive_fusion inputs differ in shape: {a.shape} vs {b.shape}")
    w = T.softmax(T.concat([a, b], axis=-1) @ p["w"], axis=-1)
    return a * w[..., 0:1] + b * w[..., 1:2]


def dual_stream_block(x, cfg, p, ctx=_EVAL, tag=None):
    """Spatial->SCT and SCT->spatial branches with separate weights, fused adaptively."""
    temporal = vanilla_temporal_encoder if cfg.sigma is None else sct_encoder

    def sub(name):
        return None if tag is None else f"{tag}.{name}"

    if tag is not None:
        ctx.keep(tag + ".input", x.data)
    b1 = spatial_encoder(x, cfg, p["branch1"]["spatial"], ctx, sub("branch1.spatial"))
    b1 = temporal(b1, cfg, p["branch1"]["temporal"], ctx, sub("branch1.temporal"))
    b2 = temporal(x, cfg, p["branch2"]["temporal"], ctx, sub("branch2.temporal"))
    b2 = spatial_encoder(b2, cfg, p["branch2"]["spatial"], ctx, sub("branch2.spatial"))
    return adaptive_fusion(b1, b2, p["fusion"])
