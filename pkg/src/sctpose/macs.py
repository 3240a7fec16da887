"""Analytic multiply-accumulate counts for the lifting network.

Only matmul MACs are counted (projections, attention contractions, FFN,
embedding, regression head). LayerNorm, softmax, DCT and interpolation are
excluded. Counts are for a single clip (batch 1).
"""
from dataclasses import dataclass, field

from .spectral import compression_schedule

PARTS = ("qkv", "scores", "values", "out_proj", "ffn", "fusion")


@dataclass
class MacsBreakdown:
    layers: list = field(default_factory=list)  # one dict per block, keyed by PARTS
    embed: int = 0
    head: int = 0

    def part(self, name):
        return sum(layer[name] for layer in self.layers)

    @property
    def total(self):
        return self.embed + self.head + sum(sum(layer.values()) for layer in self.layers)

    def as_dict(self):
        out = {name: self.part(name) for name in PARTS}
        out.update(embed=self.embed, head=self.head, total=self.total)
        return out


def _encoder(tokens, seq, c, mlp_ratio):
    """MACs of one pre-norm encoder over ``tokens`` tokens grouped in sequences of ``seq``."""
    return {
        "qkv": 3 * tokens * c * c,
        "scores": tokens * seq * c,
        "values": tokens * seq * c,
        "out_proj": tokens * c * c,
        "ffn": 2 * mlp_ratio * tokens * c * c,
    }


def _add(acc, part):
    for k, v in part.items():
        acc[k] += v


def macs_count(cfg, vanilla=None):
    """MacsBreakdown for ``cfg``; ``vanilla=True`` counts the same network with no compression."""
    vanilla = cfg.vanilla if vanilla is None else vanilla
    c, j, r = cfg.channels, cfg.joints, cfg.mlp_ratio
    lengths = [cfg.frames] * (cfg.layers + 1) if vanilla else compression_schedule(cfg.frames, cfg.sigma, cfg.layers)
    out = MacsBreakdown(embed=cfg.frames * j * cfg.in_channels * c, head=cfg.frames * j * c * 3)
    for i in range(cfg.layers):
        a, b = lengths[i], lengths[i + 1]
        layer = dict.fromkeys(PARTS, 0)
        _add(layer, _encoder(a * j, j, c, r))   # branch 1 spatial, full length
        _add(layer, _encoder(b * j, b, c, r))   # branch 1 temporal, compressed
        _add(layer, _encoder(b * j, b, c, r))   # branch 2 temporal, compressed
        _add(layer, _encoder(b * j, j, c, r))   # branch 2 spatial, compressed
        layer["fusion"] = b * j * 2 * c * 2
        out.layers.append(layer)
    return out

