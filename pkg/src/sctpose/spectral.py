"""Orthonormal DCT-II/IDCT, low-pass spectral truncation, and power spectra."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .tensor import ContractError, record


@dataclass
class Spectrum:
    coefficients: np.ndarray
    source_length: int

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.coefficients.ndim != 1 or len(self.coefficients) != self.source_length:
            raise ContractError(
                f"spectrum of length {self.coefficients.shape} does not match source_length {self.source_length}")


@dataclass
class SpectrumReport:
    power: np.ndarray
    block_index: int = 0
    averaged_over: tuple = ("clips", "joints", "channels")
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.power)

    def low_band_fraction(self, bins):
        total = float(self.power.sum())
        return float(self.power[:bins].sum()) / total if total > 0 else 1.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq", "power"])
            for k, p in enumerate(self.power):
                w.writerow([k, repr(float(p))])


def compressed_length(n, sigma):
    """``ceil(n * sigma)``, guarded against float noise such as 10 * 0.7."""
    if not 0.0 < sigma < 1.0:
        raise ContractError(f"sigma must lie in (0, 1), got {sigma}")
    return max(1, math.ceil(n * sigma - 1e-9))


def compression_schedule(n, sigma, layers):
    lengths = [n]
    for _ in range(layers):
        lengths.append(compressed_length(lengths[-1], sigma))
    return lengths


def dct_matrix(n):
    """Orthonormal DCT-II basis, row k = alpha_k cos(pi k (2m+1) / 2n)."""
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    basis = np.cos(np.pi * k * (2 * m + 1) / (2 * n))
    basis[0] *= math.sqrt(1.0 / n)
    basis[1:] *= math.sqrt(2.0 / n)
    return basis


def dct_along(x, axis=-1):
    """Orthonormal DCT-II of a float array along ``axis`` via the FFT kernels."""
    x = np.asarray(x, dtype=np.float64)
    return np.moveaxis(_kernels.dct2_rows(np.moveaxis(x, axis, -1)), -1, axis)


def idct_along(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    return np.moveaxis(_kernels.dct3_rows(np.moveaxis(x, axis, -1)), -1, axis)


def dct(x, mode="fast"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ContractError(f"dct needs a non-empty 1-D signal, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ContractError("dct input must be finite")
    if mode == "naive":
        coeffs = dct_matrix(len(x)) @ x
    elif mode == "fast":
        coeffs = _kernels.dct2_rows(x[None, :])[0]
    else:
        raise ValueError(f"unknown dct mode {mode!r}")
    return Spectrum(coeffs, len(x))


def idct(spectrum):
    return _kernels.dct3_rows(spectrum.coefficients[None, :])[0]


def low_pass(spectrum, sigma):
    f = compressed_length(spectrum.source_length, sigma)
    return Spectrum(spectrum.coefficients[:f].copy(), f)


def spectral_compress(x, sigma, axis=-1):
    """Truncate the temporal spectrum of a Tensor and return to the time domain.

    Every 1-D signal along ``axis`` goes through DCT (length F), keeps the
    first ``ceil(F*sigma)`` coefficients, and is inverted with a length-f
    IDCT. A constant signal ``c`` therefore comes back as ``c*sqrt(F/f)``.
    ``sigma=None`` keeps the full spectrum. The backward pass applies the
    adjoint: DCT of length f, zero-pad to F, IDCT of length F.
    """
    axis = axis % x.ndim
    n = x.shape[axis]
    if n == 0:
        raise ContractError("spectral_compress needs a non-empty temporal axis")
    f = n if sigma is None else compressed_length(n, sigma)
    moved = np.moveaxis(x.data, axis, -1)
    coeffs = _kernels.dct2_rows(moved)[..., :f]
    out = np.moveaxis(_kernels.dct3_rows(coeffs), -1, axis)

    def bw(g):
        gc = _kernels.dct2_rows(np.moveaxis(g, axis, -1))
        padded = np.zeros(gc.shape[:-1] + (n,))
        padded[..., :f] = gc
        return (np.moveaxis(_kernels.dct3_rows(padded), -1, axis),)

    return record(out, (x,), bw, "spectral_compress")


def dct_op(x, axis):
    """Differentiable orthonormal DCT-II along ``axis`` (backward is the IDCT)."""
    out = dct_along(x.data, axis)
    return record(out, (x,), lambda g: (idct_along(g, axis),), "dct")


def power_spectrum(hidden, block_index=0):
    """Average DCT power per frequency bin of hidden features.

    ``hidden`` is ``[F, J, C]`` for one clip or ``[B, F, J, C]`` for a batch;
    the frame axis is treated as time and power is averaged over clips,
    joints, and channels.
    """
    h = np.asarray(hidden, dtype=np.float64)
    if h.ndim == 3:
        h = h[None]
    if h.ndim != 4 or h.shape[0] < 1:
        raise ContractError(f"power_spectrum expects [B, F, J, C] features, got {np.shape(hidden)}")
    coeffs = dct_along(h, axis=1)
    power = (coeffs * coeffs).mean(axis=(0, 2, 3))
    return SpectrumReport(power=power, block_index=block_index,
                          meta={"clips": h.shape[0], "frames": h.shape[1]})
