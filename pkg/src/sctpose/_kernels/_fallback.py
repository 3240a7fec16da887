"""Pure-numpy DCT-II / DCT-III kernels.

Rows are transformed independently with the same Makhoul reordering as the
compiled kernels; the complex FFT itself comes from ``numpy.fft``.
"""
import numpy as np


def fft(z, inverse=False):
    """Unnormalised complex FFT of any length along the last axis (numpy's pocketfft)."""
    z = np.asarray(z, dtype=np.complex128)
    return np.fft.ifft(z, axis=-1) * z.shape[-1] if inverse else np.fft.fft(z, axis=-1)


def _alpha(n):
    a = np.full(n, np.sqrt(2.0 / n))
    a[0] = np.sqrt(1.0 / n)
    return a


def dct2_rows(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[-1]
    v = np.empty_like(x)
    half = (n + 1) // 2
    v[..., :half] = x[..., 0::2]
    v[..., half:] = x[..., 1::2][..., ::-1]
    spec = fft(v)
    k = np.arange(n)
    y = np.real(np.exp(-1j * np.pi * k / (2 * n)) * spec)
    return y * _alpha(n)


def dct3_rows(X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[-1]
    y = X / _alpha(n)
    flipped = np.zeros_like(y)
    flipped[..., 1:] = y[..., :0:-1]
    k = np.arange(n)
    spec = np.exp(1j * np.pi * k / (2 * n)) * (y - 1j * flipped)
    v = np.real(fft(spec, inverse=True)) / n
    x = np.empty_like(v)
    half = (n + 1) // 2
    x[..., 0::2] = v[..., :half]
    x[..., 1::2] = v[..., half:][..., ::-1]
    return x
