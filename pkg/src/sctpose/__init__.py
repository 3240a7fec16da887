"""Spectral-compression transformer for 2D-to-3D human pose lifting."""
from ._kernels import BACKEND as KERNEL_BACKEND
from .network import ModelConfig, evaluate_metrics, forward, init_params
from .spectral import dct, idct, low_pass, spectral_compress
from .tensor import Tensor, backward, no_grad, set_default_dtype

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND", "ModelConfig", "Tensor", "backward", "dct", "evaluate_metrics", "forward",
    "idct", "init_params", "low_pass", "no_grad", "set_default_dtype", "spectral_compress",
]
