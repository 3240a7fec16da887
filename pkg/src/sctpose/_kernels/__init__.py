"""Row-wise orthonormal DCT-II / DCT-III kernels.

The compiled Cython extension is used when it was built and importable;
otherwise the numpy implementation in ``_fallback`` is used. Setting
``SCT_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _fallback

try:
    from . import _fastdct as _compiled
except ImportError:  # extension not built
    _compiled = None


def available_backends():
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def get_backend(name):
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled DCT kernels are not built")
        return _compiled
    if name == "python":
        return _fallback
    raise ValueError(f"unknown kernel backend {name!r}")


if _compiled is not None and os.environ.get("SCT_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

_active = get_backend(BACKEND)
dct2_rows = _active.dct2_rows
dct3_rows = _active.dct3_rows

__all__ = ["BACKEND", "available_backends", "get_backend", "dct2_rows", "dct3_rows"]
