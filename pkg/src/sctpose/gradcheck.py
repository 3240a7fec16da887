"""Central finite-difference verification of tape gradients."""
import numpy as np

from .tensor import ContractError, Tensor, backward, clear_tape, no_grad


def grad_check(f, x, eps=1e-4, max_coords=None, rng=None):
    """Max over coordinates of ``|analytic - numeric| / max(1, |numeric|)``.

    ``x`` is a Tensor or a sequence of Tensors, all float64 with
    ``requires_grad`` set. ``f()`` takes no arguments when ``x`` is a
    sequence, otherwise ``f(x)``; it must return a scalar Tensor.
    ``max_coords`` optionally samples that many coordinates per tensor.
    """
    single = isinstance(x, Tensor)
    tensors = [x] if single else list(x)
    call = (lambda: f(x)) if single else f
    for t in tensors:
        if t.data.dtype != np.float64:
            raise ContractError("grad_check must run in 64-bit mode")
        t.grad = None
    clear_tape()
    backward(call())
    worst = 0.0
    for t in tensors:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False)
        for i in idx:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + eps
                fp = float(call().data)
                flat[i] = orig - eps
                fm = float(call().data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * eps)
            a = analytic.reshape(-1)[i]
            if np.isnan(numeric) or np.isnan(a):
                raise FloatingPointError("NaN gradient during grad_check")
            worst = max(worst, abs(a - numeric) / max(1.0, abs(numeric)))
        t.grad = None
    return worst
