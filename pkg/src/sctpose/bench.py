"""Wall-clock comparisons: compressed vs vanilla forward passes, compiled vs numpy DCT kernels."""
import dataclasses
import statistics
import time

import numpy as np

from . import _kernels
from . import tensor as T
from .network import forward, init_params
from .tensor import ContractError, Tensor

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None


def _single_thread():
    if threadpool_limits is None:
        import contextlib
        return contextlib.nullcontext()
    return threadpool_limits(limits=1)


def _median_time(fn, repeats, warmup):
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def time_forward(cfg, repeats=5, warmup=1, batch=1, seed=0):
    """Median seconds of one no-grad forward pass over ``batch`` clips."""
    rng = np.random.default_rng(seed)
    params = init_params(cfg, rng)
    x = Tensor(rng.normal(size=(batch, cfg.frames, cfg.joints, cfg.in_channels)))

    def run():
        with T.no_grad():
            forward(x, cfg, params)

    with _single_thread():
        return _median_time(run, repeats, warmup)


def bench_throughput(cfg, repeats=5, warmup=1, batch=1):
    """Median forward time of the compressed network and of the same network without compression."""
    if repeats < 3:
        raise ContractError("bench needs at least 3 repeats")
    sct = time_forward(dataclasses.replace(cfg, vanilla=False), repeats, warmup, batch)
    vanilla = time_forward(dataclasses.replace(cfg, vanilla=True), repeats, warmup, batch)
    return {"sct_median_s": sct, "vanilla_median_s": vanilla, "speedup": vanilla / sct}


def bench_kernels(lengths=(27, 81, 243, 256, 512), rows=2048, repeats=5, seed=0):
    """Median seconds of a DCT-II + DCT-III round trip per backend and length."""
    rng = np.random.default_rng(seed)
    report = []
    for n in lengths:
        x = rng.normal(size=(rows, n))
        row = {"length": n, "rows": rows}
        for name in _kernels.available_backends():
            k = _kernels.get_backend(name)
            row[name] = _median_time(lambda: k.dct3_rows(k.dct2_rows(x)), repeats, 1)
        if "compiled" in row:
            row["speedup"] = row["python"] / row["compiled"]
        report.append(row)
    return report
