"""Compare the compiled and numpy DCT kernels, and the full forward pass under each.

    python3 benchmarks/bench_kernels.py [--rows 2048] [--repeats 5]

The forward-pass rows rerun this file with SCT_PURE_PYTHON=1 in a subprocess,
because the kernel backend is chosen once at import time.
"""
import argparse
import json
import os
import subprocess
import sys


def forward_time(pure):
    code = (
        "import json; from sctpose.bench import bench_throughput; from sctpose.network import ModelConfig; "
        "from sctpose import KERNEL_BACKEND; "
        "cfg = ModelConfig(layers=2, channels=64, frames=243, heads=8, dropout=0.0); "
        "print(json.dumps(dict(bench_throughput(cfg, repeats=3), backend=KERNEL_BACKEND)))"
    )
    env = dict(os.environ, SCT_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2048)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    from sctpose.bench import bench_kernels

    print(f"{'N':>5} {'compiled s':>11} {'numpy s':>10} {'speedup':>8}")
    for row in bench_kernels(rows=args.rows, repeats=args.repeats):
        print(f"{row['length']:>5} {row.get('compiled', float('nan')):>11.4f} {row['python']:>10.4f} "
              f"{row.get('speedup', float('nan')):>8.2f}")
    print("\nforward pass, L=2 C=64 F=243:")
    for pure in (False, True):
        rep = forward_time(pure)
        print(f"  {rep['backend']:>8}: sct {rep['sct_median_s']:.3f}s  vanilla {rep['vanilla_median_s']:.3f}s")


if __name__ == "__main__":
    main()
