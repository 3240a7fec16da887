"""Command-line entry point: ``sctpose <command> ...``."""
import argparse
import json
import logging
import sys

from .bench import bench_kernels, bench_throughput
from .config import load_dataclass
from .lpg import read_poses, write_poses
from .macs import macs_count
from .network import ModelConfig
from .synthetic import SyntheticMotionSpec, generate_synthetic
from .training import load_checkpoint, run_eval, spectrum_report, train


def _dump(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_generate(args):
    spec = load_dataclass(SyntheticMotionSpec, args.spec)
    clips = generate_synthetic(spec)
    write_poses(args.out, clips)
    print(f"wrote {len(clips)} clips to {args.out}")


def cmd_train(args):
    cfg = load_dataclass(ModelConfig, args.config)
    clips = read_poses(args.data)
    result = train(cfg, clips, out_dir=args.out, log_every=args.log_every)
    _dump({"steps": result.steps, "final_loss": result.history[-1]["loss"],
           "final_mpjpe_mm": result.final_mpjpe, "out": args.out})


def cmd_eval(args):
    cfg = load_dataclass(ModelConfig, args.config) if args.config else None
    cfg, params = load_checkpoint(args.ckpt, cfg)
    clips = read_poses(args.data)
    metrics, pred = run_eval(cfg, params, clips)
    if args.out:
        write_poses(args.out, [{"fps": c.get("fps", 50), "frames": p} for c, p in zip(clips, pred)])
    _dump({k: metrics[k] for k in ("mpjpe", "p_mpjpe", "pck", "auc")})


def cmd_macs(args):
    cfg = load_dataclass(ModelConfig, args.config)
    breakdown = macs_count(cfg, vanilla=args.vanilla or None)
    out = breakdown.as_dict()
    out["per_layer"] = breakdown.layers
    _dump(out)


def cmd_bench(args):
    cfg = load_dataclass(ModelConfig, args.config)
    _dump(bench_throughput(cfg, repeats=args.repeats))


def cmd_kernels(args):
    _dump(bench_kernels(rows=args.rows, repeats=args.repeats))


def cmd_spectrum(args):
    cfg = load_dataclass(ModelConfig, args.config) if args.config else None
    cfg, params = load_checkpoint(args.ckpt, cfg)
    report = spectrum_report(cfg, params, read_poses(args.data), args.block)
    report.to_csv(args.out)
    _dump({"bins": len(report), "low_band_bins": report.meta["low_band_bins"],
           "low_band_fraction": report.meta["low_band_fraction"], "out": args.out})


def build_parser():
    p = argparse.ArgumentParser(prog="sctpose", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic clips as JSON lines")
    g.add_argument("--spec", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train and write model.sctl, config.txt, loss.csv")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--log-every", type=int, default=10)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="metrics JSON for a checkpoint on a dataset")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--config")
    e.add_argument("--out", help="optional JSON-lines file for predictions")
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("macs", help="analytic multiply-accumulate counts")
    m.add_argument("--config", required=True)
    m.add_argument("--vanilla", action="store_true")
    m.set_defaults(func=cmd_macs)

    b = sub.add_parser("bench", help="median forward time, compressed vs vanilla")
    b.add_argument("--config", required=True)
    b.add_argument("--repeats", type=int, default=5)
    b.set_defaults(func=cmd_bench)

    k = sub.add_parser("kernels", help="compiled vs numpy DCT kernel timings")
    k.add_argument("--rows", type=int, default=2048)
    k.add_argument("--repeats", type=int, default=5)
    k.set_defaults(func=cmd_kernels)

    s = sub.add_parser("spectrum", help="power spectrum CSV of one block's input features")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--block", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
