"""Command-line entry point: ``aquanet {train,enhance,eval,inspect,metrics,info}``."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .backbone import count_flops, count_params, init_params
from .metrics import metric_report


def _png_inputs(path):
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() == ".png")
    if not path.exists():
        raise FileNotFoundError(f"{path} does not exist")
    return [path]


def _load_model(ckpt):
    arrays = io.load_checkpoint(ckpt)
    config = io.infer_model_config(arrays)
    return io.params_from_arrays(arrays, config), config


def cmd_train(args):
    from .training import train

    run = io.load_run_config(args.config)
    if not run.data_root:
        raise io.ConfigError("data_root is not set")
    manifest = io.build_manifest(run.data_root, require_reference=True)
    out_dir = Path(run.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.cfg").write_text(io.format_run_config(run))
    _, tlog = train(run.train_config(), manifest, out_dir=out_dir)
    print(f"trained {len(tlog.steps)} steps; final loss {tlog.losses[-1] if tlog.steps else float('nan'):.5f}; "
          f"checkpoints in {out_dir}")


def cmd_enhance(args):
    from .training import enhance_image

    params, config = _load_model(args.ckpt)
    out = Path(args.out)
    for path in _png_inputs(args.inp):
        io.save_image(out / path.name, enhance_image(params, config, io.load_image(path)))
        print(out / path.name)


def cmd_eval(args):
    from .training import evaluate

    params, config = _load_model(args.ckpt)
    result = evaluate(params, config, io.build_manifest(args.data))
    result.write_csv(args.out)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    for name, value in result.means.items():
        print(f"{name} {value:.4f}")


def cmd_inspect(args):
    from .training import enhance_image

    params, config = _load_model(args.ckpt)
    src = Path(args.inp)
    enhanced, illum, corr = enhance_image(params, config, io.load_image(src), return_maps=True)
    out = Path(args.out)
    io.save_image(out / f"{src.stem}_enhanced.png", enhanced)
    io.save_gray(out / f"{src.stem}_illumination.png", np.clip(np.round(illum * 127.5), 0, 255))
    lo, hi = float(corr.min()), float(corr.max())
    scaled = (corr - lo) / (hi - lo) * 255.0 if hi > lo else np.zeros_like(corr)
    io.save_image(out / f"{src.stem}_correction.png", np.round(scaled).astype(np.uint8).transpose(1, 2, 0))
    print(f"correction range [{lo:.4f}, {hi:.4f}], illumination range [{illum.min():.4f}, {illum.max():.4f}]")


def cmd_metrics(args):
    a_files = _png_inputs(args.a)
    b_files = None
    if args.b is not None:
        b_files = _png_inputs(args.b)
        if len(b_files) == 1 and len(a_files) == 1:
            pass
        elif [p.name for p in a_files] != [p.name for p in b_files]:
            raise io.ManifestError("--a and --b do not contain the same file names")
    cols = ["psnr", "ssim", "uiqm", "uciqe"] if b_files else ["uiqm", "uciqe"]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["image", *cols])
    for i, path in enumerate(a_files):
        ref = io.load_image(b_files[i]) if b_files else None
        rep = metric_report(io.load_image(path), ref, cols)
        w.writerow([path.name, *("inf" if rep[c] == math.inf else f"{rep[c]:.6f}" for c in cols)])


def cmd_info(args):
    run = io.load_run_config(args.config) if args.config else io.RunConfig()
    config = run.model_config()
    size = args.size or run.input_size
    n = count_params(init_params(config, seed=0))
    print(f"ablation {config.ablation}  base_channels {config.base_channels}")
    print(f"parameters {n} ({n / 1e6:.3f} M)")
    print(f"flops@{size}x{size} {count_flops(config, size, size)} ({count_flops(config, size, size) / 1e9:.3f} G)")


def build_parser():
    p = argparse.ArgumentParser(prog="aquanet", description="Underwater image enhancement network.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="train from a key=value config file")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("enhance", help="enhance a PNG or a directory of PNGs")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_enhance)

    s = sub.add_parser("eval", help="score a dataset (raw/ and optional reference/)")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("inspect", help="dump correction and illumination maps")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_inspect)

    s = sub.add_parser("metrics", help="standalone image quality metrics")
    s.add_argument("--a", required=True)
    s.add_argument("--b")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("info", help="parameter and FLOP counts")
    s.add_argument("--config")
    s.add_argument("--size", type=int)
    s.set_defaults(func=cmd_info)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except Exception as exc:  # one greppable line, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
