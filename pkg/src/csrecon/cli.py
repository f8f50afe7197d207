"""Command-line interface.

Exit codes: 0 success, 2 usage errors, 3 I/O and file-format errors,
4 numeric failures (divergence, failed gradient checks).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .ablate import format_ablation, run_ablation, write_ablation_csv
from .checkpoint import load_checkpoint
from .data import extract_patches, load_images
from .errors import (
    DatasetError,
    FileFormatError,
    NumericalDivergenceError,
    UsageError,
)
from .evaluate import evaluate_model, format_report, write_csv
from .gradcheck import run_all
from .ista import IstaConfig, StepSizeError, default_step, run_ista
from .measurements import read_measurements, write_measurements
from .metrics import crop_back, pad_to_blocks, psnr
from .model import NetConfig, UnrolledModel, reconstruct
from .pgm import read_pgm, write_pgm
from .sampling import make_operator, measure
from .training import TrainConfig, resume, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _parse_ratio(value: str) -> float:
    try:
        ratio = float(value)
    except ValueError:
        raise UsageError(f"ratio {value!r} is not a number")
    if not 0.0 < ratio <= 1.0:
        raise UsageError(f"ratio must be in (0, 1], got {ratio}")
    return ratio


def _parse_ratio_list(value: str) -> tuple:
    ratios = tuple(_parse_ratio(tok) for tok in value.split(",") if tok.strip())
    if not ratios:
        raise UsageError("empty ratio list")
    return ratios


def _fmt_psnr(value: float) -> str:
    import math

    return "inf" if math.isinf(value) else f"{value:.4f}"


def cmd_sample(args) -> int:
    ratio = _parse_ratio(args.ratio)
    image = read_pgm(args.infile)
    op = make_operator(args.block, ratio, args.seed, orthonormalize=args.orthonormal)
    padded, (h, w) = pad_to_blocks(image, args.block)
    y = measure(op, padded)
    write_measurements(args.out, y, op, orig_h=h, orig_w=w)
    print(f"wrote {args.out}: M={op.m} measurements per block, grid "
          f"{y.data.shape[1]}x{y.data.shape[2]}, ratio {ratio}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    meas = read_measurements(args.meas)
    if args.method == "ista":
        op = meas.operator()
        step = args.step if args.step is not None else default_step(op)
        cfg = IstaConfig(step=step, reg=args.reg, max_iters=args.iters, tol=args.tol)
        image, trace = run_ista(meas.y, op, cfg)
        print(f"ista: {len(trace)} iterations, final objective {trace[-1]:.6g}")
    else:
        if args.ckpt is None:
            raise UsageError("--ckpt is required with --method istanetpp")
        ckpt = load_checkpoint(args.ckpt)
        model = ckpt.model
        if model.config.block_size != meas.block_size:
            raise UsageError(
                f"measurement block size {meas.block_size} does not match "
                f"checkpoint block size {model.config.block_size}"
            )
        try:
            op = model.operator_for(meas.ratio)
        except KeyError:
            if not args.allow_extrapolation:
                raise UsageError(
                    f"ratio {meas.ratio} is not among the checkpoint's trained ratios "
                    f"{model.config.ratios}; pass --allow-extrapolation to override"
                )
            op = meas.operator()
        else:
            if (op.seed, op.orthonormal, op.m) != (meas.seed, meas.orthonormal, meas.y.data.shape[0]):
                raise UsageError(
                    "measurements were sampled with a different operator than the "
                    "checkpoint's (seed/orthonormal/M mismatch); resample or use the "
                    "matching checkpoint"
                )
        image, _ = reconstruct(model, meas.y, op, meas.ratio,
                               allow_extrapolation=args.allow_extrapolation,
                               record_trace=False)
    image = crop_back(image, meas.orig_h, meas.orig_w)
    write_pgm(args.out, image)
    print(f"wrote {args.out}")
    if args.ref is not None:
        ref = read_pgm(args.ref)
        print(f"PSNR: {_fmt_psnr(psnr(image, ref))} dB")
    return EXIT_OK


_TRAIN_KEYS = {
    "dataset_dir": str, "checkpoint_dir": str, "epochs": int, "batch_size": int,
    "lr": float, "ratios": str, "patch_size": int, "seed": int,
    "patches_per_image": int, "stages": int, "channels": int, "hidden": int,
    "block_size": int, "dus_rho": None, "dus_sigma": None, "cbs": None,
    "resume": str,
}


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {value!r}")


def parse_train_config(path) -> dict:
    """key=value lines with # comments; unknown keys are rejected."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in _TRAIN_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            kind = _TRAIN_KEYS[key]
            try:
                if kind is None:
                    values[key] = _parse_bool(raw)
                elif key == "ratios":
                    values[key] = _parse_ratio_list(raw)
                else:
                    values[key] = kind(raw)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value {raw!r} for {key}")
    return values


def cmd_train(args) -> int:
    values = parse_train_config(args.config)
    for required in ("dataset_dir", "checkpoint_dir", "epochs"):
        if required not in values:
            raise UsageError(f"{args.config}: missing required key {required!r}")
    resume_path = values.pop("resume", None)
    net_keys = {k: values.pop(k) for k in
                ("stages", "channels", "hidden", "block_size", "dus_rho", "dus_sigma", "cbs")
                if k in values}
    if "ratios" in values:
        net_keys["ratios"] = values["ratios"]
    if "seed" in values:
        net_keys["seed"] = values["seed"]
    try:
        train_cfg = TrainConfig(**values)
        if resume_path is not None:
            ckpt = load_checkpoint(resume_path)
            result = resume(ckpt, train_cfg)
        else:
            model = UnrolledModel.initialize(NetConfig(**net_keys))
            train_cfg = replace(train_cfg, ratios=model.config.ratios)
            result = train(model, train_cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))
    for i, loss in enumerate(result.losses):
        print(f"epoch {result.final_epoch - len(result.losses) + i + 1}: loss {loss:.6g}")
    print(f"checkpoints in {train_cfg.checkpoint_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ratios = _parse_ratio_list(args.ratios)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    ckpt = load_checkpoint(args.ckpt)
    images = load_images(args.dataset)
    try:
        report = evaluate_model(ckpt.model, images, ratios, methods=methods)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc))
    print(format_report(report))
    if args.out is not None:
        write_csv(report, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_all(seed=args.seed)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} gradient checks passed")
    return EXIT_OK if not failed else EXIT_NUMERIC


def cmd_ablate(args) -> int:
    flags = tuple(f.strip() for f in args.flags.split(",") if f.strip())
    ratios = _parse_ratio_list(args.ratios)
    images = load_images(args.dataset)
    if args.holdout < 1 or args.holdout >= len(images):
        raise UsageError(
            f"--holdout must leave at least one training image, got {args.holdout} "
            f"of {len(images)}"
        )
    train_images = [img for _, img in images[:-args.holdout]]
    test_images = images[-args.holdout:]
    try:
        base = NetConfig(stages=args.stages, channels=args.channels, ratios=ratios,
                         block_size=args.block, hidden=args.hidden, seed=args.seed)
        patches = extract_patches(train_images, args.patch, args.seed,
                                  args.patches_per_image)
        train_cfg = TrainConfig(dataset_dir="", checkpoint_dir="", epochs=args.epochs,
                                batch_size=args.batch_size, lr=args.lr, ratios=ratios,
                                patch_size=args.patch, seed=args.seed)
        rows = run_ablation(base, train_cfg, patches, test_images, flags, args.workdir)
    except ValueError as exc:
        raise UsageError(str(exc))
    print(format_ablation(rows))
    if args.out is not None:
        write_ablation_csv(rows, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csrecon",
        description="Block-based compressive sensing: sample, reconstruct, train, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"csrecon {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="measure an image with a fresh Gaussian operator")
    p.add_argument("--in", dest="infile", required=True, help="input graymap (.pgm)")
    p.add_argument("--ratio", required=True, help="sampling ratio in (0, 1]")
    p.add_argument("--block", type=int, default=32, help="block size B (default 32)")
    p.add_argument("--seed", type=int, default=0, help="operator seed (default 0)")
    p.add_argument("--out", required=True, help="output measurement container")
    p.add_argument("--orthonormal", action="store_true",
                   help="orthonormalize the operator rows (testing fixture)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("reconstruct", help="reconstruct an image from measurements")
    p.add_argument("--method", choices=("ista", "istanetpp"), required=True)
    p.add_argument("--meas", required=True, help="measurement container from `sample`")
    p.add_argument("--out", required=True, help="output graymap (.pgm)")
    p.add_argument("--ckpt", help="checkpoint (required for istanetpp)")
    p.add_argument("--ref", help="reference graymap; prints PSNR when given")
    p.add_argument("--reg", type=float, default=1e-3, help="ista l1 weight (default 1e-3)")
    p.add_argument("--step", type=float, default=None,
                   help="ista step size (default 0.9 / power-iteration L)")
    p.add_argument("--iters", type=int, default=200, help="ista iteration cap (default 200)")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="ista relative objective stop (default 1e-6)")
    p.add_argument("--allow-extrapolation", action="store_true",
                   help="permit ratios the checkpoint was not trained on (untested behavior)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("train", help="train from a key=value config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint over a dataset directory")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dataset", required=True, help="directory of graymaps")
    p.add_argument("--ratios", default="0.1,0.2,0.3,0.4,0.5")
    p.add_argument("--methods", default="istanetpp", help="comma list from {istanetpp,ista}")
    p.add_argument("--out", help="write the report as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="retrain with toggled flags at equal budget")
    p.add_argument("--flags", default="dus_rho,dus_sigma,cbs",
                   help="comma list from {dus_rho,dus_sigma,cbs}")
    p.add_argument("--dataset", required=True, help="directory of graymaps")
    p.add_argument("--ratios", default="0.1,0.3,0.5")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--stages", type=int, default=3)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--block", type=int, default=8)
    p.add_argument("--patch", type=int, default=32)
    p.add_argument("--patches-per-image", type=int, default=3)
    p.add_argument("--holdout", type=int, default=2,
                   help="number of images (sorted last) held out for evaluation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workdir", default="ablation_runs", help="checkpoint scratch directory")
    p.add_argument("--out", help="write the grid as CSV")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileFormatError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (StepSizeError, NumericalDivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
