"""Command line entry point: ``lfcycle <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .interp import ArchConfig
from .lightfield import AngularAxis, extract_epi, subsample
from .losses import LossWeights
from .metrics import evaluate
from .reconstruct import ReconstructionPlan, multistep_reconstruct
from .synth import SceneSpec, default_mask, gen_planar_lf, gen_two_layer_lf
from .trainer import PretrainConfig, TrainConfig, finetune, pretrain_baseline

log = logging.getLogger("lfcycle")


def _pair(text: str, sep="x") -> tuple[int, int]:
    try:
        a, b = text.lower().split(sep)
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AxB, got {text!r}") from None


def _widths(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}") from None


def _arch_args(p):
    p.add_argument("--widths", type=_widths, default=ArchConfig().widths)
    p.add_argument("--kernel", type=int, default=ArchConfig().kernel_size)


def _train_args(p):
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--coarse", type=int, default=150)
    p.add_argument("--fine", type=int, default=128)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--sched-window", type=int, default=500)
    p.add_argument("--lambda-c", type=float, default=1.0)
    p.add_argument("--lambda-r", type=float, default=1.0)
    p.add_argument("--lambda-p", type=float, default=0.06)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfcycle", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dense light field")
    p.add_argument("--scene", choices=["planar", "two-layer"], default="planar")
    p.add_argument("--disparity", type=float, default=2.0)
    p.add_argument("--fg-disparity", type=float)
    p.add_argument("--mask", type=Path)
    p.add_argument("--grid", type=_pair, default=(9, 9), help="RxC views")
    p.add_argument("--size", type=_pair, default=(128, 128), help="WxH pixels")
    p.add_argument("--texture", default="noise", help="noise, checker or an image path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("subsample", help="keep every alpha-th view")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--alpha", type=int, choices=[2, 4], required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("pretrain", help="train the baseline interpolator on shifted textures")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patch", type=int, default=32)
    p.add_argument("--max-shift", type=int, default=1, help="largest half-motion in pixels")
    p.add_argument("--lr", type=float, default=1e-3)
    _arch_args(p)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint along one axis")
    p.add_argument("--in", dest="inp", required=True, help="sparse light field dir(s), comma separated")
    p.add_argument("--baseline", type=Path, required=True)
    p.add_argument("--axis", choices=["h", "v"], required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--mode", choices=["self", "no-cycle", "supervised"], default="self")
    p.add_argument("--supervised", action="store_true", help="shorthand for --mode supervised")
    p.add_argument("--gt", help="dense light field dir(s) matching --in, supervised mode only")
    p.add_argument("--report", type=Path, help="write the training report as JSON")
    _train_args(p)

    p = sub.add_parser("synthesize", help="reconstruct a dense light field")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--alpha", type=int, choices=[2, 4], required=True)
    p.add_argument("--model-h", type=Path, required=True)
    p.add_argument("--model-v", type=Path, required=True)
    p.add_argument("--order", choices=["hv", "vh"], default="hv")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("evaluate", help="PSNR/SSIM over synthesized views")
    p.add_argument("--recon", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--margin", type=int, default=0)
    p.add_argument("--csv", type=Path)

    p = sub.add_parser("epi", help="write an epipolar-plane image")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--axis", choices=["h", "v"], required=True)
    p.add_argument("--line", type=int, required=True)
    p.add_argument("--fixed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("ablate", help="run the five ablation configurations")
    p.add_argument("--dense", type=Path, required=True)
    p.add_argument("--alpha", type=int, choices=[2, 4], default=2)
    p.add_argument("--workdir", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--baseline", type=Path, help="reuse a baseline checkpoint instead of pre-training")
    p.add_argument("--pretrain-iters", type=int, default=300)
    p.add_argument("--margin", type=int, default=0)
    _arch_args(p)
    _train_args(p)
    return parser


def _train_config(args, mode) -> TrainConfig:
    return TrainConfig(
        lr=args.lr, batch_size=args.batch, iterations=args.iters, coarse_crop=args.coarse,
        fine_crop=args.fine, disparity_threshold=args.threshold, sched_window=args.sched_window,
        weights=LossWeights(args.lambda_c, args.lambda_r, args.lambda_p), seed=args.seed, mode=mode,
    )


def cmd_gen(args):
    w, h = args.size
    mask = None
    if args.mask is not None:
        mask = io.load_image(args.mask).mean(axis=-1) > 0.5
    spec = SceneSpec(disparity=args.disparity, grid=args.grid, size=(h, w), texture=args.texture,
                     seed=args.seed, fg_disparity=args.fg_disparity, mask=mask)
    if args.scene == "planar":
        lf = gen_planar_lf(spec)
    else:
        if args.fg_disparity is None:
            raise ValueError("--scene two-layer needs --fg-disparity")
        lf = gen_two_layer_lf(spec if mask is not None else
                              SceneSpec(**{**spec.__dict__, "mask": default_mask((h, w))}))
    io.save_lf(lf, args.out)


def cmd_subsample(args):
    lf = io.load_lf(args.inp)
    io.save_lf(subsample(lf, args.alpha), args.out, name=lf.meta.get("name"))


def cmd_pretrain(args):
    cfg = PretrainConfig(arch=ArchConfig(args.widths, args.kernel), iterations=args.iters,
                         patch=args.patch, max_half_shift=args.max_shift, lr=args.lr, seed=args.seed)
    io.save_model(pretrain_baseline(cfg), args.out)


def cmd_finetune(args):
    mode = "supervised" if args.supervised else args.mode
    inputs = [io.load_lf(p) for p in args.inp.split(",")]
    dense = [io.load_lf(p) for p in args.gt.split(",")] if args.gt else None
    alpha = int(inputs[0].meta.get("alpha", 2))
    model, report = finetune(io.load_model(args.baseline), inputs, args.axis, _train_config(args, mode),
                             dense=dense, alpha=alpha)
    io.save_model(model, args.out)
    if args.report:
        args.report.write_text(json.dumps(report.to_dict(), indent=2, default=float))


def cmd_synthesize(args):
    lf = io.load_lf(args.inp)
    plan = ReconstructionPlan(args.alpha, io.load_model(args.model_h), io.load_model(args.model_v), args.order)
    io.save_lf(multistep_reconstruct(lf, plan), args.out, name=lf.meta.get("name"))


def cmd_evaluate(args):
    recon, gt = io.load_lf(args.recon), io.load_lf(args.gt)
    report = evaluate(recon, gt, args.alpha, margin=args.margin, dataset=gt.meta.get("name", ""))
    io.save_report(report, args.report, args.csv)
    print(f"mean PSNR {report.mean_psnr:.3f} dB  mean SSIM {report.mean_ssim:.5f}  "
          f"({len(report.records)} views)")


def cmd_epi(args):
    lf = io.load_lf(args.inp)
    io.save_epi(extract_epi(lf, args.axis, args.line, args.fixed), args.out)


ABLATION_MODES = ("pretrained", "supervised", "no-cycle", "vh", "full")


def cmd_ablate(args):
    work = args.workdir
    work.mkdir(parents=True, exist_ok=True)
    dense = io.load_lf(args.dense)
    sparse = subsample(dense, args.alpha)
    if args.baseline:
        base = io.load_model(args.baseline)
    else:
        base = pretrain_baseline(PretrainConfig(arch=ArchConfig(args.widths, args.kernel),
                                                iterations=args.pretrain_iters, seed=args.seed))
    io.save_model(base, work / "baseline.ck")

    models = {"pretrained": (base, base)}
    for mode, name in (("supervised", "supervised"), ("no-cycle", "no-cycle"), ("self", "full")):
        pair = []
        for axis in ("h", "v"):
            cfg = _train_config(args, mode)
            m, _ = finetune(base, [sparse], axis, cfg, dense=[dense], alpha=args.alpha)
            io.save_model(m, work / f"{name}_{axis}.ck")
            pair.append(m)
        models[name] = tuple(pair)
    models["vh"] = models["full"]

    merged = {"alpha": args.alpha, "dataset": dense.meta.get("name", ""), "modes": {}}
    for mode in ABLATION_MODES:
        mh, mv = models[mode]
        plan = ReconstructionPlan(args.alpha, mh, mv, "vh" if mode == "vh" else "hv")
        recon = multistep_reconstruct(sparse, plan)
        rep = evaluate(recon, dense, args.alpha, margin=args.margin, dataset=dense.meta.get("name", ""))
        rep.meta["mode"] = mode
        merged["modes"][mode] = rep.to_dict()
        print(f"{mode:>10}: PSNR {rep.mean_psnr:.3f} dB  SSIM {rep.mean_ssim:.5f}")
    args.report.write_text(json.dumps(merged, indent=2, sort_keys=True))


COMMANDS = {
    "gen": cmd_gen, "subsample": cmd_subsample, "pretrain": cmd_pretrain, "finetune": cmd_finetune,
    "synthesize": cmd_synthesize, "evaluate": cmd_evaluate, "epi": cmd_epi, "ablate": cmd_ablate,
}


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "finetune" and (args.supervised or args.mode == "supervised") and not args.gt:
        parser.print_usage(sys.stderr)
        print("lfcycle finetune: error: supervised mode requires --gt", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        COMMANDS[args.command](args)
    except Exception as exc:  # single-line diagnostic, nonzero exit
        print(f"lfcycle {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
