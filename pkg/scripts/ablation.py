"""Five-way ablation (pretrained / supervised / no-cycle / vh / full) through the CLI.

    python scripts/ablation.py --work runs/ablation --iters 150
"""

import argparse
import json
import sys
from pathlib import Path

from lfcycle.cli import cli


def run(*argv):
    code = cli([str(a) for a in argv])
    if code:
        sys.exit(code)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--work", type=Path, default=Path("runs/ablation"))
    p.add_argument("--disparity", type=float, default=2.0)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--alpha", type=int, choices=[2, 4], default=2)
    p.add_argument("--iters", type=int, default=150)
    p.add_argument("--pretrain-iters", type=int, default=300)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()
    w = args.work
    w.mkdir(parents=True, exist_ok=True)

    run("gen", "--scene", "planar", "--disparity", args.disparity, "--grid", "9x9",
        "--size", f"{args.size}x{args.size}", "--seed", 500, "--out", w / "dense")
    run("pretrain", "--out", w / "baseline.ck", "--iters", args.pretrain_iters,
        "--widths", "8,16,32", "--kernel", 11, "--seed", 0)
    run("ablate", "--dense", w / "dense", "--alpha", args.alpha, "--workdir", w / "models",
        "--report", w / "ablation.json", "--baseline", w / "baseline.ck", "--iters", args.iters,
        "--batch", 4, "--coarse", 48, "--fine", 32, "--sched-window", 50, "--margin", 8,
        "--seed", args.seed)
    modes = json.loads((w / "ablation.json").read_text())["modes"]
    for name, rep in modes.items():
        print(f"{name:>10}  {rep['mean_psnr']:7.3f} dB  {rep['mean_ssim']:.4f}")


if __name__ == "__main__":
    main()
