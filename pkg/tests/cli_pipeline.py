"""Shared CLI pipeline used by the CLI and acceptance tests."""

import hashlib
from pathlib import Path

from lfcycle.cli import cli

TINY_ARCH = ["--widths", "4,8", "--kernel", "5"]
TINY_TRAIN = ["--iters", "4", "--batch", "2", "--coarse", "32", "--fine", "32", "--sched-window", "2"]


def run(*argv) -> None:
    code = cli([str(a) for a in argv])
    if code != 0:
        raise AssertionError(f"lfcycle {' '.join(map(str, argv))} exited {code}")


def full_pipeline(root: Path, seed: int = 7, size: str = "32x32") -> Path:
    """gen -> subsample -> pretrain -> finetune (h, v) -> synthesize -> evaluate; returns the report."""
    root.mkdir(parents=True, exist_ok=True)
    d, s, r = root / "dense", root / "sparse", root / "recon"
    run("gen", "--scene", "planar", "--disparity", "1", "--grid", "9x9", "--size", size,
        "--seed", seed, "--out", d)
    run("subsample", "--in", d, "--alpha", 2, "--out", s)
    run("pretrain", "--out", root / "base.ck", "--iters", 3, "--patch", 16, "--seed", seed, *TINY_ARCH)
    for axis in ("h", "v"):
        run("finetune", "--in", s, "--baseline", root / "base.ck", "--axis", axis,
            "--out", root / f"{axis}.ck", "--seed", seed, *TINY_TRAIN)
    run("synthesize", "--in", s, "--alpha", 2, "--model-h", root / "h.ck", "--model-v", root / "v.ck",
        "--order", "hv", "--out", r)
    run("evaluate", "--recon", r, "--gt", d, "--alpha", 2, "--report", root / "report.json")
    return root / "report.json"


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
