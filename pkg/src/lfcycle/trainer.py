"""Patch sampling, disparity screening, baseline pre-training and fine-tuning loops."""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor
from .interp import ArchConfig, InterpolatorModel, to_nchw
from .lightfield import AngularAxis, LightField, ViewTriplet, extract_triplets
from .losses import (FeatureExtractor, LossWeights, TripletBatch, l1,
                     self_supervised_terms, supervised_loss)
from .synth import shifted_pair_batch

log = logging.getLogger(__name__)

MODES = ("self", "no-cycle", "supervised")
DEFAULT_CROPS = (150, 128)
DESK_CROPS = (96, 64)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 8
    iterations: int = 1000
    coarse_crop: int = 150
    fine_crop: int = 128
    disparity_threshold: float = 1.0
    weights: LossWeights = field(default_factory=LossWeights)
    sched_factor: float = 0.5
    sched_window: int = 500
    min_lr: float = 1e-5
    sched_min_improvement: float = 0.01
    seed: int = 0
    order: str = "hv"
    mode: str = "self"
    retry_budget: int = 50
    max_shift: int = 8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.fine_crop > self.coarse_crop:
            raise ValueError(f"fine crop {self.fine_crop} larger than coarse crop {self.coarse_crop}")
        if self.disparity_threshold < 0:
            raise ValueError("disparity threshold must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.order not in ("hv", "vh"):
            raise ValueError(f"order must be 'hv' or 'vh', got {self.order!r}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    total: list = field(default_factory=list)
    cycle: list = field(default_factory=list)
    recon: list = field(default_factory=list)
    perceptual: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    accepted: int = 0
    rejected: int = 0
    wall_clock: float = 0.0
    crops: tuple = ()
    decisions: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.total)

    def to_dict(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------------ screening


def _gray(img):
    return np.asarray(img, dtype=np.float64).mean(axis=-1)


def estimate_shift(a, b, axis, max_shift: int = 8) -> int:
    """Integer k in [-max_shift, max_shift] maximising NCC between a(x + k) and b(x)."""
    axis = AngularAxis.parse(axis)
    ga, gb = _gray(a), _gray(b)
    if axis is AngularAxis.VERTICAL:
        ga, gb = ga.T, gb.T
    w = ga.shape[1]
    best_k, best = 0, -np.inf
    for k in sorted(range(-max_shift, max_shift + 1), key=lambda v: (abs(v), v)):
        if abs(k) >= w:
            continue
        if k >= 0:
            pa, pb = ga[:, k:], gb[:, : w - k]
        else:
            pa, pb = ga[:, : w + k], gb[:, -k:]
        pa = pa - pa.mean()
        pb = pb - pb.mean()
        den = np.sqrt((pa * pa).sum() * (pb * pb).sum())
        score = (pa * pb).sum() / den if den > 1e-12 else 0.0
        if score > best + 1e-12:
            best_k, best = k, score
    return best_k


def disparity_screen(triplet: ViewTriplet, threshold: float, max_shift: int = 8) -> bool:
    """Accept a patch triplet iff the left/right displacement is at least ``threshold`` px."""
    if threshold <= 0:
        return True
    return abs(estimate_shift(triplet.left, triplet.right, triplet.axis, max_shift)) >= threshold


# ------------------------------------------------------------------ patches


def effective_crops(h: int, w: int, config: TrainConfig, multiple: int = 1) -> tuple[int, int]:
    coarse, fine = config.coarse_crop, config.fine_crop
    side = min(h, w)
    if side < coarse:
        if (coarse, fine) == DEFAULT_CROPS and side >= DESK_CROPS[0]:
            coarse, fine = DESK_CROPS
        else:
            coarse, fine = side, min(fine, side)
    fine -= fine % multiple
    if fine < multiple:
        raise ValueError(f"views {h}x{w} too small for patches divisible by {multiple}")
    return coarse, fine


def _random_patch(triplet: ViewTriplet, coarse: int, fine: int, rng) -> ViewTriplet:
    h, w = triplet.center.shape[:2]
    gy, gx = max(h // coarse, 1), max(w // coarse, 1)
    cy, cx = int(rng.integers(gy)) * coarse, int(rng.integers(gx)) * coarse
    ch, cw = min(coarse, h - cy), min(coarse, w - cx)
    fy = cy + int(rng.integers(ch - fine + 1))
    fx = cx + int(rng.integers(cw - fine + 1))
    return triplet.crop(fy, fx, fine, fine)


def sample_patch_triplet(lf, axis, config: TrainConfig, rng, crops=None, stats=None) -> ViewTriplet:
    """Random screened patch triplet from a sparse light field (or a list of its triplets)."""
    triplets = lf if isinstance(lf, list) else extract_triplets(lf, axis)
    if not triplets:
        raise ValueError("no triplets available along the requested axis")
    h, w = triplets[0].center.shape[:2]
    coarse, fine = crops or effective_crops(h, w, config)
    for _ in range(config.retry_budget):
        trip = triplets[int(rng.integers(len(triplets)))]
        patch = _random_patch(trip, coarse, fine, rng)
        if disparity_screen(patch, config.disparity_threshold, config.max_shift):
            if stats is not None:
                stats["accepted"] += 1
            return patch
        if stats is not None:
            stats["rejected"] += 1
    raise RuntimeError(
        f"no patch passed the disparity screen (threshold {config.disparity_threshold} px) "
        f"after {config.retry_budget} attempts"
    )


def attach_ground_truth(triplets: Sequence[ViewTriplet], dense: LightField, alpha: int):
    """Add dense midpoint views to triplets taken from ``subsample(dense, alpha)``."""
    if alpha % 2:
        raise ValueError("ground-truth midpoints need an even alpha")
    half = alpha // 2
    out = []
    for tr in triplets:
        t, s = tr.origin
        T, S = alpha * t, alpha * s
        if tr.axis is AngularAxis.HORIZONTAL:
            gl, gr = dense.view(T, S - half), dense.view(T, S + half)
        else:
            gl, gr = dense.view(T - half, S), dense.view(T + half, S)
        out.append(ViewTriplet(tr.left, tr.center, tr.right, tr.axis, tr.origin, gl, gr))
    return out


# ------------------------------------------------------------------ scheduler


@dataclass
class SchedulerState:
    lr: float
    factor: float = 0.5
    window: int = 500
    min_lr: float = 1e-5
    min_improvement: float = 0.01
    prev_mean: Optional[float] = None
    buffer: list = field(default_factory=list)


def lr_schedule_step(state: SchedulerState, window_mean: float) -> float:
    """Halve the rate unless the windowed mean improved by at least ``min_improvement``."""
    if state.prev_mean is not None and window_mean > state.prev_mean * (1.0 - state.min_improvement):
        state.lr = max(state.lr * state.factor, state.min_lr)
    state.prev_mean = window_mean
    return state.lr


def _record_loss(state: SchedulerState, loss: float) -> float:
    state.buffer.append(loss)
    if len(state.buffer) >= state.window:
        lr_schedule_step(state, float(np.mean(state.buffer)))
        state.buffer.clear()
    return state.lr


# ------------------------------------------------------------------ training


@dataclass
class PretrainConfig:
    arch: ArchConfig = field(default_factory=ArchConfig)
    iterations: int = 300
    batch_size: int = 8
    patch: int = 32
    max_half_shift: int = 1
    lr: float = 1e-3
    target_loss: float = 0.0
    seed: int = 0


def pretrain_baseline(config: PretrainConfig = PretrainConfig(), rng=None) -> InterpolatorModel:
    """Supervised training on shifted-texture frame pairs; stands in for a video-pretrained model.

    The result is tagged ``baseline``; ``provenance["warning"]`` is set when the
    iteration budget ran out before the batch loss fell below ``target_loss``.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    model = InterpolatorModel.init(config.arch, seed=config.seed, axis="generic")
    model.check_size(config.patch, config.patch)
    opt = Adam(model.parameters(), lr=config.lr)
    history = []
    reached = False
    for _ in range(config.iterations):
        a, mid, b = shifted_pair_batch(rng, config.batch_size, config.patch, config.max_half_shift)
        pred = model.forward(Tensor(to_nchw(a)), Tensor(to_nchw(b)))
        loss = l1(pred, Tensor(to_nchw(mid)))
        opt.zero_grad()
        ad.backward(loss)
        opt.step()
        history.append(loss.item())
        if not math.isfinite(history[-1]):
            raise FloatingPointError(f"pre-training loss became {history[-1]} at iteration {len(history)}")
        if history[-1] < config.target_loss:
            reached = True
            break
    model.provenance = {
        "tag": "baseline",
        "seed": config.seed,
        "iterations": len(history),
        "final_loss": history[-1] if history else None,
        "max_half_shift": config.max_half_shift,
        "patch": config.patch,
    }
    if not reached:
        model.provenance["warning"] = "budget exhausted before reaching target loss"
        warnings.warn("pre-training budget exhausted before reaching the target loss", RuntimeWarning,
                      stacklevel=2)
    return model


def finetune(model: InterpolatorModel, lfs: Sequence[LightField], axis, config: TrainConfig,
             dense: Optional[Sequence[LightField]] = None, alpha: int = 2,
             extractor: Optional[FeatureExtractor] = None):
    """Fine-tune a copy of ``model`` along one angular axis; returns (model, TrainReport).

    ``lfs`` are sparse light fields. ``dense`` (same order) is read only in
    supervised mode.
    """
    axis = AngularAxis.parse(axis)
    w = config.weights
    if config.mode == "no-cycle" and w.recon == 0:
        raise ValueError("no-cycle mode with recon weight 0 has an identically zero objective")
    if config.mode == "self" and w.cycle == 0 and w.recon == 0 and w.perceptual == 0:
        raise ValueError("all loss weights are zero")
    if config.mode == "supervised" and (dense is None or len(dense) != len(lfs)):
        raise ValueError("supervised mode needs one dense ground-truth light field per input")

    triplet_sets = []
    for i, lf in enumerate(lfs):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            trips = extract_triplets(lf, axis)
        if trips and config.mode == "supervised":
            trips = attach_ground_truth(trips, dense[i], alpha)
        if trips:
            triplet_sets.append(trips)
    if not triplet_sets:
        raise ValueError(f"no triplets along the {axis.name.lower()} axis in the training light fields")

    multiple = 2**model.config.levels
    h = min(t[0].center.shape[0] for t in triplet_sets)
    wd = min(t[0].center.shape[1] for t in triplet_sets)
    crops = effective_crops(h, wd, config, multiple)

    net = model.copy(axis=axis.value)
    if extractor is None and config.mode == "self" and w.perceptual:
        extractor = FeatureExtractor.seeded()
    opt = Adam(net.parameters(), lr=config.lr)
    sched = SchedulerState(config.lr, config.sched_factor, config.sched_window, config.min_lr,
                           config.sched_min_improvement)
    rng = np.random.default_rng(config.seed)
    report = TrainReport(crops=crops, decisions={
        "mode": config.mode,
        "axis": axis.value,
        "order": config.order,
        "scheduler": f"x{config.sched_factor} when {config.sched_window}-iteration mean improves <"
                     f"{config.sched_min_improvement:.0%}",
        "sampling": "uniform over light fields, then uniform over triplets",
        "axes_mixed": False,
        "init": model.provenance.get("tag", "unknown"),
    })
    stats = {"accepted": 0, "rejected": 0}
    t0 = time.perf_counter()
    for it in range(config.iterations):
        batch_trips = []
        for _ in range(config.batch_size):
            trips = triplet_sets[int(rng.integers(len(triplet_sets)))]
            batch_trips.append(sample_patch_triplet(trips, axis, config, rng, crops, stats))
        batch = TripletBatch.from_triplets(batch_trips, net.dtype)
        if config.mode == "supervised":
            total = supervised_loss(batch, net)
            parts = (0.0, 0.0, 0.0)
        else:
            total, lc, lr_, lp = self_supervised_terms(batch, net, extractor, w,
                                                       use_cycle=config.mode == "self")
            parts = (lc.item(), lr_.item(), lp.item())
        value = total.item()
        if not math.isfinite(value):
            raise FloatingPointError(
                f"non-finite loss {value} at iteration {it} (lr {opt.lr:g}, mode {config.mode})"
            )
        opt.zero_grad()
        ad.backward(total)
        opt.step()
        report.total.append(value)
        report.cycle.append(parts[0])
        report.recon.append(parts[1])
        report.perceptual.append(parts[2])
        report.lr.append(opt.lr)
        opt.lr = _record_loss(sched, value)
        if it % 50 == 0:
            log.info("iter %d loss %.5f lr %g", it, value, opt.lr)
    report.accepted, report.rejected = stats["accepted"], stats["rejected"]
    report.wall_clock = time.perf_counter() - t0
    net.provenance = {**model.provenance, "tag": f"finetuned-{config.mode}", "axis": axis.value,
                      "iterations": config.iterations, "seed": config.seed}
    net.provenance.pop("warning", None)
    return net, report
