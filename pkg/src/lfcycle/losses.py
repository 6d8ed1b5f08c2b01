"""Self-supervised cycle, reconstruction and perceptual losses plus the supervised
ablation loss. All norms are per-element means so weights do not depend on patch size.

Losses take batched triplets: three NCHW tensors (left, center, right) holding the
same spatial window of consecutive sparse views.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .interp import to_nchw, to_nhwc
from .lightfield import ViewTriplet


@dataclass(frozen=True)
class LossWeights:
    cycle: float = 1.0
    recon: float = 1.0
    perceptual: float = 0.06

    def __post_init__(self):
        for name in ("cycle", "recon", "perceptual"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"loss weight {name} must be finite and >= 0, got {v}")


@dataclass
class TripletBatch:
    left: Tensor
    center: Tensor
    right: Tensor
    gt_left_mid: Tensor | None = None
    gt_right_mid: Tensor | None = None

    @classmethod
    def from_triplets(cls, triplets: Sequence[ViewTriplet], dtype=np.float32) -> "TripletBatch":
        def stack(attr):
            return Tensor(to_nchw(np.stack([getattr(t, attr) for t in triplets]).astype(dtype)))

        gt = all(t.has_ground_truth for t in triplets)
        return cls(stack("left"), stack("center"), stack("right"),
                   stack("gt_left_mid") if gt else None, stack("gt_right_mid") if gt else None)


def _batch(triplet, dtype=np.float32) -> TripletBatch:
    if isinstance(triplet, TripletBatch):
        return triplet
    if isinstance(triplet, ViewTriplet):
        return TripletBatch.from_triplets([triplet], dtype)
    return TripletBatch.from_triplets(list(triplet), dtype)


def _model_fn(model):
    """Graph-building callable for a model or a plain function of two NCHW tensors.

    Objects exposing only ``interpolate`` (e.g. the translation oracle) are wrapped
    as constants: they take part in the loss value but carry no gradient.
    """
    if hasattr(model, "forward"):
        return model.forward
    if hasattr(model, "interpolate"):
        def fn(a: Tensor, b: Tensor) -> Tensor:
            out = model.interpolate(to_nhwc(a.data), to_nhwc(b.data))
            return Tensor(to_nchw(np.asarray(out, dtype=a.dtype)))
        return fn
    return model


def l1(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ValueError(f"l1: shapes differ {x.shape} vs {y.shape}")
    return ad.mean(ad.abs_(ad.sub(x, y)))


def l2(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ValueError(f"l2: shapes differ {x.shape} vs {y.shape}")
    return ad.mean(ad.square(ad.sub(x, y)))


def _split(t: Tensor, n: int, parts: int):
    return [ad.slice_(t, slice(i * n, (i + 1) * n)) for i in range(parts)]


def first_stage(batch: TripletBatch, model):
    """Both pairwise midpoints and the wide-gap centre estimate in one batched pass.

    Returns (mid_left, mid_right, center_from_ends).
    """
    m = _model_fn(model)
    n = batch.left.shape[0]
    a = ad.concat([batch.left, batch.center, batch.left], axis=0)
    b = ad.concat([batch.center, batch.right, batch.right], axis=0)
    return tuple(_split(m(a, b), n, 3))


def cycle_reconstruct(triplet, model) -> Tensor:
    """M(M(left, center), M(center, right))."""
    batch = _batch(triplet)
    m = _model_fn(model)
    n = batch.left.shape[0]
    mids = m(ad.concat([batch.left, batch.center], axis=0), ad.concat([batch.center, batch.right], axis=0))
    ml, mr = _split(mids, n, 2)
    return m(ml, mr)


def _inner(t: Tensor, margin: int) -> Tensor:
    if margin <= 0:
        return t
    h, w = t.shape[-2:]
    return ad.crop(t, margin, margin, h - 2 * margin, w - 2 * margin)


def cycle_loss(triplet, model, margin: int = 0) -> Tensor:
    """L1 between the cycle estimate and the centre view; ``margin`` drops a border band."""
    batch = _batch(triplet)
    return l1(_inner(cycle_reconstruct(batch, model), margin), _inner(batch.center, margin))


def reconstruction_loss(triplet, model, margin: int = 0) -> Tensor:
    """Centre view estimated from the two outer views (a doubled gap)."""
    batch = _batch(triplet)
    return l1(_inner(_model_fn(model)(batch.left, batch.right), margin), _inner(batch.center, margin))


def supervised_loss(triplet, model) -> Tensor:
    batch = _batch(triplet)
    if batch.gt_left_mid is None or batch.gt_right_mid is None:
        raise ValueError("supervised loss needs ground-truth midpoint views")
    m = _model_fn(model)
    n = batch.left.shape[0]
    mids = m(ad.concat([batch.left, batch.center], axis=0), ad.concat([batch.center, batch.right], axis=0))
    ml, mr = _split(mids, n, 2)
    return ad.mul(ad.add(l1(ml, batch.gt_left_mid), l1(mr, batch.gt_right_mid)), 0.5)


class FeatureExtractor:
    """Frozen conv + relu (+ 2x2 average pool) stack used as the perceptual feature map."""

    def __init__(self, stages: list[tuple[np.ndarray, np.ndarray]], pool: bool = True,
                 origin: str = "seeded", tap_depth: int | None = None):
        if not stages:
            raise ValueError("feature extractor needs at least one stage")
        self.stages = []
        for w, b in stages:
            w = np.array(w)
            b = np.array(b)
            w.setflags(write=False)
            b.setflags(write=False)
            self.stages.append((w, b))
        self.pool = pool
        self.origin = origin
        self.tap_depth = len(stages) if tap_depth is None else tap_depth

    @classmethod
    def seeded(cls, widths=(8, 16, 16), seed: int = 1234, dtype=np.float32) -> "FeatureExtractor":
        rng = np.random.default_rng(seed)
        stages, cin = [], 3
        for cout in widths:
            # unit-variance draw, scaled by fan-in so activations keep unit scale
            w = rng.standard_normal((cout, cin, 3, 3)) / np.sqrt(cin * 9)
            stages.append((w.astype(dtype), np.zeros(cout, dtype=dtype)))
            cin = cout
        return cls(stages, origin=f"seeded:{seed}")

    @classmethod
    def identity(cls, dtype=np.float32) -> "FeatureExtractor":
        w = np.zeros((3, 3, 3, 3), dtype=dtype)
        for c in range(3):
            w[c, c, 1, 1] = 1.0
        return cls([(w, np.zeros(3, dtype=dtype))], pool=False, origin="identity")

    def __call__(self, x: Tensor) -> Tensor:
        for w, b in self.stages[: self.tap_depth]:
            wt, bt = Tensor(w.astype(x.dtype, copy=False)), Tensor(b.astype(x.dtype, copy=False))
            x = ad.relu(ad.conv2d(x, wt, bt, padding=w.shape[-1] // 2))
            if self.pool and x.shape[-1] % 2 == 0 and x.shape[-2] % 2 == 0:
                x = ad.avg_pool2(x)
        return x


def perceptual_loss(img_x, img_y, extractor: FeatureExtractor) -> Tensor:
    img_x, img_y = _as_nchw(img_x), _as_nchw(img_y)
    if img_x.shape != img_y.shape:
        raise ValueError(f"perceptual loss: shapes differ {img_x.shape} vs {img_y.shape}")
    return l2(extractor(img_x), extractor(img_y))


def _as_nchw(img) -> Tensor:
    if isinstance(img, Tensor):
        return img
    arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr[None]
    return Tensor(to_nchw(arr))


def total_objective(lc, lr, lp, weights: LossWeights) -> Tensor:
    terms = []
    for value, w in ((lc, weights.cycle), (lr, weights.recon), (lp, weights.perceptual)):
        terms.append(ad.mul(ad.as_tensor(value), float(w)))
    return ad.add(ad.add(terms[0], terms[1]), terms[2])


def self_supervised_terms(batch: TripletBatch, model, extractor: FeatureExtractor | None,
                          weights: LossWeights, use_cycle: bool = True):
    """(total, cycle, recon, perceptual) for one batch, sharing first-stage passes."""
    zero = Tensor(np.zeros((), dtype=batch.center.dtype))
    if not use_cycle:
        lr = reconstruction_loss(batch, model)
        return total_objective(zero, lr, zero, weights), zero, lr, zero
    ml, mr, from_ends = first_stage(batch, model)
    lr = l1(from_ends, batch.center)
    cyc = _model_fn(model)(ml, mr)
    lc = l1(cyc, batch.center)
    lp = perceptual_loss(cyc, batch.center, extractor) if (extractor and weights.perceptual) else zero
    return total_objective(lc, lr, lp, weights), lc, lr, lp
