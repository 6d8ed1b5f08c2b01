"""Dense light field synthesis by cascaded pairwise interpolation.

An interpolator is anything with ``interpolate(frames_a, frames_b)`` taking and
returning (N, h, w, 3) stacks, e.g. :class:`~lfcycle.interp.InterpolatorModel`
or :class:`~lfcycle.synth.TranslationOracle`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lightfield import AngularAxis, LightField


@dataclass
class ReconstructionPlan:
    alpha: int
    model_h: object
    model_v: object
    order: str = "hv"
    # optional (model_h, model_v) per stage; defaults to reusing the two models
    stage_models: Optional[Sequence[tuple[object, object]]] = None

    def __post_init__(self):
        self.order = self.order.lower()
        if self.order not in ("hv", "vh"):
            raise ValueError(f"cascade order must be 'hv' or 'vh', got {self.order!r}")
        if self.alpha < 2 or self.alpha & (self.alpha - 1):
            raise ValueError(f"alpha must be a power of two >= 2, got {self.alpha}")
        if self.stage_models is not None and len(self.stage_models) != self.steps:
            raise ValueError(f"{len(self.stage_models)} stage models given for {self.steps} steps")

    @property
    def steps(self) -> int:
        return int(self.alpha).bit_length() - 1

    def models_for(self, stage: int):
        if self.stage_models is not None:
            return self.stage_models[stage]
        return self.model_h, self.model_v


def upsample_axis(lf: LightField, axis, model, chunk: int = 16) -> LightField:
    """Insert one interpolated view between every adjacent pair along ``axis``."""
    axis = AngularAxis.parse(axis)
    n = lf.extent(axis)
    if n < 2:
        raise ValueError(f"need at least 2 views along the {axis.name.lower()} axis, got {n}")
    views = lf.views if axis is AngularAxis.HORIZONTAL else lf.views.transpose(1, 0, 2, 3, 4)
    other = views.shape[0]
    a = views[:, :-1].reshape(-1, *views.shape[2:])
    b = views[:, 1:].reshape(-1, *views.shape[2:])
    mids = np.empty_like(a)
    for i in range(0, len(a), chunk):
        mids[i : i + chunk] = np.clip(model.interpolate(a[i : i + chunk], b[i : i + chunk]), 0.0, 1.0)
    mids = mids.reshape(other, n - 1, *views.shape[2:])
    out = np.empty((other, 2 * n - 1, *views.shape[2:]), dtype=np.float32)
    out[:, 0::2] = views
    out[:, 1::2] = mids
    if axis is AngularAxis.VERTICAL:
        out = out.transpose(1, 0, 2, 3, 4)
    return LightField(np.ascontiguousarray(out), lf.provenance, dict(lf.meta))


def _cascade(lf: LightField, model_h, model_v, order: str) -> LightField:
    if lf.rows < 2 or lf.cols < 2:
        raise ValueError(f"cannot reconstruct a {lf.rows}x{lf.cols} grid; need at least 2x2")
    if order == "hv":
        return upsample_axis(upsample_axis(lf, "h", model_h), "v", model_v)
    return upsample_axis(upsample_axis(lf, "v", model_v), "h", model_h)


def reconstruct(lf: LightField, plan: ReconstructionPlan) -> LightField:
    """One x2 stage: horizontal then vertical (or the reverse) over the whole grid."""
    if plan.alpha != 2:
        raise ValueError("reconstruct handles alpha=2; use multistep_reconstruct")
    mh, mv = plan.models_for(0)
    out = _cascade(lf, mh, mv, plan.order)
    return LightField(out.views, "reconstructed", {**lf.meta, "alpha": 2, "order": plan.order})


def multistep_reconstruct(lf: LightField, plan: ReconstructionPlan) -> LightField:
    """Repeat the x2 cascade log2(alpha) times, each stage fed the previous output."""
    cur = lf
    for stage in range(plan.steps):
        mh, mv = plan.models_for(stage)
        cur = _cascade(cur, mh, mv, plan.order)
    return LightField(cur.views, "reconstructed", {**lf.meta, "alpha": plan.alpha, "order": plan.order})
