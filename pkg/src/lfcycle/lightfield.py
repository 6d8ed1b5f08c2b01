"""Light field container, angular sub-sampling, triplets and EPIs."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class AngularAxis(str, enum.Enum):
    HORIZONTAL = "h"  # varying s (columns of the view grid)
    VERTICAL = "v"  # varying t (rows of the view grid)

    @classmethod
    def parse(cls, value) -> "AngularAxis":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"h": cls.HORIZONTAL, "horizontal": cls.HORIZONTAL,
                   "v": cls.VERTICAL, "vertical": cls.VERTICAL}
        if key not in aliases:
            raise ValueError(f"unknown angular axis {value!r}")
        return aliases[key]


class TripletWarning(UserWarning):
    """Raised as a warning when a grid is too small to form any triplet."""


def as_image(arr) -> np.ndarray:
    """Validate an (h, w, 3) image and clamp it to [0, 1]."""
    img = np.asarray(arr, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected an (h, w, 3) image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return np.clip(img, 0.0, 1.0)


@dataclass(frozen=True)
class LightField:
    """Grid of views, ``views[t, s]`` is the (h, w, 3) image at row t, column s."""

    views: np.ndarray
    provenance: str = "dense"
    meta: dict = field(default_factory=dict)
    # optional counter dict; view() bumps audit["reads"] so tests can prove a field went untouched
    audit: Optional[dict] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.views, dtype=np.float32)
        if v.ndim != 5 or v.shape[-1] != 3:
            raise ValueError(f"views must have shape (n_t, n_s, h, w, 3), got {v.shape}")
        if min(v.shape[:4]) < 1:
            raise ValueError(f"empty light field {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("light field contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            v = np.clip(v, 0.0, 1.0)
        if v is self.views:
            v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "views", v)

    @property
    def rows(self) -> int:
        return self.views.shape[0]

    @property
    def cols(self) -> int:
        return self.views.shape[1]

    @property
    def height(self) -> int:
        return self.views.shape[2]

    @property
    def width(self) -> int:
        return self.views.shape[3]

    @property
    def grid(self) -> tuple[int, int]:
        return self.rows, self.cols

    def view(self, t: int, s: int) -> np.ndarray:
        if self.audit is not None:
            self.audit["reads"] = self.audit.get("reads", 0) + 1
        return self.views[t, s]

    def extent(self, axis) -> int:
        return self.cols if AngularAxis.parse(axis) is AngularAxis.HORIZONTAL else self.rows

    def with_views(self, views, provenance=None, **meta) -> "LightField":
        return LightField(views, provenance or self.provenance, {**self.meta, **meta})


@dataclass(frozen=True)
class ViewTriplet:
    left: np.ndarray
    center: np.ndarray
    right: np.ndarray
    axis: AngularAxis
    origin: tuple[int, int]  # (t, s) of the center view
    # dense midpoints between left/center and center/right; supervised mode only
    gt_left_mid: Optional[np.ndarray] = None
    gt_right_mid: Optional[np.ndarray] = None

    def __post_init__(self):
        shapes = {self.left.shape, self.center.shape, self.right.shape}
        if len(shapes) != 1:
            raise ValueError(f"triplet views differ in shape: {sorted(shapes)}")

    @property
    def has_ground_truth(self) -> bool:
        return self.gt_left_mid is not None and self.gt_right_mid is not None

    def crop(self, top: int, left: int, size_h: int, size_w: int) -> "ViewTriplet":
        sl = (slice(top, top + size_h), slice(left, left + size_w))

        def c(img):
            return None if img is None else img[sl]

        return ViewTriplet(c(self.left), c(self.center), c(self.right), self.axis,
                           self.origin, c(self.gt_left_mid), c(self.gt_right_mid))


def dense_angular_size(n: int, alpha: int) -> int:
    """Number of views per axis after up-sampling ``n`` views by ``alpha``."""
    if n < 2:
        raise ValueError(f"need at least 2 views to interpolate between, got n={n}")
    if alpha < 1:
        raise ValueError(f"up-sampling factor must be >= 1, got {alpha}")
    return alpha * (n - 1) + 1


def subsample(lf: LightField, alpha: int) -> LightField:
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if (lf.rows - 1) % alpha or (lf.cols - 1) % alpha:
        raise ValueError(
            f"cannot sub-sample a {lf.rows}x{lf.cols} grid by alpha={alpha}: "
            f"extents minus one must be divisible by alpha"
        )
    if alpha == 1:
        return lf
    views = np.ascontiguousarray(lf.views[::alpha, ::alpha])
    return LightField(views, f"sparse({alpha})", {**lf.meta, "alpha": alpha})


def angular_crop(lf: LightField, rows: int = 9, cols: int = 9, anchor: str = "top-left") -> LightField:
    """Keep a ``rows`` x ``cols`` block of views; the anchor is recorded in ``meta``."""
    if rows > lf.rows or cols > lf.cols or rows < 1 or cols < 1:
        raise ValueError(f"cannot take {rows}x{cols} views from a {lf.rows}x{lf.cols} grid")
    if anchor == "top-left":
        t0, s0 = 0, 0
    elif anchor == "center":
        t0, s0 = (lf.rows - rows) // 2, (lf.cols - cols) // 2
    else:
        raise ValueError(f"anchor must be 'top-left' or 'center', got {anchor!r}")
    views = np.ascontiguousarray(lf.views[t0 : t0 + rows, s0 : s0 + cols])
    return LightField(views, lf.provenance, {**lf.meta, "angular_crop": [anchor, t0, s0]})


def extract_triplets(lf: LightField, axis) -> list[ViewTriplet]:
    """All overlapping consecutive triples along ``axis``."""
    axis = AngularAxis.parse(axis)
    n_axis = lf.extent(axis)
    n_other = lf.rows if axis is AngularAxis.HORIZONTAL else lf.cols
    if n_axis < 3:
        warnings.warn(
            f"{lf.rows}x{lf.cols} grid has fewer than 3 views along {axis.name.lower()} axis; "
            "no triplets available for fine-tuning",
            TripletWarning,
            stacklevel=2,
        )
        return []
    out = []
    for o in range(n_other):
        for c in range(1, n_axis - 1):
            if axis is AngularAxis.HORIZONTAL:
                t, s = o, c
                out.append(ViewTriplet(lf.view(t, s - 1), lf.view(t, s), lf.view(t, s + 1), axis, (t, s)))
            else:
                t, s = c, o
                out.append(ViewTriplet(lf.view(t - 1, s), lf.view(t, s), lf.view(t + 1, s), axis, (t, s)))
    return out


def extract_epi(lf: LightField, axis, line: int, fixed: int) -> np.ndarray:
    """Epipolar-plane image.

    Horizontal: rows are views (fixed, s) for every s, each contributing spatial
    row ``line``; result is (n_s, w, 3). Vertical: views (t, fixed), spatial
    column ``line``; result is (n_t, h, 3).
    """
    axis = AngularAxis.parse(axis)
    if axis is AngularAxis.HORIZONTAL:
        if not (0 <= fixed < lf.rows and 0 <= line < lf.height):
            raise IndexError(f"EPI index out of bounds: row view {fixed}, spatial row {line}")
        return np.ascontiguousarray(lf.views[fixed, :, line, :, :])
    if not (0 <= fixed < lf.cols and 0 <= line < lf.width):
        raise IndexError(f"EPI index out of bounds: column view {fixed}, spatial column {line}")
    return np.ascontiguousarray(lf.views[:, fixed, :, line, :])
