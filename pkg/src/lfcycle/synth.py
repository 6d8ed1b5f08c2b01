"""Synthetic light fields with known disparity and the exact translation oracle.

Conventions: view (t, s) shows the reference texture translated by
``(-(t - t0) * d, -(s - s0) * d)`` pixels, i.e. ``view[t, s](y, x) =
T(y + (t - t0) d, x + (s - s0) d)``. Two frames one step apart along an
axis therefore satisfy ``b(x) = a(x + d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from .lightfield import AngularAxis, LightField


@dataclass(frozen=True)
class SceneSpec:
    disparity: float = 2.0
    grid: tuple[int, int] = (9, 9)  # (rows, cols)
    size: tuple[int, int] = (128, 128)  # (height, width)
    texture: str = "noise"  # noise | checker | path to an image
    seed: int = 0
    fg_disparity: Optional[float] = None
    mask: Optional[np.ndarray] = None  # (h, w) bool, foreground support in the centre view
    exact: bool = False  # demand an even integer disparity (exact-oracle tests)
    noise_sigma: float = 1.5

    @property
    def center(self) -> tuple[int, int]:
        return (self.grid[0] - 1) // 2, (self.grid[1] - 1) // 2

    def max_offsets(self) -> tuple[int, int]:
        t0, s0 = self.center
        return max(t0, self.grid[0] - 1 - t0), max(s0, self.grid[1] - 1 - s0)

    def foreground(self) -> "SceneSpec":
        """The planar scene made of the foreground layer alone."""
        if self.fg_disparity is None:
            raise ValueError("scene has no foreground layer")
        return replace(self, disparity=self.fg_disparity, seed=self.seed + 1,
                       fg_disparity=None, mask=None)

    def validate(self):
        rows, cols = self.grid
        h, w = self.size
        if rows < 1 or cols < 1 or h < 1 or w < 1:
            raise ValueError(f"invalid grid {self.grid} or size {self.size}")
        ot, os_ = self.max_offsets()
        for d in [self.disparity] + ([self.fg_disparity] if self.fg_disparity is not None else []):
            if not np.isfinite(d):
                raise ValueError(f"non-finite disparity {d}")
            if abs(d) * os_ >= w / 4 or abs(d) * ot >= h / 4:
                raise ValueError(
                    f"disparity {d} too large for {self.grid} views of size {self.size}: "
                    "content would leave the frame"
                )
            if self.exact and (d != int(d) or int(d) % 2):
                raise ValueError(f"exact-oracle scenes need an even integer disparity, got {d}")


def make_texture(kind: str, shape: tuple[int, int], seed: int, sigma: float = 1.5) -> np.ndarray:
    """Texture canvas of ``shape`` (h, w) with 3 channels in [0, 1]."""
    h, w = shape
    rng = np.random.default_rng(seed)
    if kind == "noise":
        noise = rng.standard_normal((h, w, 3))
        smooth = ndimage.gaussian_filter(noise, sigma=(sigma, sigma, 0), mode="wrap")
        smooth -= smooth.mean(axis=(0, 1))
        smooth /= smooth.std(axis=(0, 1)) + 1e-12
        return np.clip(0.5 + 0.18 * smooth, 0.0, 1.0).astype(np.float32)
    if kind == "checker":
        cell = 8
        colors = rng.uniform(0.1, 0.9, size=(2, 3))
        yy, xx = np.mgrid[0:h, 0:w]
        parity = ((yy // cell) + (xx // cell)) % 2
        return colors[parity].astype(np.float32)
    from PIL import Image

    img = np.asarray(Image.open(kind).convert("RGB"), dtype=np.float32) / 255.0
    reps = (-(-h // img.shape[0]), -(-w // img.shape[1]), 1)
    return np.tile(img, reps)[:h, :w].copy()


def _render_plane(spec: SceneSpec, disparity: float, seed: int) -> np.ndarray:
    rows, cols = spec.grid
    h, w = spec.size
    t0, s0 = spec.center
    ot, os_ = spec.max_offsets()
    pad_y = int(np.ceil(abs(disparity) * ot)) + 2
    pad_x = int(np.ceil(abs(disparity) * os_)) + 2
    canvas = make_texture(spec.texture, (h + 2 * pad_y, w + 2 * pad_x), seed, spec.noise_sigma)
    views = np.empty((rows, cols, h, w, 3), dtype=np.float32)
    integer = float(disparity).is_integer()
    for t in range(rows):
        for s in range(cols):
            dy = (t - t0) * disparity
            dx = (s - s0) * disparity
            if integer:
                y0, x0 = pad_y + int(dy), pad_x + int(dx)
                views[t, s] = canvas[y0 : y0 + h, x0 : x0 + w]
            else:
                moved = ndimage.shift(canvas, (-dy, -dx, 0), order=3, mode="nearest")
                views[t, s] = np.clip(moved[pad_y : pad_y + h, pad_x : pad_x + w], 0, 1)
    return views


def _render_mask(spec: SceneSpec, disparity: float) -> np.ndarray:
    rows, cols = spec.grid
    h, w = spec.size
    t0, s0 = spec.center
    masks = np.zeros((rows, cols, h, w), dtype=bool)
    src = np.asarray(spec.mask, dtype=bool)
    for t in range(rows):
        for s in range(cols):
            dy = int(round((t - t0) * disparity))
            dx = int(round((s - s0) * disparity))
            # view(y, x) shows reference (y + dy, x + dx); the mask extends by edge replication
            ys = np.clip(np.arange(h) + dy, 0, h - 1)
            xs = np.clip(np.arange(w) + dx, 0, w - 1)
            m = src[np.ix_(ys, xs)]
            masks[t, s] = m
    return masks


def gen_planar_lf(spec: SceneSpec) -> LightField:
    spec.validate()
    views = _render_plane(spec, spec.disparity, spec.seed)
    meta = {"generator": "planar", "disparity": float(spec.disparity), "seed": spec.seed,
            "texture": spec.texture}
    return LightField(views, "dense", meta)


def default_mask(size: tuple[int, int]) -> np.ndarray:
    h, w = size
    m = np.zeros((h, w), dtype=bool)
    m[h // 4 : 3 * h // 4, w // 4 : 3 * w // 4] = True
    return m


def gen_two_layer_lf(spec: SceneSpec, return_masks: bool = False):
    """Foreground plane composited over a background plane, each at its own disparity."""
    spec.validate()
    if spec.fg_disparity is None:
        raise ValueError("two-layer scene needs fg_disparity")
    if spec.fg_disparity == spec.disparity:
        raise ValueError("foreground and background disparities must differ")
    if spec.mask is None:
        spec = replace(spec, mask=default_mask(spec.size))
    if np.shape(spec.mask) != tuple(spec.size):
        raise ValueError(f"mask shape {np.shape(spec.mask)} does not match view size {spec.size}")
    if not float(spec.fg_disparity).is_integer():
        raise ValueError("foreground disparity must be an integer (masks move by whole pixels)")
    bg = _render_plane(spec, spec.disparity, spec.seed)
    fg = _render_plane(spec, spec.fg_disparity, spec.seed + 1)
    masks = _render_mask(spec, spec.fg_disparity)
    views = np.where(masks[..., None], fg, bg)
    meta = {"generator": "two-layer", "disparity": float(spec.disparity),
            "fg_disparity": float(spec.fg_disparity), "seed": spec.seed, "texture": spec.texture}
    lf = LightField(views, "dense", meta)
    return (lf, masks) if return_masks else lf


def shift_image(img: np.ndarray, offset: int, axis) -> np.ndarray:
    """Translate content by ``offset`` pixels along ``axis`` with edge replication.

    ``out(x) = img(x - offset)``; works on (..., h, w, 3) arrays.
    """
    axis = AngularAxis.parse(axis)
    ax = -2 if axis is AngularAxis.HORIZONTAL else -3
    n = img.shape[ax]
    idx = np.clip(np.arange(n) - offset, 0, n - 1)
    return np.take(img, idx, axis=ax)


def translation_oracle(frame_a, frame_b, d, axis=AngularAxis.HORIZONTAL) -> np.ndarray:
    """Exact midpoint of two frames related by ``b(x) = a(x + d)`` along ``axis``.

    ``d`` is the displacement between the two frames and must be an even integer.
    """
    if d != int(d) or int(d) % 2:
        raise ValueError(f"translation oracle needs an even integer displacement, got {d}")
    half = int(d) // 2
    a = np.asarray(frame_a, dtype=np.float32)
    b = np.asarray(frame_b, dtype=np.float32)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    return 0.5 * shift_image(a, -half, axis) + 0.5 * shift_image(b, half, axis)


@dataclass(frozen=True)
class TranslationOracle:
    """Interpolator interface around :func:`translation_oracle`."""

    displacement: int
    axis: AngularAxis = AngularAxis.HORIZONTAL

    def interpolate(self, frame_a, frame_b) -> np.ndarray:
        return translation_oracle(frame_a, frame_b, self.displacement, self.axis)


def oracle_pair(lf_disparity: int, spacing: int) -> tuple[TranslationOracle, TranslationOracle]:
    """Horizontal and vertical oracles for frames ``spacing`` dense steps apart."""
    d = int(lf_disparity) * spacing
    return TranslationOracle(d, AngularAxis.HORIZONTAL), TranslationOracle(d, AngularAxis.VERTICAL)


def shifted_pair_batch(rng: np.random.Generator, n: int, size: int, max_half_shift: int,
                       sigma: float = 1.5):
    """Frame pairs with exact midpoints: a = T moved by -u, mid = T, b = T moved by +u.

    ``u`` is a random integer 2-D motion with components in [-max_half_shift, max_half_shift].
    Returns three (n, size, size, 3) arrays.
    """
    m = max_half_shift
    a = np.empty((n, size, size, 3), dtype=np.float32)
    mid = np.empty_like(a)
    b = np.empty_like(a)
    for k in range(n):
        canvas = make_texture("noise", (size + 2 * m, size + 2 * m), int(rng.integers(2**31)), sigma)
        uy, ux = (int(v) for v in rng.integers(-m, m + 1, size=2))
        mid[k] = canvas[m : m + size, m : m + size]
        a[k] = canvas[m + uy : m + uy + size, m + ux : m + ux + size]
        b[k] = canvas[m - uy : m - uy + size, m - ux : m - ux + size]
    return a, mid, b
