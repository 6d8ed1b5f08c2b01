"""Separable-kernel frame interpolator: an encoder-decoder that predicts four
per-pixel 1-D kernels, applied as local separable filters to two input frames."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass(frozen=True)
class ArchConfig:
    widths: tuple[int, ...] = (16, 32, 64)
    kernel_size: int = 13
    in_channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 3, got {self.kernel_size}")
        if not self.widths or min(self.widths) < 1:
            raise ValueError(f"invalid widths {self.widths}")

    @property
    def levels(self) -> int:
        return len(self.widths)

    def to_dict(self) -> dict:
        return {**asdict(self), "widths": list(self.widths)}

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        return cls(tuple(d["widths"]), int(d["kernel_size"]), int(d.get("in_channels", 3)))


@dataclass
class KernelField:
    """Four (N, K, H, W) kernel tensors: vertical/horizontal for frame A and frame B."""

    k1v: Tensor
    k1h: Tensor
    k2v: Tensor
    k2h: Tensor

    def as_arrays(self, index: int = 0) -> tuple[np.ndarray, ...]:
        """The kernels of one batch element as (H, W, K) arrays."""
        return tuple(np.moveaxis(k.data[index], 0, -1) for k in (self.k1v, self.k1h, self.k2v, self.k2h))


HEADS = ("k1v", "k1h", "k2v", "k2h")


@dataclass
class InterpolatorModel:
    config: ArchConfig
    params: dict[str, Tensor]
    axis: str = "generic"
    provenance: dict = field(default_factory=dict)

    @classmethod
    def init(cls, config: ArchConfig = ArchConfig(), seed: int = 0, axis: str = "generic",
             dtype=np.float32) -> "InterpolatorModel":
        rng = np.random.default_rng(seed)
        params: dict[str, Tensor] = {}

        def conv(name, cin, cout, k=3, gain=2.0):
            std = np.sqrt(gain / (cin * k * k))
            params[name + ".w"] = Tensor((rng.standard_normal((cout, cin, k, k)) * std).astype(dtype), True)
            params[name + ".b"] = Tensor(np.zeros(cout, dtype=dtype), True)

        w = config.widths
        c = 2 * config.in_channels
        for i, wi in enumerate(w):
            conv(f"enc{i}.0", c, wi)
            conv(f"enc{i}.1", wi, wi)
            c = wi
        conv("mid", c, c)
        for i in reversed(range(len(w))):
            conv(f"dec{i}", c + w[i], w[i])
            c = w[i]
        k = config.kernel_size
        for h in HEADS:
            conv(f"head.{h}", c, k, gain=0.01)
            # start as a plain 50/50 blend of the two frames
            bias = np.zeros(k, dtype=dtype)
            bias[k // 2] = 1.0 if h.endswith("v") else 0.5
            params[f"head.{h}.b"].data[:] = bias
        return cls(config, params, axis, {"init_seed": seed})

    # ------------------------------------------------------------------ graph

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def names(self) -> list[str]:
        return list(self.params.keys())

    def _conv(self, name, x):
        return ad.relu(ad.conv2d(x, self.params[name + ".w"], self.params[name + ".b"], padding=1))

    def check_size(self, h: int, w: int):
        m = 2**self.config.levels
        if h % m or w % m:
            raise ValueError(
                f"frame size {h}x{w} not divisible by {m} for a {self.config.levels}-level "
                "pooling pyramid; pad the frames (pad_to_multiple) first"
            )

    def predict_kernels(self, frame_a: Tensor, frame_b: Tensor) -> KernelField:
        """Kernels for NCHW frame batches."""
        if frame_a.shape != frame_b.shape:
            raise ValueError(f"frame shapes differ: {frame_a.shape} vs {frame_b.shape}")
        self.check_size(*frame_a.shape[-2:])
        x = ad.concat([frame_a, frame_b], axis=1) - 0.5
        skips = []
        for i in range(self.config.levels):
            x = self._conv(f"enc{i}.0", x)
            x = self._conv(f"enc{i}.1", x)
            skips.append(x)
            x = ad.avg_pool2(x)
        x = self._conv("mid", x)
        for i in reversed(range(self.config.levels)):
            x = ad.upsample2(x)
            x = self._conv(f"dec{i}", ad.concat([x, skips[i]], axis=1))
        # the four heads share one im2col: stack their weights into a single conv
        w = ad.concat([self.params[f"head.{h}.w"] for h in HEADS], axis=0)
        b = ad.concat([self.params[f"head.{h}.b"] for h in HEADS], axis=0)
        y = ad.conv2d(x, w, b, padding=1)
        k = self.config.kernel_size
        return KernelField(*(ad.slice_(y, (slice(None), slice(i * k, (i + 1) * k))) for i in range(4)))

    def forward(self, frame_a: Tensor, frame_b: Tensor) -> Tensor:
        """Unclamped interpolation of NCHW frame batches (training graph)."""
        kf = self.predict_kernels(frame_a, frame_b)
        return ad.add(apply_separable(frame_a, kf.k1v, kf.k1h), apply_separable(frame_b, kf.k2v, kf.k2h))

    # --------------------------------------------------------------- inference

    def interpolate(self, frame_a, frame_b, chunk: int = 16) -> np.ndarray:
        """Clamped midpoint for (h, w, 3) images or (N, h, w, 3) stacks; pads as needed."""
        a = np.asarray(frame_a, dtype=self.dtype)
        b = np.asarray(frame_b, dtype=self.dtype)
        if a.shape != b.shape:
            raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
        single = a.ndim == 3
        if single:
            a, b = a[None], b[None]
        h, w = a.shape[1:3]
        frozen = self.frozen()
        out = np.empty(a.shape, dtype=np.float32)
        for i in range(0, len(a), chunk):
            ta = pad_to_multiple(to_nchw(a[i : i + chunk]), 2**self.config.levels)
            tb = pad_to_multiple(to_nchw(b[i : i + chunk]), 2**self.config.levels)
            y = frozen.forward(Tensor(ta), Tensor(tb)).data[:, :, :h, :w]
            out[i : i + chunk] = np.clip(to_nhwc(y), 0.0, 1.0)
        return out[0] if single else out

    __call__ = interpolate

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def frozen(self) -> "InterpolatorModel":
        """Shallow view whose parameters do not record graphs."""
        params = {k: Tensor(v.data) for k, v in self.params.items()}
        return InterpolatorModel(self.config, params, self.axis, self.provenance)

    def copy(self, axis: str | None = None) -> "InterpolatorModel":
        params = {k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.params.items()}
        return InterpolatorModel(self.config, params, axis or self.axis, copy.deepcopy(self.provenance))

    def astype(self, dtype) -> "InterpolatorModel":
        params = {k: Tensor(v.data.astype(dtype), requires_grad=True) for k, v in self.params.items()}
        return InterpolatorModel(self.config, params, self.axis, copy.deepcopy(self.provenance))

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())


def to_nchw(images: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(np.asarray(images), -1, -3))


def to_nhwc(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(arr, -3, -1))


def pad_to_multiple(x: np.ndarray, m: int) -> np.ndarray:
    h, w = x.shape[-2:]
    ph, pw = (-h) % m, (-w) % m
    if not ph and not pw:
        return x
    widths = [(0, 0)] * (x.ndim - 2) + [(0, ph), (0, pw)]
    return np.pad(x, widths, mode="edge")


def apply_separable(frame: Tensor, k_v: Tensor, k_h: Tensor) -> Tensor:
    """out(y,x) = sum_ij k_v(y,x,i) k_h(y,x,j) frame(y+i-K//2, x+j-K//2), edge-replicated."""
    if k_v.shape != k_h.shape or k_v.ndim != 4:
        raise ValueError(f"kernel shapes differ or are not 4-D: {k_v.shape} vs {k_h.shape}")
    n, _, h, w = frame.shape
    if k_v.shape[0] != n or k_v.shape[2:] != (h, w):
        raise ValueError(f"kernels {k_v.shape} do not match frame {frame.shape}")
    r = k_v.shape[1] // 2
    return ad.local_separable(ad.pad_replicate(frame, r, r, r, r), k_v, k_h)


def predict_kernels(frame_a, frame_b, model: InterpolatorModel) -> KernelField:
    """Kernels for two (h, w, 3) images or NCHW tensors."""
    return model.predict_kernels(_as_batch(frame_a, model), _as_batch(frame_b, model))


def interpolate(frame_a, frame_b, model) -> np.ndarray:
    return model.interpolate(frame_a, frame_b)


def _as_batch(frame, model):
    if isinstance(frame, Tensor):
        return frame
    arr = np.asarray(frame, dtype=model.dtype)
    if arr.ndim == 3:
        arr = arr[None]
    return Tensor(to_nchw(arr))
