"""PSNR / SSIM over RGB views and per-light-field aggregation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .lightfield import LightField

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, max_value: float = 1.0) -> float:
    """PSNR in dB with the MSE pooled over all pixels and channels; ``inf`` if identical."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value**2 / mse)


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img, g):
    # separable 'valid' correlation over the two spatial axes
    out = ndimage.correlate1d(img, g, axis=0, mode="constant")
    out = ndimage.correlate1d(out, g, axis=1, mode="constant")
    r = len(g) // 2
    return out[r : img.shape[0] - r, r : img.shape[1] - r]


def ssim(a, b, data_range: float = 1.0) -> float:
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), averaged over channels and pixels."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape[:2]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = _gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    vals = []
    for c in range(a.shape[2]):
        x, y = a[..., c], b[..., c]
        mx, my = _filter_valid(x, g), _filter_valid(y, g)
        sxx = _filter_valid(x * x, g) - mx * mx
        syy = _filter_valid(y * y, g) - my * my
        sxy = _filter_valid(x * y, g) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        vals.append(num / den)
    return float(np.mean(vals))


@dataclass
class ViewRecord:
    t: int
    s: int
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    records: list[ViewRecord]
    mean_psnr: float
    mean_ssim: float
    meta: dict = field(default_factory=dict)

    @staticmethod
    def aggregate(records):
        if not records:
            return math.nan, math.nan
        p = [min(r.psnr, PSNR_CAP) for r in records]
        return float(np.mean(p)), float(np.mean([r.ssim for r in records]))

    def check_consistency(self) -> bool:
        p, s = self.aggregate(self.records)
        return p == self.mean_psnr and s == self.mean_ssim

    def to_dict(self) -> dict:
        return {
            "meta": dict(self.meta),
            "mean_psnr": self.mean_psnr,
            "mean_ssim": self.mean_ssim,
            "num_views": len(self.records),
            "records": [
                {**asdict(r), "psnr": _encode_float(r.psnr)} for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        recs = [ViewRecord(int(r["t"]), int(r["s"]), float(r["psnr"]), float(r["ssim"]))
                for r in d["records"]]
        return cls(recs, float(d["mean_psnr"]), float(d["mean_ssim"]), dict(d.get("meta", {})))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "s", "psnr", "ssim"])
        for r in self.records:
            w.writerow([r.t, r.s, repr(r.psnr), repr(r.ssim)])
        w.writerow(["mean", "mean", repr(self.mean_psnr), repr(self.mean_ssim)])
        return buf.getvalue()


def _encode_float(x: float):
    return "inf" if math.isinf(x) else x


def synthesized_coords(rows: int, cols: int, alpha: int):
    return [(t, s) for t in range(rows) for s in range(cols) if t % alpha or s % alpha]


def evaluate(recon: LightField, gt: LightField, alpha: int, margin: int = 0,
             dataset: str = "") -> EvalReport:
    """Per-view PSNR/SSIM over the synthesized coordinates only."""
    if recon.views.shape != gt.views.shape:
        raise ValueError(f"light field shapes differ: {recon.views.shape} vs {gt.views.shape}")
    if margin < 0 or 2 * margin >= min(gt.height, gt.width):
        raise ValueError(f"margin {margin} invalid for views of size {gt.height}x{gt.width}")
    crop = (slice(margin, gt.height - margin), slice(margin, gt.width - margin))
    records = []
    for t, s in synthesized_coords(gt.rows, gt.cols, alpha):
        a = recon.view(t, s)[crop]
        b = gt.view(t, s)[crop]
        records.append(ViewRecord(t, s, psnr(a, b), ssim(a, b)))
    mp, ms = EvalReport.aggregate(records)
    meta = {"alpha": alpha, "dataset": dataset, "margin": margin,
            "mse_pooling": "joint-rgb", "psnr_cap": PSNR_CAP}
    return EvalReport(records, mp, ms, meta)
