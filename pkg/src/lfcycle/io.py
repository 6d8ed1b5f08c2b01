"""On-disk formats: light field directories, model checkpoints, reports, EPI images.

Checkpoint layout (all integers little-endian)::

    b"LFCY" | uint32 version | uint32 header_len | header (UTF-8 JSON) | float32 blob

The header lists parameter names and shapes in blob order.
"""

from __future__ import annotations

import json
import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .interp import ArchConfig, InterpolatorModel
from .autodiff import Tensor
from .lightfield import LightField
from .losses import FeatureExtractor
from .metrics import EvalReport

DEFAULT_PATTERN = "view_{t:02}_{s:02}.png"
CHECKPOINT_MAGIC = b"LFCY"
CHECKPOINT_VERSION = 1


class FormatError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedBlobError(CheckpointError):
    pass


# ------------------------------------------------------------------ images


def quantize(img) -> np.ndarray:
    """[0, 1] floats to uint8, rounding half up."""
    return np.floor(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(img, path):
    arr = np.asarray(img)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    Image.fromarray(quantize(arr)).save(path)


def load_image(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise FormatError(f"missing view file {path}") from None
    except OSError as exc:
        raise FormatError(f"unreadable view file {path}: {exc}") from None


# ------------------------------------------------------------------ light fields


def _pattern_regex(pattern: str):
    rx = re.escape(pattern)
    rx = re.sub(r"\\\{[ts](?::[^}]*)?\\\}", r"\\d+", rx)
    return re.compile(f"^{rx}$")


def save_lf(lf: LightField, path, pattern: str = DEFAULT_PATTERN, name: str | None = None):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "rows": lf.rows,
        "cols": lf.cols,
        "width": lf.width,
        "height": lf.height,
        "pattern": pattern,
        "provenance": lf.provenance,
        "name": name or lf.meta.get("name") or path.name,
    }
    if "seed" in lf.meta:
        meta["seed"] = lf.meta["seed"]
    extra = {k: v for k, v in lf.meta.items() if k not in meta and _jsonable(v)}
    if extra:
        meta["extra"] = extra
    for t in range(lf.rows):
        for s in range(lf.cols):
            save_image(lf.view(t, s), path / pattern.format(t=t, s=s))
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def load_lf(path) -> LightField:
    path = Path(path)
    meta_path = path / "meta.json"
    try:
        meta = json.loads(meta_path.read_text())
    except FileNotFoundError:
        raise FormatError(f"missing {meta_path}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"corrupt {meta_path}: {exc}") from None
    try:
        rows, cols = int(meta["rows"]), int(meta["cols"])
        width, height = int(meta["width"]), int(meta["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{meta_path} lacks a valid field: {exc}") from None
    pattern = meta.get("pattern", DEFAULT_PATTERN)
    rx = _pattern_regex(pattern)
    present = sorted(p.name for p in path.iterdir() if rx.match(p.name))
    if len(present) != rows * cols:
        raise FormatError(
            f"{meta_path} declares {rows}x{cols} views but {len(present)} view files match {pattern!r}"
        )
    views = np.empty((rows, cols, height, width, 3), dtype=np.float32)
    for t in range(rows):
        for s in range(cols):
            f = path / pattern.format(t=t, s=s)
            img = load_image(f)
            if img.shape[:2] != (height, width):
                raise FormatError(f"view file {f} is {img.shape[1]}x{img.shape[0]}, expected {width}x{height}")
            views[t, s] = img
    lf_meta = dict(meta.get("extra", {}))
    lf_meta["name"] = meta.get("name", path.name)
    if "seed" in meta:
        lf_meta["seed"] = meta["seed"]
    m = re.match(r"sparse\((\d+)\)", meta.get("provenance", ""))
    if m:
        lf_meta["alpha"] = int(m.group(1))
    return LightField(views, meta.get("provenance", "dense"), lf_meta)


# ------------------------------------------------------------------ checkpoints


def save_model(model: InterpolatorModel, path):
    names = model.names()
    header = {
        "config": model.config.to_dict(),
        "axis": model.axis,
        "provenance": model.provenance,
        "params": [[n, list(model.params[n].shape)] for n in names],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(model.params[n].data, dtype="<f4").tobytes() for n in names)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(hbytes)))
        fh.write(hbytes)
        fh.write(blob)


def load_model(path) -> InterpolatorModel:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    if len(data) < 12:
        raise TruncatedBlobError(f"{path}: truncated header")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(f"{path}: checkpoint version {version}, reader supports {CHECKPOINT_VERSION}")
    if len(data) < 12 + hlen:
        raise TruncatedBlobError(f"{path}: truncated header")
    try:
        header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from None
    blob = memoryview(data)[12 + hlen :]
    need = sum(int(np.prod(shape)) for _, shape in header["params"]) * 4
    if len(blob) < need:
        raise TruncatedBlobError(f"{path}: truncated blob ({len(blob)} of {need} bytes)")
    if len(blob) > need:
        raise CheckpointError(f"{path}: {len(blob) - need} trailing bytes after parameter blob")
    params, off = {}, 0
    for name, shape in header["params"]:
        n = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).astype(np.float32).reshape(shape)
        params[name] = Tensor(arr, requires_grad=True)
        off += 4 * n
    return InterpolatorModel(ArchConfig.from_dict(header["config"]), params, header["axis"],
                             header.get("provenance", {}))


# ------------------------------------------------------------------ extractor weights


def save_extractor(extractor: FeatureExtractor, path):
    header = {"tap_depth": extractor.tap_depth, "origin": extractor.origin,
              "stages": len(extractor.stages), "pool": extractor.pool}
    arrays = {"header": np.array(json.dumps(header))}
    for i, (w, b) in enumerate(extractor.stages):
        arrays[f"stage{i}.w"] = w
        arrays[f"stage{i}.b"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_extractor(path) -> FeatureExtractor:
    with np.load(path) as z:
        header = json.loads(str(z["header"]))
        stages = [(z[f"stage{i}.w"], z[f"stage{i}.b"]) for i in range(int(header["stages"]))]
    cin = 3
    for i, (w, b) in enumerate(stages):
        if w.ndim != 4 or w.shape[1] != cin or b.shape != (w.shape[0],):
            raise FormatError(f"{path}: stage {i} weight {w.shape} / bias {b.shape} do not chain")
        cin = w.shape[0]
    return FeatureExtractor(stages, pool=bool(header.get("pool", True)),
                            origin=f"imported:{header.get('origin', 'unknown')}",
                            tap_depth=int(header["tap_depth"]))


# ------------------------------------------------------------------ reports


def save_report(report: EvalReport, path, csv_path=None):
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if csv_path:
        Path(csv_path).write_text(report.to_csv())


def load_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text()))


def save_epi(epi, path):
    save_image(epi, path)
