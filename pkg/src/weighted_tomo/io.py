"""File output: 8-bit PGM/PNG images, CSV profiles, raw float32 arrays, JSON.

Raw files start with a 16-byte little-endian header: the 8-byte magic
``b"WTOMOF32"`` followed by ``nx`` and ``ny`` as uint32, then ``nx * ny``
float32 values in row-major order.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

RAW_MAGIC = b"WTOMOF32"
_HEADER = np.dtype([("magic", "S8"), ("nx", "<u4"), ("ny", "<u4")])


def window_to_uint8(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Clamp to ``[lo, hi]`` and map linearly to 0..255, rounding half up."""
    if not lo < hi:
        raise ValueError("window requires lo < hi")
    scaled = (np.clip(np.asarray(values, dtype=float), lo, hi) - lo) / (hi - lo) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def write_pgm(path, pixels: np.ndarray) -> Path:
    pixels = np.asarray(pixels, dtype=np.uint8)
    if pixels.ndim != 2:
        raise ValueError("PGM export needs a 2D array")
    path = Path(path)
    height, width = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(parts[4][:width * height], dtype=np.uint8).reshape(height, width)


def export_image(image, lo: float, hi: float, path, png: bool = False) -> list[Path]:
    """Write a windowed 8-bit PGM (and optionally a PNG next to it).

    Row ``iy = 0`` is the first scanline.  Returns the written paths.
    """
    arr = image.as_array() if hasattr(image, "as_array") else np.asarray(image)
    pixels = window_to_uint8(arr, lo, hi)
    path = Path(path).with_suffix(".pgm")
    written = [write_pgm(path, pixels)]
    if png:
        from PIL import Image

        png_path = path.with_suffix(".png")
        Image.fromarray(pixels, mode="L").save(png_path)
        written.append(png_path)
    return written


def diagonal_profile(image) -> np.ndarray:
    arr = image.as_array() if hasattr(image, "as_array") else np.asarray(image)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"line profile needs a square image, got shape {arr.shape}")
    return np.diagonal(arr).copy()


def export_line_profile(image, path) -> Path:
    """CSV of the main diagonal, from voxel (0, 0) to (n-1, n-1)."""
    values = diagonal_profile(image)
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write("index,value\n")
        for k, v in enumerate(values):
            fh.write(f"{k},{float(v)!r}\n")
    return path


def write_raw(path, array: np.ndarray) -> Path:
    arr = np.asarray(array, dtype="<f4")
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("raw export needs a 1D or 2D array")
    header = np.array([(RAW_MAGIC, arr.shape[1], arr.shape[0])], dtype=_HEADER)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(arr).tobytes())
    return path


def read_raw(path) -> np.ndarray:
    """Read a raw float32 file as a ``(ny, nx)`` float64 array."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.itemsize:
        raise ValueError(f"{path} is too short for a raw header")
    header = np.frombuffer(data[:_HEADER.itemsize], dtype=_HEADER)[0]
    if header["magic"] != RAW_MAGIC:
        raise ValueError(f"{path} does not start with {RAW_MAGIC!r}")
    nx, ny = int(header["nx"]), int(header["ny"])
    body = np.frombuffer(data[_HEADER.itemsize:], dtype="<f4")
    if body.size != nx * ny:
        raise ValueError(f"{path}: header says {nx}x{ny}, found {body.size} values")
    return body.reshape(ny, nx).astype(float)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path, record: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n")
    return path


def read_config(path) -> dict:
    """Flat ``key = value`` config file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out
