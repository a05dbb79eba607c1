"""Binary chip file format and grayscale export.

A chip file stores one float32 raster tile:

    bytes 0-3   magic "CBCH"
    bytes 4-5   format version, uint16 little-endian (currently 1)
    bytes 6-7   height,   uint16 little-endian
    bytes 8-9   width,    uint16 little-endian
    bytes 10-11 channels, uint16 little-endian
    then height*width*channels float32 little-endian values,
    row-major, channel-last.

Scenes arrive in the same format (one file per band); the converter from
GeoTIFF sources to this layout is a documented external step.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError

MAGIC = b"CBCH"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHHHH")


def write_chip(path: str | Path, values: np.ndarray) -> None:
    """Write a 2-D (H, W) or 3-D (H, W, C) array as a chip file."""
    arr = np.asarray(values)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise DimensionError(f"chip arrays must be 2-D or 3-D, got shape {arr.shape}")
    h, w, c = arr.shape
    if max(h, w, c) > 0xFFFF:
        raise DimensionError(f"dimension exceeds uint16 range: {arr.shape}")
    data = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, h, w, c))
        fh.write(data.tobytes())


def read_chip(path: str | Path) -> np.ndarray:
    """Read a chip file, returning a float32 array of shape (H, W, C)."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, h, w, c = _HEADER.unpack(header)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic bytes {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        payload = fh.read()
    expected = h * w * c * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: expected {expected} data bytes, found {len(payload)}"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    return flat.reshape(h, w, c).astype(np.float32, copy=False)


def write_pgm(path: str | Path, values: np.ndarray) -> None:
    """Export a single-channel [0, 1] raster as an 8-bit binary PGM.

    Quantization rule: pixel = floor(255 * v + 0.5), clipped to [0, 255].
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 3:
        if arr.shape[2] != 1:
            raise DimensionError(f"grayscale export needs one channel, got {arr.shape}")
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise DimensionError(f"grayscale export needs a 2-D raster, got shape {arr.shape}")
    quantized = np.clip(np.floor(255.0 * arr + 0.5), 0, 255).astype(np.uint8)
    h, w = quantized.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quantized.tobytes())
