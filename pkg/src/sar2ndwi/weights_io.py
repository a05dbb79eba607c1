"""Weights file format.

    bytes 0-3  magic "CBWT"
    bytes 4-5  format version, uint16 little-endian (currently 1)
    bytes 6-9  header length, uint32 little-endian
    header     UTF-8 JSON of the architecture config
    entries    in declaration order, each:
                   uint16 LE name length, name bytes,
                   uint8 ndim, ndim * uint32 LE dims,
                   float32 LE data, row-major

Arrays are always stored as float32; float64 parameter sets (used only by
the gradient checks) are downcast on save.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .unet import UNetConfig, UNetParams, param_shapes

MAGIC = b"CBWT"
FORMAT_VERSION = 1


def save_weights(params: UNetParams, path: str | Path) -> None:
    header = json.dumps(params.config.to_dict()).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for name, arr in params.arrays.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_exact(fh, n: int, path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated while reading {what}")
    return data


def load_weights(path: str | Path, expected_config: UNetConfig | None = None) -> UNetParams:
    """Read a weights file back into float32 parameters.

    Entry names and shapes must match what the embedded config dictates;
    if `expected_config` is given it must equal the embedded one.
    """
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, path, "magic") != MAGIC:
            raise FormatError(f"{path}: bad magic bytes")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, path, "version"))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "header length"))
        try:
            config = UNetConfig.from_dict(
                json.loads(_read_exact(fh, header_len, path, "header"))
            )
        except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"{path}: unreadable config header ({exc})") from exc
        if expected_config is not None and config != expected_config:
            raise FormatError(f"{path}: weights were saved for a different architecture")

        arrays: dict[str, np.ndarray] = {}
        for name, shape in param_shapes(config).items():
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, path, "entry name"))
            stored = _read_exact(fh, name_len, path, "entry name").decode("utf-8")
            if stored != name:
                raise FormatError(f"{path}: entry {stored!r}, expected {name!r}")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, path, "entry rank"))
            dims = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, path, "entry dims"))
            if dims != shape:
                raise FormatError(f"{path}: {name} has shape {dims}, expected {shape}")
            count = int(np.prod(shape))
            raw = _read_exact(fh, 4 * count, path, f"data of {name}")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after last entry")
    return UNetParams(config, arrays)
