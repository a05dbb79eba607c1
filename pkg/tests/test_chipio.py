import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sar2ndwi.chipio import read_chip, write_chip, write_pgm
from sar2ndwi.errors import DimensionError, FormatError


def test_round_trip_preserves_values_and_shape(tmp_path, rng):
    values = rng.random((16, 12, 3)).astype(np.float32)
    path = tmp_path / "chip.cbch"
    write_chip(path, values)
    out = read_chip(path)
    assert out.shape == (16, 12, 3)
    assert out.dtype == np.float32
    assert np.array_equal(out, values)


def test_two_dimensional_input_gains_a_channel_axis(tmp_path, rng):
    values = rng.random((8, 8)).astype(np.float32)
    path = tmp_path / "chip.cbch"
    write_chip(path, values)
    out = read_chip(path)
    assert out.shape == (8, 8, 1)
    assert np.array_equal(out[:, :, 0], values)


@settings(max_examples=25, deadline=None)
@given(
    h=st.integers(1, 20),
    w=st.integers(1, 20),
    c=st.integers(1, 4),
    seed=st.integers(0, 2**31),
)
def test_round_trip_random_shapes(tmp_path_factory, h, w, c, seed):
    values = np.random.default_rng(seed).standard_normal((h, w, c)).astype(np.float32)
    path = tmp_path_factory.mktemp("chips") / "chip.cbch"
    write_chip(path, values)
    assert np.array_equal(read_chip(path), values)


def test_header_layout_is_little_endian(tmp_path):
    values = np.arange(6, dtype=np.float32).reshape(2, 3, 1)
    path = tmp_path / "chip.cbch"
    write_chip(path, values)
    raw = path.read_bytes()
    magic, version, height, width, channels = struct.unpack_from("<4sHHHH", raw)
    assert magic == b"CBCH"
    assert (version, height, width, channels) == (1, 2, 3, 1)
    payload = np.frombuffer(raw[struct.calcsize("<4sHHHH"):], dtype="<f4")
    assert np.array_equal(payload.reshape(2, 3, 1), values)


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.cbch"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(FormatError):
        read_chip(path)


def test_read_rejects_bad_version(tmp_path):
    path = tmp_path / "bad.cbch"
    path.write_bytes(struct.pack("<4sHHHH", b"CBCH", 9, 1, 1, 1) + b"\x00" * 4)
    with pytest.raises(FormatError):
        read_chip(path)


def test_read_rejects_truncated_payload(tmp_path):
    path = tmp_path / "bad.cbch"
    path.write_bytes(struct.pack("<4sHHHH", b"CBCH", 1, 2, 2, 1) + b"\x00" * 8)
    with pytest.raises(FormatError):
        read_chip(path)


def test_read_rejects_trailing_bytes(tmp_path):
    path = tmp_path / "bad.cbch"
    path.write_bytes(struct.pack("<4sHHHH", b"CBCH", 1, 1, 1, 1) + b"\x00" * 8)
    with pytest.raises(FormatError):
        read_chip(path)


def test_write_rejects_oversized_dimensions(tmp_path):
    with pytest.raises(DimensionError):
        write_chip(tmp_path / "x.cbch", np.zeros((1, 70000), dtype=np.float32))


def test_write_rejects_wrong_rank(tmp_path):
    with pytest.raises(DimensionError):
        write_chip(tmp_path / "x.cbch", np.zeros((2, 2, 2, 2), dtype=np.float32))


def test_pgm_preview_quantizes_to_8_bit(tmp_path):
    values = np.array([[0.0, 0.5], [1.0, 0.25]])
    path = tmp_path / "preview.pgm"
    write_pgm(path, values)
    raw = path.read_bytes()
    header, rest = raw.split(b"\n", 1)
    assert header == b"P5"
    assert rest.endswith(bytes([0, 128, 255, 64]))
