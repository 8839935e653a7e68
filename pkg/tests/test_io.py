import struct

import numpy as np
import pytest

from lfdepth import io


def test_pfm_roundtrip(tmp_path, rng):
    d = rng.normal(size=(7, 5)).astype(np.float32)
    io.write_pfm(tmp_path / "d.pfm", d)
    raw = (tmp_path / "d.pfm").read_bytes()
    assert raw.startswith(b"Pf\n5 7\n-1.0\n")
    # rows are stored bottom-up
    first = np.frombuffer(raw[len(b"Pf\n5 7\n-1.0\n"):][:20], dtype="<f4")
    assert np.array_equal(first, d[-1])
    assert np.array_equal(io.read_pfm(tmp_path / "d.pfm"), d.astype(np.float64))


def test_pfm_big_endian_and_errors(tmp_path):
    d = np.arange(6, dtype=">f4").reshape(2, 3)
    (tmp_path / "b.pfm").write_bytes(b"Pf\n3 2\n1.0\n" + d[::-1].tobytes())
    assert np.array_equal(io.read_pfm(tmp_path / "b.pfm"), d)
    (tmp_path / "x.pfm").write_bytes(b"P6\n1 1\n255\n\0\0\0")
    with pytest.raises(ValueError):
        io.read_pfm(tmp_path / "x.pfm")
    with pytest.raises(ValueError):
        io.write_pfm(tmp_path / "c.pfm", np.zeros((2, 2, 2)))


@pytest.mark.parametrize("n", [1, 3, 5, 9, 11])
def test_view_mask_roundtrip(tmp_path, rng, n):
    m = rng.random((4, 3, n, n)) > 0.5
    io.write_view_mask(tmp_path / "m.vmask", m)
    assert np.array_equal(io.read_view_mask(tmp_path / "m.vmask"), m)
    words = (n * n + 63) // 64
    assert (tmp_path / "m.vmask").stat().st_size == 16 + 4 * 3 * words * 8


def test_view_mask_bit_layout(tmp_path):
    m = np.zeros((1, 2, 9, 9), dtype=bool)
    m[0, 0, 0, 1] = True          # bit 1 of word 0
    m[0, 1, 7, 2] = True          # k = 65: bit 1 of word 1
    io.write_view_mask(tmp_path / "m.vmask", m)
    raw = (tmp_path / "m.vmask").read_bytes()
    assert raw[:4] == b"VMSK"
    assert struct.unpack("<III", raw[4:16]) == (9, 2, 1)
    words = np.frombuffer(raw[16:], dtype="<u8")
    assert list(words) == [2, 0, 0, 2]


def test_view_mask_rejects_other_files(tmp_path):
    (tmp_path / "x").write_bytes(b"nope" * 8)
    with pytest.raises(ValueError):
        io.read_view_mask(tmp_path / "x")


def test_binary_png_roundtrip(tmp_path, rng):
    m = rng.random((9, 13)) > 0.5
    io.write_binary_png(tmp_path / "e.png", m)
    assert np.array_equal(io.read_binary_png(tmp_path / "e.png"), m)


@pytest.mark.parametrize("bits", [8, 16])
def test_image_roundtrip(tmp_path, rng, bits):
    img = rng.random((5, 6, 3))
    io.write_image(tmp_path / "i.png", img, bits=bits)
    back = io.read_image(tmp_path / "i.png")
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 0.5 / (2 ** bits - 1) + 1e-12
    with pytest.raises(ValueError):
        io.write_image(tmp_path / "j.png", img, bits=12)


def test_cost_volume_dump(tmp_path, rng):
    c = rng.random((3, 4, 5))
    io.write_cost_volume(tmp_path / "c.f32", c)
    back = np.fromfile(tmp_path / "c.f32", dtype="<f4").reshape(3, 4, 5)
    assert np.allclose(back, c, atol=1e-7)


def test_key_values(tmp_path):
    (tmp_path / "c.txt").write_text("# comment\nlam = 0.5\n\nvote-mode=union  # trailing\n")
    assert io.read_key_values(tmp_path / "c.txt") == {"lam": "0.5", "vote_mode": "union"}
    (tmp_path / "bad.txt").write_text("lam 0.5\n")
    with pytest.raises(ValueError, match="bad.txt:1"):
        io.read_key_values(tmp_path / "bad.txt")
