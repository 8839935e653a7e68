"""File formats: PNG views, PFM disparity maps, packed view bitmasks."""

from __future__ import annotations

import struct
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

VMASK_MAGIC = b"VMSK"


def read_image(path) -> np.ndarray:
    """Read an 8- or 16-bit PNG as float64 ``(H, W, C)`` in [0, 1], RGB order."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ValueError(f"cannot decode image {path}")
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ValueError(f"unsupported image dtype {img.dtype} in {path}")
    if img.ndim == 2:
        img = img[:, :, None]
    elif img.shape[2] == 4:
        img = cv2.cvtColor(img, cv2.COLOR_BGRA2RGB)
    else:
        img = cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
    return img.astype(np.float64) / scale


def write_image(path, img: np.ndarray, bits: int = 8) -> None:
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    if bits == 8:
        q = np.rint(img * 255.0).astype(np.uint8)
    elif bits == 16:
        q = np.rint(img * 65535.0).astype(np.uint16)
    else:
        raise ValueError("bits must be 8 or 16")
    if q.ndim == 3 and q.shape[2] == 1:
        q = q[:, :, 0]
    elif q.ndim == 3:
        q = cv2.cvtColor(q, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), q):
        raise OSError(f"failed to write {path}")


def write_pfm(path, data: np.ndarray) -> None:
    """Single-channel little-endian PFM (scale -1.0), rows stored bottom-up."""
    data = np.asarray(data, dtype="<f4")
    if data.ndim != 2:
        raise ValueError("PFM writer expects a 2-D map")
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        kind = f.readline().strip()
        if kind == b"PF":
            channels = 3
        elif kind == b"Pf":
            channels = 1
        else:
            raise ValueError(f"{path} is not a PFM file")
        dims = f.readline().split()
        while not dims:
            dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        endian = "<" if scale < 0 else ">"
        data = np.frombuffer(f.read(4 * w * h * channels), dtype=endian + "f4")
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].astype(np.float64)


def write_disparity_preview(path, disp: np.ndarray, d_min: float, d_max: float) -> None:
    span = d_max - d_min if d_max > d_min else 1.0
    write_image(path, (np.asarray(disp) - d_min) / span, bits=8)


def write_binary_png(path, mask: np.ndarray) -> None:
    Image.fromarray(np.asarray(mask, dtype=bool)).convert("1").save(path)


def read_binary_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("L")) > 127


def _words_per_pixel(n_uv: int) -> int:
    return (n_uv * n_uv + 63) // 64


def write_view_mask(path, mask: np.ndarray) -> None:
    """Packed per-pixel view bitmask.

    Layout: magic ``VMSK``, then ``uint32`` N_uv, W, H (little-endian), then
    for each pixel in row-major order ``ceil(N_uv**2 / 64)`` little-endian
    ``uint64`` words.  View ``(v_idx, u_idx)`` is bit ``k = v_idx*N_uv + u_idx``,
    stored in word ``k // 64`` at bit position ``k % 64``.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w, n, n2 = mask.shape
    if n != n2:
        raise ValueError("view mask must be (H, W, N, N)")
    nw = _words_per_pixel(n)
    bits = np.zeros((h * w, nw * 64), dtype=np.uint8)
    bits[:, : n * n] = mask.reshape(h * w, n * n)
    packed = np.packbits(bits.reshape(h * w, nw, 8, 8), axis=-1, bitorder="little")
    words = packed.reshape(h * w, nw, 8).view("<u8")
    with open(path, "wb") as f:
        f.write(VMASK_MAGIC)
        f.write(struct.pack("<III", n, w, h))
        f.write(words.tobytes())


def read_view_mask(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(4) != VMASK_MAGIC:
            raise ValueError(f"{path} is not a packed view mask")
        n, w, h = struct.unpack("<III", f.read(12))
        nw = _words_per_pixel(n)
        raw = np.frombuffer(f.read(8 * nw * h * w), dtype=np.uint8)
    bits = np.unpackbits(raw.reshape(h * w, nw * 8), axis=-1, bitorder="little")
    return bits[:, : n * n].reshape(h, w, n, n).astype(bool)


def write_cost_volume(path, costs: np.ndarray) -> None:
    """Raw little-endian float32, label-major ``(n_labels, H, W)``."""
    np.ascontiguousarray(costs, dtype="<f4").tofile(path)


def read_key_values(path) -> dict[str, str]:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out
