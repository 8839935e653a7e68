"""4D light field container, manifest loading and shear refocusing.

Samples are stored as a 5-D array indexed ``(v, u, y, x, c)``.  Angular
indices run ``0..N-1``; the signed offset of index ``i`` is ``i - N // 2`` so
the center view sits at offset ``(0, 0)``.  Spatial pixel coordinates are
``(y, x)`` = (row, column) throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lfdepth import io


class LightFieldError(ValueError):
    """Raised for malformed light-field input."""


@dataclass(frozen=True, eq=False)
class LightField4D:
    samples: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 4:
            s = s[..., None]
        if s.ndim != 5:
            raise LightFieldError(f"samples must be 5-D (v,u,y,x,c), got shape {s.shape}")
        n_v, n_u, _, _, n_c = s.shape
        if n_u != n_v:
            raise LightFieldError(f"angular grid must be square, got {n_v}x{n_u}")
        if n_u % 2 == 0:
            raise LightFieldError(f"angular resolution must be odd, got {n_u}")
        if n_c not in (1, 3):
            raise LightFieldError(f"channels must be 1 or 3, got {n_c}")
        if not np.all(np.isfinite(s)):
            raise LightFieldError("samples contain non-finite values")
        if s.min() < 0.0 or s.max() > 1.0:
            raise LightFieldError("samples must lie in [0, 1]")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.valid is not None:
            v = np.asarray(self.valid, dtype=bool)
            if v.shape != s.shape[:4]:
                raise LightFieldError("valid mask shape mismatch")
            v.setflags(write=False)
            object.__setattr__(self, "valid", v)

    @property
    def n_uv(self) -> int:
        return self.samples.shape[0]

    @property
    def angular_res(self) -> tuple[int, int]:
        return (self.n_uv, self.n_uv)

    @property
    def radius(self) -> int:
        """Largest angular offset, ``N // 2``."""
        return self.n_uv // 2

    @property
    def height(self) -> int:
        return self.samples.shape[2]

    @property
    def width(self) -> int:
        return self.samples.shape[3]

    @property
    def spatial_res(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def channels(self) -> int:
        return self.samples.shape[4]

    @property
    def center_view(self) -> tuple[int, int]:
        return (self.radius, self.radius)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(self.n_uv) - self.radius

    def center_image(self) -> np.ndarray:
        c = self.radius
        return self.samples[c, c]

    def valid_mask(self) -> np.ndarray:
        if self.valid is None:
            return np.ones(self.samples.shape[:4], dtype=bool)
        return self.valid


@dataclass(frozen=True)
class DisparityGrid:
    """Equally spaced disparity labels (pixels per unit angular step).

    The refocus parameter ``alpha`` maps to disparity as ``d = 1 - 1/alpha``.
    A single-label grid is accepted as a degenerate case.
    """

    d_min: float
    d_max: float
    n_labels: int = 64

    def __post_init__(self):
        if self.n_labels < 1:
            raise ValueError("n_labels must be >= 1")
        if not (math.isfinite(self.d_min) and math.isfinite(self.d_max)):
            raise ValueError("disparity range must be finite")
        if self.n_labels >= 2 and not self.d_min < self.d_max:
            raise ValueError("d_min must be < d_max")

    @property
    def labels(self) -> np.ndarray:
        if self.n_labels == 1:
            return np.array([float(self.d_min)])
        return np.linspace(self.d_min, self.d_max, self.n_labels)

    @property
    def spacing(self) -> float:
        if self.n_labels == 1:
            return 0.0
        return (self.d_max - self.d_min) / (self.n_labels - 1)

    def index_of(self, d) -> np.ndarray:
        """Index of the nearest label for each disparity in ``d``."""
        d = np.asarray(d, dtype=np.float64)
        if self.n_labels == 1:
            return np.zeros(d.shape, dtype=np.int64)
        idx = np.rint((d - self.d_min) / self.spacing).astype(np.int64)
        return np.clip(idx, 0, self.n_labels - 1)


def alpha_to_disparity(alpha):
    return 1.0 - 1.0 / np.asarray(alpha, dtype=np.float64)


def disparity_to_alpha(d):
    return 1.0 / (1.0 - np.asarray(d, dtype=np.float64))


@dataclass(frozen=True)
class AngularPatch:
    values: np.ndarray  # (N, N, C)
    valid: np.ndarray  # (N, N)
    center_value: np.ndarray  # (C,)


def shift_image(img: np.ndarray, dy: float, dx: float, valid: np.ndarray | None = None):
    """Bilinear lookup ``out[y, x] = img[y + dy, x + dx]``.

    Returns ``(out, ok)`` where ``ok`` flags lookups that stayed inside the
    image (and inside ``valid`` when given).  Invalid outputs are 0.
    Taps with zero weight are skipped, so integer shifts copy values
    bit-exactly, and flat regions stay exactly flat.
    """
    h, w = img.shape[:2]
    iy, ix = math.floor(dy), math.floor(dx)
    fy, fx = dy - iy, dx - ix
    ok = np.ones((h, w), dtype=bool)

    def tap(sy, sx):
        nonlocal ok
        src, inside = _integer_shift(img, sy, sx)
        ok &= inside
        if valid is not None:
            ok &= _integer_shift(valid, sy, sx)[0].astype(bool)
        return src.astype(np.float64)

    def row(sy):
        # lerp form a + f*(b - a) keeps flat regions exact
        a = tap(sy, ix)
        return a if fx == 0.0 else a + fx * (tap(sy, ix + 1) - a)

    out = row(iy)
    if fy != 0.0:
        out = out + fy * (row(iy + 1) - out)
    out[~ok] = 0.0
    return out, ok


def _integer_shift(a: np.ndarray, sy: int, sx: int):
    h, w = a.shape[:2]
    out = np.zeros_like(a)
    inside = np.zeros((h, w), dtype=bool)
    y0, y1 = max(0, -sy), min(h, h - sy)
    x0, x1 = max(0, -sx), min(w, w - sx)
    if y0 < y1 and x0 < x1:
        out[y0:y1, x0:x1] = a[y0 + sy:y1 + sy, x0 + sx:x1 + sx]
        inside[y0:y1, x0:x1] = True
    return out, inside


def shear(samples: np.ndarray, d: float, valid: np.ndarray | None = None):
    """Shear raw ``(v, u, y, x, c)`` samples by disparity ``d``.

    No range validation; used directly by linearity checks.
    """
    n = samples.shape[0]
    r = n // 2
    out = np.empty(samples.shape, dtype=np.float64)
    ok = np.empty(samples.shape[:4], dtype=bool)
    for iv in range(n):
        for iu in range(n):
            vmask = None if valid is None else valid[iv, iu]
            out[iv, iu], ok[iv, iu] = shift_image(
                samples[iv, iu], (iv - r) * d, (iu - r) * d, vmask)
    return out, ok


def refocus(lf: LightField4D, d: float) -> LightField4D:
    """Refocus ``lf`` to disparity ``d``.

    Output sample ``(v, u, y, x)`` is the bilinear lookup of the input view at
    ``(y + v*d, x + u*d)`` with signed offsets ``u, v``.  Lookups that leave
    the image are zeroed and flagged in ``valid``.
    """
    if not math.isfinite(d):
        raise ValueError("disparity must be finite")
    out, ok = shear(lf.samples, float(d), lf.valid)
    return LightField4D(out, ok)


def angular_patch(lf_refocused: LightField4D, p) -> AngularPatch:
    y, x = p
    if not (0 <= y < lf_refocused.height and 0 <= x < lf_refocused.width):
        raise IndexError(f"pixel {p} outside {lf_refocused.height}x{lf_refocused.width} image")
    vals = lf_refocused.samples[:, :, y, x, :].copy()
    ok = lf_refocused.valid_mask()[:, :, y, x].copy()
    vals[~ok] = np.nan
    c = lf_refocused.radius
    return AngularPatch(vals, ok, lf_refocused.samples[c, c, y, x, :].copy())


def load_lightfield(manifest_path) -> LightField4D:
    """Read a manifest: header ``N_uv W H`` then ``u v relative_path`` lines.

    ``u`` and ``v`` are 0-based grid indices; blank lines and ``#`` comments
    are ignored.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    lines = [ln.split("#", 1)[0].strip() for ln in manifest_path.read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise LightFieldError("empty manifest")
    try:
        n, w, h = (int(t) for t in lines[0].split())
    except ValueError as exc:
        raise LightFieldError(f"bad manifest header {lines[0]!r}") from exc
    if n % 2 == 0:
        raise LightFieldError(f"angular resolution must be odd (no center view), got {n}")

    views: dict[tuple[int, int], Path] = {}
    for ln in lines[1:]:
        parts = ln.split(maxsplit=2)
        if len(parts) != 3:
            raise LightFieldError(f"bad manifest line {ln!r}")
        u, v = int(parts[0]), int(parts[1])
        if not (0 <= u < n and 0 <= v < n):
            raise LightFieldError(f"view index ({u}, {v}) outside {n}x{n} grid")
        if (u, v) in views:
            raise LightFieldError(f"duplicate view ({u}, {v})")
        views[(u, v)] = manifest_path.parent / parts[2]
    missing = [(u, v) for v in range(n) for u in range(n) if (u, v) not in views]
    if missing:
        raise LightFieldError(f"manifest is missing {len(missing)} views, e.g. {missing[0]}")

    samples = None
    for (u, v), path in views.items():
        if not path.is_file():
            raise FileNotFoundError(f"missing view file: {path}")
        img = io.read_image(path)
        if img.shape[:2] != (h, w):
            raise LightFieldError(
                f"view {path.name} is {img.shape[1]}x{img.shape[0]}, expected {w}x{h}")
        if samples is None:
            samples = np.empty((n, n, h, w, img.shape[2]))
        elif img.shape[2] != samples.shape[4]:
            raise LightFieldError(f"view {path.name} has inconsistent channel count")
        samples[v, u] = img
    return LightField4D(samples)


def save_lightfield(lf: LightField4D, out_dir, prefix: str = "view", bits: int = 16) -> Path:
    """Write views as PNGs plus ``lightfield.txt`` manifest; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [f"{lf.n_uv} {lf.width} {lf.height}"]
    for iv in range(lf.n_uv):
        for iu in range(lf.n_uv):
            name = f"{prefix}_{iv:02d}_{iu:02d}.png"
            io.write_image(out_dir / name, lf.samples[iv, iu], bits=bits)
            rows.append(f"{iu} {iv} {name}")
    manifest = out_dir / "lightfield.txt"
    manifest.write_text("\n".join(rows) + "\n")
    return manifest
