"""Synthetic light fields of textured planes with exact ground truth.

Scenes are built directly in center-view image coordinates: a background
plane at disparity ``d_bg`` and polygonal fronto-parallel occluders at larger
(nearer) disparities.  A surface point at center pixel ``(x, y)`` on a plane
of disparity ``d`` appears in view ``(u, v)`` at ``(x + u*d, y + v*d)``, the
same convention the refocus shear undoes.

Under this convention the ray from view ``(u, v)`` to a background point
``p`` crosses a nearer plane at center-view position ``p - (u, v) * delta``
with ``delta = d_occ - d_bg > 0``: occluded views are the occluder footprint
around ``p`` reflected through the center view.
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from lfdepth.lightfield import LightField4D


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class Texture:
    color: tuple = (0.5, 0.5, 0.5)
    noise: float = 0.1  # half-width of the uniform per-pixel noise
    seed: int = 0
    smooth: float = 0.0  # gaussian sigma applied to the noise field, pixels

    @property
    def textureless(self) -> bool:
        return self.noise == 0.0


@dataclass(frozen=True, eq=False)
class Occluder:
    polygon: np.ndarray  # (K, 2) vertices as (x, y)
    disparity: float
    texture: Texture = field(default_factory=Texture)

    def __post_init__(self):
        poly = np.asarray(self.polygon, dtype=np.float64)
        if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
            raise SceneError("polygon needs at least 3 (x, y) vertices")
        if abs(_signed_area(poly)) < 1e-9:
            raise SceneError("degenerate polygon (zero area)")
        if not _is_simple(poly):
            raise SceneError("polygon is self-intersecting")
        object.__setattr__(self, "polygon", poly)


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    n_uv: int
    background_disparity: float = 0.0
    background: Texture = field(default_factory=Texture)
    occluders: tuple = ()
    sensor_noise: float = 0.0  # additive gaussian sigma
    noise_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "occluders", tuple(self.occluders))
        if self.n_uv < 1 or self.n_uv % 2 == 0:
            raise SceneError("n_uv must be odd")
        if self.width < 1 or self.height < 1:
            raise SceneError("image size must be positive")
        for occ in self.occluders:
            if not occ.disparity > self.background_disparity:
                raise SceneError("occluders must be nearer (larger disparity) than the background")

    @property
    def radius(self) -> int:
        return self.n_uv // 2

    def surfaces(self):
        """(disparity, polygon or None, texture) nearest first; background last."""
        order = sorted(range(len(self.occluders)), key=lambda i: (-self.occluders[i].disparity, i))
        out = [(self.occluders[i].disparity, self.occluders[i].polygon, self.occluders[i].texture)
               for i in order]
        out.append((self.background_disparity, None, self.background))
        return out


@dataclass(frozen=True)
class GroundTruth:
    disparity: np.ndarray  # (H, W)
    visibility: np.ndarray  # (H, W, N, N) bool, [y, x, v_idx, u_idx]
    occlusion_boundary: np.ndarray  # (H, W) bool

    def occluded_pixels(self) -> np.ndarray:
        """Pixels not seen by every view."""
        return ~self.visibility.all(axis=(2, 3))

    def occlusion_points(self) -> np.ndarray:
        """Occluded pixels on the boundary: background-side occlusion points."""
        return self.occluded_pixels() & self.occlusion_boundary


# -- geometry ---------------------------------------------------------------

def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    for d, a, b, c in ((d1, q1, q2, p1), (d2, q1, q2, p2), (d3, p1, p2, q1), (d4, p1, p2, q2)):
        if d == 0 and on_seg(a, b, c):
            return True
    return False


def _is_simple(poly: np.ndarray) -> bool:
    k = len(poly)
    edges = [(poly[i], poly[(i + 1) % k]) for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            if j == i + 1 or (i == 0 and j == k - 1):
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return False
    return True


def points_in_polygon(poly: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized even-odd crossing test."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    xj, yj = poly[-1]
    for xi, yi in poly:
        straddle = (yi > y) != (yj > y)
        if yj != yi:
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            inside ^= straddle & (x < x_cross)
        xj, yj = xi, yi
    return inside


def _winding_contains(poly: np.ndarray, x: float, y: float) -> bool:
    wn = 0
    k = len(poly)
    for i in range(k):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % k]
        side = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        if y0 <= y:
            if y1 > y and side > 0:
                wn += 1
        elif y1 <= y and side < 0:
            wn -= 1
    return wn != 0


# -- rendering --------------------------------------------------------------

def _margin(scene: SceneSpec) -> int:
    ds = [abs(scene.background_disparity)] + [abs(o.disparity) for o in scene.occluders]
    return int(math.ceil(scene.radius * max(ds))) + 2


def _texture_field(tex: Texture, scene: SceneSpec, margin: int) -> np.ndarray:
    h, w = scene.height + 2 * margin, scene.width + 2 * margin
    rng = np.random.default_rng(tex.seed)
    noise = rng.uniform(-1.0, 1.0, size=(h, w, 3))
    if tex.smooth > 0:
        noise = ndimage.gaussian_filter(noise, sigma=(tex.smooth, tex.smooth, 0), mode="reflect")
        noise /= max(np.abs(noise).max(), 1e-12)
    field_ = np.asarray(tex.color, dtype=np.float64)[None, None, :] + tex.noise * noise
    return np.clip(field_, 0.0, 1.0)


def _sample(field_: np.ndarray, xs: np.ndarray, ys: np.ndarray, margin: int) -> np.ndarray:
    cy, cx = ys + margin, xs + margin
    iy, ix = np.rint(cy), np.rint(cx)
    if np.array_equal(iy, cy) and np.array_equal(ix, cx):
        return field_[iy.astype(int), ix.astype(int)]
    coords = np.stack([cy.ravel(), cx.ravel()])
    out = [ndimage.map_coordinates(field_[..., c], coords, order=1, mode="nearest")
           for c in range(field_.shape[2])]
    return np.stack(out, axis=-1).reshape(xs.shape + (field_.shape[2],))


def center_surface(scene: SceneSpec):
    """Per-pixel disparity of the nearest surface in the center view."""
    yy, xx = np.mgrid[0:scene.height, 0:scene.width].astype(np.float64)
    disp = np.full((scene.height, scene.width), float(scene.background_disparity))
    done = np.zeros(disp.shape, dtype=bool)
    for d, poly, _ in scene.surfaces():
        if poly is None:
            break
        hit = points_in_polygon(poly, xx, yy) & ~done
        disp[hit] = d
        done |= hit
    return disp


def render_view(scene: SceneSpec, u: float, v: float, fields=None, margin=None) -> np.ndarray:
    if margin is None:
        margin = _margin(scene)
    surfaces = scene.surfaces()
    if fields is None:
        fields = [_texture_field(t, scene, margin) for _, _, t in surfaces]
    yy, xx = np.mgrid[0:scene.height, 0:scene.width].astype(np.float64)
    img = np.zeros((scene.height, scene.width, 3))
    painted = np.zeros((scene.height, scene.width), dtype=bool)
    for (d, poly, _), fld in zip(surfaces, fields):
        xs, ys = xx - u * d, yy - v * d
        if poly is None:
            hit = ~painted
        else:
            hit = points_in_polygon(poly, xs, ys) & ~painted
        if hit.any():
            img[hit] = _sample(fld, xs[hit], ys[hit], margin)
        painted |= hit
    return img


def ground_truth(scene: SceneSpec) -> GroundTruth:
    n, r = scene.n_uv, scene.radius
    disp = center_surface(scene)
    yy, xx = np.mgrid[0:scene.height, 0:scene.width].astype(np.float64)
    vis = np.ones((scene.height, scene.width, n, n), dtype=bool)
    for iv in range(n):
        for iu in range(n):
            u, v = iu - r, iv - r
            if u == 0 and v == 0:
                continue
            blocked = np.zeros(disp.shape, dtype=bool)
            for occ in scene.occluders:
                nearer = occ.disparity > disp
                if not nearer.any():
                    continue
                delta = occ.disparity - disp
                hit = points_in_polygon(occ.polygon, xx - u * delta, yy - v * delta)
                blocked |= hit & nearer
            vis[:, :, iv, iu] = ~blocked
    return GroundTruth(disp, vis, disparity_boundary(disp))


def disparity_boundary(disp: np.ndarray, threshold: float = 0.0) -> np.ndarray:
    """Pixels with a 4-neighbour whose disparity differs by more than ``threshold``
    (or by at least it, when ``threshold > 0``)."""
    disp = np.asarray(disp, dtype=np.float64)
    out = np.zeros(disp.shape, dtype=bool)
    dx = np.abs(np.diff(disp, axis=1))
    dy = np.abs(np.diff(disp, axis=0))
    jx = dx >= threshold if threshold > 0 else dx > 0
    jy = dy >= threshold if threshold > 0 else dy > 0
    out[:, :-1] |= jx
    out[:, 1:] |= jx
    out[:-1, :] |= jy
    out[1:, :] |= jy
    return out


def render(scene: SceneSpec):
    """Render all views; returns ``(LightField4D, GroundTruth)``."""
    n, r = scene.n_uv, scene.radius
    margin = _margin(scene)
    fields = [_texture_field(t, scene, margin) for _, _, t in scene.surfaces()]
    samples = np.empty((n, n, scene.height, scene.width, 3))
    for iv in range(n):
        for iu in range(n):
            samples[iv, iu] = render_view(scene, iu - r, iv - r, fields, margin)
    if scene.sensor_noise > 0:
        rng = np.random.default_rng(scene.noise_seed)
        samples = np.clip(samples + rng.normal(0.0, scene.sensor_noise, samples.shape), 0.0, 1.0)
    return LightField4D(samples), ground_truth(scene)


def oracle_visibility(scene: SceneSpec, p, view) -> bool:
    """Whether the center-view surface point under pixel ``p = (y, x)`` is seen
    from view offset ``view = (u, v)``.

    Direct ray test: the segment from the surface point to the camera crosses
    an occluder plane of disparity ``d_s`` at center-view coordinates
    ``p - (u, v) * (d_s - d_p)``.
    """
    y, x = p
    if not (0 <= y < scene.height and 0 <= x < scene.width):
        raise IndexError(f"pixel {p} out of bounds")
    u, v = view
    d_p = scene.background_disparity
    for occ in scene.occluders:
        if occ.disparity > d_p and _winding_contains(occ.polygon, x, y):
            d_p = occ.disparity
    for occ in scene.occluders:
        delta = occ.disparity - d_p
        if delta > 0 and _winding_contains(occ.polygon, x - u * delta, y - v * delta):
            return False
    return True


def nearer_footprint(scene: SceneSpec, p, radius: int) -> np.ndarray:
    """Center-view patch of ``radius`` around ``p``: True where the surface is
    not nearer than the surface at ``p`` (i.e. the non-occluder part)."""
    y, x = p
    disp = center_surface(scene)
    yy, xx = np.mgrid[y - radius:y + radius + 1, x - radius:x + radius + 1].astype(np.float64)
    d_p = disp[y, x]
    nearer = np.zeros(yy.shape, dtype=bool)
    for occ in scene.occluders:
        if occ.disparity > d_p:
            nearer |= points_in_polygon(occ.polygon, xx, yy)
    return ~nearer


# -- scene generators -------------------------------------------------------

_BIG = 4096.0

BG_TEXTURE = Texture(color=(0.20, 0.30, 0.25), noise=0.08, seed=11)
OCC_TEXTURE = Texture(color=(0.80, 0.65, 0.70), noise=0.08, seed=23)


def half_plane_scene(width=64, height=64, n_uv=9, d_bg=0.0, d_occ=1.0, edge=None,
                     angle_deg=0.0, background=BG_TEXTURE, occluder=OCC_TEXTURE,
                     sensor_noise=0.0) -> SceneSpec:
    """Single straight occluder edge (half-and-half angular masks).

    The occluder covers the side of the boundary line the unit normal
    ``(cos a, sin a)`` points to.  ``edge`` is a point ``(x, y)`` on the line;
    by default ``(W/2 - 0.5, H/2 - 0.5)``, so axis-aligned edges fall between
    pixel rows or columns (``angle_deg=0`` covers ``x > W/2 - 0.5``).
    """
    if edge is None:
        edge = (width / 2 - 0.5, height / 2 - 0.5)
    a = math.radians(angle_deg)
    nx, ny = math.cos(a), math.sin(a)
    tx, ty = -ny, nx
    ex, ey = edge
    poly = np.array([
        (ex - _BIG * tx, ey - _BIG * ty),
        (ex + _BIG * tx, ey + _BIG * ty),
        (ex + _BIG * tx + _BIG * nx, ey + _BIG * ty + _BIG * ny),
        (ex - _BIG * tx + _BIG * nx, ey - _BIG * ty + _BIG * ny),
    ])
    return SceneSpec(width, height, n_uv, d_bg, background,
                     (Occluder(poly, d_occ, occluder),), sensor_noise)


def wedge_scene(width=64, height=64, n_uv=9, d_bg=0.0, d_occ=1.0, apex=None,
                opening_deg=90.0, direction_deg=180.0, size=None, arc_step_deg=15.0,
                background=BG_TEXTURE, occluder=OCC_TEXTURE, sensor_noise=0.0) -> SceneSpec:
    """Polygonal disc with a notch: the occluder has a reflex angle at the apex,
    so background points in the notch are seen by fewer than half the views.

    ``direction_deg`` points from the apex into the background notch; the
    notch spans ``opening_deg``.
    """
    if apex is None:
        apex = (width / 2 + 0.5 + 0.0137, height / 2 + 0.5 + 0.0291)
    if size is None:
        size = 0.35 * min(width, height)
    ax, ay = apex
    start = direction_deg + opening_deg / 2
    stop = direction_deg + 360.0 - opening_deg / 2
    n_arc = max(2, int(math.ceil((stop - start) / arc_step_deg)) + 1)
    angles = np.radians(np.linspace(start, stop, n_arc))
    pts = [(ax, ay)] + [(ax + size * math.cos(t), ay + size * math.sin(t)) for t in angles]
    return SceneSpec(width, height, n_uv, d_bg, background,
                     (Occluder(np.array(pts), d_occ, occluder),), sensor_noise)


DARK_TEXTURE = Texture(color=(0.15, 0.15, 0.15), noise=0.15, seed=5)
BRIGHT_TEXTURE = Texture(color=(0.85, 0.85, 0.85), noise=0.15, seed=6)


def high_contrast_wedge(width=64, height=64, n_uv=9, d_bg=0.0, d_occ=2.0, **kw) -> SceneSpec:
    """Notched wedge, bright occluder over a dark background; both strongly
    textured and at least 0.4 apart in every channel."""
    return wedge_scene(width, height, n_uv, d_bg, d_occ, background=DARK_TEXTURE,
                       occluder=BRIGHT_TEXTURE, **kw)


def random_scene(seed: int, width=64, height=64, n_uv=9, kind=None) -> SceneSpec:
    """Seeded integer-disparity scene: straight edge or notched wedge."""
    rng = np.random.default_rng(seed)
    if kind is None:
        kind = "half-plane" if seed % 2 == 0 else "wedge"
    d_occ = float(rng.integers(1, 3))
    bg_color = tuple(float(c) for c in rng.uniform(0.1, 0.35, 3))
    occ_color = tuple(float(c) for c in rng.uniform(0.6, 0.9, 3))
    if rng.random() < 0.5:
        bg_color, occ_color = occ_color, bg_color
    bg = Texture(bg_color, 0.08, int(rng.integers(1 << 30)))
    occ = Texture(occ_color, 0.08, int(rng.integers(1 << 30)))
    if kind == "half-plane":
        angle = float(rng.uniform(0, 360))
        cx = width / 2 + float(rng.uniform(-4, 4)) + 0.0173
        cy = height / 2 + float(rng.uniform(-4, 4)) + 0.0311
        return half_plane_scene(width, height, n_uv, 0.0, d_occ, (cx, cy), angle, bg, occ)
    if kind == "axis-half-plane":
        angle = float(rng.integers(0, 4) * 90)
        return half_plane_scene(width, height, n_uv, 0.0, d_occ, None, angle, bg, occ)
    if kind == "wedge":
        apex = (width / 2 + 0.5 + float(rng.uniform(-3, 3)), height / 2 + 0.5 + float(rng.uniform(-3, 3)))
        return wedge_scene(width, height, n_uv, 0.0, d_occ, apex,
                           float(rng.uniform(60, 120)), float(rng.uniform(0, 360)),
                           background=bg, occluder=occ)
    raise ValueError(f"unknown scene kind {kind!r}")


# -- scene file -------------------------------------------------------------

def _parse_kv(tokens, lineno):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise SceneError(f"line {lineno}: expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def _parse_texture(kv, lineno) -> Texture:
    try:
        color = tuple(float(c) for c in kv.get("color", "0.5,0.5,0.5").split(","))
        if len(color) == 1:
            color = color * 3
        if len(color) != 3:
            raise ValueError("color needs 1 or 3 components")
        return Texture(color, float(kv.get("noise", 0.1)), int(kv.get("seed", 0)),
                       float(kv.get("smooth", 0.0)))
    except ValueError as exc:
        raise SceneError(f"line {lineno}: {exc}") from exc


def parse_scene(text: str) -> SceneSpec:
    """Parse the line-oriented scene grammar.

    Directives (one per line, ``#`` comments)::

        size W H
        views N
        background disparity=D color=R,G,B noise=A seed=S smooth=SIGMA
        occluder disparity=D color=R,G,B noise=A seed=S polygon=x,y;x,y;x,y
        sensor_noise sigma=S seed=K
    """
    size = views = None
    bg_d, bg_tex = 0.0, Texture()
    occluders = []
    noise, noise_seed = 0.0, 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = shlex.split(line)
        try:
            if head == "size":
                size = (int(rest[0]), int(rest[1]))
            elif head == "views":
                views = int(rest[0])
            elif head == "background":
                kv = _parse_kv(rest, lineno)
                bg_d = float(kv.get("disparity", 0.0))
                bg_tex = _parse_texture(kv, lineno)
            elif head == "occluder":
                kv = _parse_kv(rest, lineno)
                if "polygon" not in kv:
                    raise SceneError(f"line {lineno}: occluder needs polygon=")
                pts = [tuple(float(c) for c in pair.split(","))
                       for pair in kv["polygon"].split(";") if pair]
                occluders.append(Occluder(np.array(pts), float(kv["disparity"]),
                                          _parse_texture(kv, lineno)))
            elif head == "sensor_noise":
                kv = _parse_kv(rest, lineno)
                noise = float(kv.get("sigma", 0.0))
                noise_seed = int(kv.get("seed", 0))
            else:
                raise SceneError(f"line {lineno}: unknown directive {head!r}")
        except (IndexError, KeyError, ValueError) as exc:
            if isinstance(exc, SceneError):
                raise
            raise SceneError(f"line {lineno}: {exc}") from exc
    if size is None or views is None:
        raise SceneError("scene needs 'size' and 'views' directives")
    return SceneSpec(size[0], size[1], views, bg_d, bg_tex, tuple(occluders), noise, noise_seed)


def load_scene(path) -> SceneSpec:
    return parse_scene(Path(path).read_text())


def _fmt_texture(t: Texture) -> str:
    color = ",".join(repr(float(c)) for c in t.color)
    return f"color={color} noise={t.noise!r} seed={t.seed} smooth={t.smooth!r}"


def format_scene(scene: SceneSpec) -> str:
    lines = [f"size {scene.width} {scene.height}", f"views {scene.n_uv}",
             f"background disparity={float(scene.background_disparity)!r} {_fmt_texture(scene.background)}"]
    for occ in scene.occluders:
        poly = ";".join(f"{float(x)!r},{float(y)!r}" for x, y in occ.polygon)
        lines.append(f"occluder disparity={float(occ.disparity)!r} {_fmt_texture(occ.texture)} polygon={poly}")
    if scene.sensor_noise > 0:
        lines.append(f"sensor_noise sigma={scene.sensor_noise!r} seed={scene.noise_seed}")
    return "\n".join(lines) + "\n"
