"""Un-occluded view selection.

Candidate occlusion points come from a Canny edge map of the center view.
Around each candidate, a 2-class color clustering of the local patch splits
occluder from background; the background part, resampled onto the angular
grid, is the set of views that still see the point.  Pixels near edges but
not on them inherit a vote of their edge neighbours' masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from lfdepth.lightfield import LightField4D


class InvariantError(AssertionError):
    """An internal invariant was violated."""


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 1.4
    low: float = 0.1
    high: float = 0.2
    # "relative": thresholds are fractions of the largest suppressed gradient.
    # "percentile": thresholds are percentiles (0-100) of the gradient magnitude.
    mode: str = "relative"


def _gradient(image: np.ndarray, sigma: float):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    mag = np.zeros(img.shape[:2])
    gx = np.zeros(img.shape[:2])
    gy = np.zeros(img.shape[:2])
    for c in range(img.shape[2]):
        sm = ndimage.gaussian_filter(img[:, :, c], sigma, mode="nearest") if sigma > 0 else img[:, :, c]
        cx = ndimage.sobel(sm, axis=1, mode="nearest")
        cy = ndimage.sobel(sm, axis=0, mode="nearest")
        cm = np.hypot(cx, cy)
        # color images: take the channel with the strongest response per pixel
        take = cm > mag
        mag[take], gx[take], gy[take] = cm[take], cx[take], cy[take]
    return mag, gx, gy


def _non_max_suppression(mag, gx, gy):
    h, w = mag.shape
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    # neighbour offsets (dy, dx) along the quantised gradient direction
    sector = np.zeros(mag.shape, dtype=np.int8)
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    pad = np.pad(mag, 1, mode="constant")
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in offsets.items():
        ahead = pad[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        behind = pad[1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        # strict on one side so a symmetric step yields a single-pixel line
        sel = (sector == s) & (mag > behind) & (mag >= ahead)
        keep |= sel
    return np.where(keep & (mag > 0), mag, 0.0)


def detect_edges(center_view: np.ndarray, params: CannyParams = CannyParams()) -> np.ndarray:
    """Canny edge map: gaussian smoothing, Sobel gradient, non-maximum
    suppression and hysteresis.  Returns a boolean ``(H, W)`` map."""
    mag, gx, gy = _gradient(center_view, params.sigma)
    nms = _non_max_suppression(mag, gx, gy)
    if not np.any(nms > 0):
        return np.zeros(mag.shape, dtype=bool)
    if params.mode == "relative":
        top = nms.max()
        lo, hi = params.low * top, params.high * top
    elif params.mode == "percentile":
        lo, hi = np.percentile(mag, [params.low, params.high])
    else:
        raise ValueError(f"unknown threshold mode {params.mode!r}")
    strong = nms >= max(hi, np.finfo(float).tiny)
    weak = nms >= max(lo, np.finfo(float).tiny)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(mag.shape, dtype=bool)
    has_strong = np.zeros(n + 1, dtype=bool)
    has_strong[np.unique(labels[strong])] = True
    has_strong[0] = False
    return has_strong[labels]


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    degenerate: bool = False
    n_iter: int = 0

    def objective(self, features) -> float:
        f = np.asarray(features, dtype=np.float64).reshape(len(self.labels), -1)
        return float(((f - self.centers[self.labels]) ** 2).sum())


def _lloyd(f: np.ndarray, centers: np.ndarray, max_iter: int):
    labels = None
    for it in range(1, max_iter + 1):
        d0 = ((f - centers[0]) ** 2).sum(axis=1)
        d1 = ((f - centers[1]) ** 2).sum(axis=1)
        new = (d1 < d0).astype(np.int64)
        if labels is not None and np.array_equal(new, labels):
            return labels, centers, it
        labels = new
        centers = centers.copy()
        for k in (0, 1):
            if np.any(labels == k):
                centers[k] = f[labels == k].mean(axis=0)
    return labels, centers, max_iter


def kmeans2(features, seed: int | None = None, center_index: int = 0,
            max_iter: int = 50, n_init: int = 4) -> KMeansResult:
    """Two-class Lloyd clustering.

    Default seeding is deterministic: one center at ``features[center_index]``
    and one at the feature farthest from it.  With ``seed`` set, ``n_init``
    random restarts are added and the lowest objective wins.  Label 0 is always
    the cluster containing ``features[center_index]``.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    if len(f) == 0:
        raise ValueError("no features")
    if np.all(f == f[0]):
        return KMeansResult(np.zeros(len(f), dtype=np.int64), np.stack([f[0], f[0]]), True)

    dist = ((f - f[center_index]) ** 2).sum(axis=1)
    far = int(np.argmax(dist))
    inits = [np.stack([f[center_index], f[far]])]
    if seed is not None:
        rng = np.random.default_rng(seed)
        for _ in range(n_init):
            i, j = rng.choice(len(f), size=2, replace=False)
            if np.any(f[i] != f[j]):
                inits.append(np.stack([f[i], f[j]]))

    best = None
    for init in inits:
        labels, centers, it = _lloyd(f, init, max_iter)
        obj = float(((f - centers[labels]) ** 2).sum())
        if best is None or obj < best[0] - 1e-12:
            best = (obj, labels, centers, it)
    _, labels, centers, it = best
    if labels[center_index] == 1:
        labels = 1 - labels
        centers = centers[::-1].copy()
    if np.all(labels == 0):
        return KMeansResult(labels, centers, True, it)
    return KMeansResult(labels, centers, False, it)


def resample_nearest(mask: np.ndarray, n: int) -> np.ndarray:
    """Nearest-neighbour resampling of a square patch onto an ``n x n`` grid,
    corners aligned: output index ``i`` reads patch index ``round(i*(P-1)/(n-1))``.

    For a patch of side ``2*r*k + 1`` this is exact sampling at stride ``k``.
    """
    p = mask.shape[0]
    if n == 1:
        idx = np.array([p // 2])
    else:
        idx = np.floor(np.arange(n) * (p - 1) / (n - 1) + 0.5).astype(int)
    return mask[np.ix_(idx, idx)]


def resample_area(mask: np.ndarray, n: int) -> np.ndarray:
    """Area-average the binary patch onto ``n x n`` cells and threshold at 0.5."""
    p = mask.shape[0]
    edges = np.linspace(0.0, p, n + 1)
    # fractional overlap of each patch pixel with each output cell
    lo = np.maximum(edges[:-1, None], np.arange(p)[None, :])
    hi = np.minimum(edges[1:, None], np.arange(p)[None, :] + 1)
    wts = np.clip(hi - lo, 0.0, None)
    wts /= wts.sum(axis=1, keepdims=True)
    frac = wts @ mask.astype(np.float64) @ wts.T
    return frac >= 0.5


def _patch(img: np.ndarray, y: int, x: int, r: int):
    """Patch of radius ``r`` with a validity mask for pixels inside the image."""
    h, w = img.shape[:2]
    ys = np.arange(y - r, y + r + 1)
    xs = np.arange(x - r, x + r + 1)
    oky = (ys >= 0) & (ys < h)
    okx = (xs >= 0) & (xs < w)
    vals = img[np.clip(ys, 0, h - 1)][:, np.clip(xs, 0, w - 1)]
    return vals, oky[:, None] & okx[None, :]


def background_patch_mask(image: np.ndarray, p, radius: int, seed=None):
    """Cluster the color patch around ``p``; True where a pixel shares the
    center pixel's cluster.  Patch pixels outside the image take the label of
    the nearest in-image pixel.  Returns ``None`` when clustering is degenerate.
    """
    y, x = p
    h, w = image.shape[:2]
    y0, y1 = max(0, y - radius), min(h, y + radius + 1)
    x0, x1 = max(0, x - radius), min(w, x + radius + 1)
    block = image[y0:y1, x0:x1]
    feats = block.reshape(block.shape[0] * block.shape[1], -1)
    res = kmeans2(feats, seed=seed, center_index=(y - y0) * (x1 - x0) + (x - x0))
    if res.degenerate:
        return None
    labels = res.labels.reshape(block.shape[:2])
    iy = np.clip(np.arange(y - radius, y + radius + 1), y0, y1 - 1) - y0
    ix = np.clip(np.arange(x - radius, x + radius + 1), x0, x1 - 1) - x0
    return labels[np.ix_(iy, ix)] == 0


def patch_to_views(mask: np.ndarray, n_uv: int, method: str = "nearest") -> np.ndarray:
    """Map a spatial background patch onto the angular grid.

    View ``(u, v)`` is blocked by whatever lies at ``p - (u, v) * delta`` in the
    center view, so the resampled patch is reflected through its center.
    """
    if method == "nearest":
        out = resample_nearest(mask, n_uv)
    elif method == "area":
        out = resample_area(mask, n_uv)
    else:
        raise ValueError(f"unknown resampling {method!r}")
    out = out[::-1, ::-1].copy()
    out[n_uv // 2, n_uv // 2] = True
    return out


def full_mask(height: int, width: int, n_uv: int) -> np.ndarray:
    return np.ones((height, width, n_uv, n_uv), dtype=bool)


def select_unoccluded(lf: LightField4D, edges: np.ndarray, radius: int | None = None,
                      seed=None, resample: str = "nearest", return_patches: bool = False):
    """Initial un-occluded view masks, shape ``(H, W, N, N)``.

    Edge pixels get the resampled background part of their color patch;
    every other pixel keeps all views.  With ``return_patches`` the spatial
    same-cluster masks ``(H, W, 2r+1, 2r+1)`` of the edge pixels are returned
    too (all-true elsewhere); ``vote_views`` can use them.
    """
    n = lf.n_uv
    if radius is None:
        radius = lf.radius
    if radius < 1:
        raise ValueError("radius must be >= 1")
    center = lf.center_image()
    masks = full_mask(lf.height, lf.width, n)
    k = 2 * radius + 1
    patches = np.ones((lf.height, lf.width, k, k), dtype=bool) if return_patches else None
    for y, x in zip(*np.nonzero(edges)):
        bg = background_patch_mask(center, (y, x), radius, seed)
        if bg is None:
            continue
        masks[y, x] = patch_to_views(bg, n, resample)
        if return_patches:
            patches[y, x] = bg
    if return_patches:
        return masks, patches
    return masks


def _box_sum(a: np.ndarray, r: int) -> np.ndarray:
    """Sum over the ``(2r+1)^2`` Chebyshev window, leading two axes, exact ints."""
    a = np.asarray(a, dtype=np.int64)
    pad = [(r + 1, r)] * 2 + [(0, 0)] * (a.ndim - 2)
    c = np.pad(a, pad).cumsum(axis=0).cumsum(axis=1)
    k = 2 * r + 1
    return c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]


def _cluster_votes(masks, edges, patches):
    """Per-pixel (yes, total) counts from edge pixels whose patch puts the
    pixel in their own cluster."""
    h, w = edges.shape
    r = patches.shape[2] // 2
    yes = np.zeros(masks.shape, dtype=np.int64)
    total = np.zeros((h, w), dtype=np.int64)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            # voter q = p + (dy, dx); p sits at offset (-dy, -dx) in q's patch
            py = slice(max(0, -dy), min(h, h - dy))
            px = slice(max(0, -dx), min(w, w - dx))
            qy = slice(max(0, dy), min(h, h + dy))
            qx = slice(max(0, dx), min(w, w + dx))
            ok = edges[qy, qx] & patches[qy, qx, r - dy, r - dx]
            total[py, px] += ok
            yes[py, px] += masks[qy, qx] & ok[:, :, None, None]
    return yes, total


def vote_views(masks: np.ndarray, edges: np.ndarray, radius: int, mode: str = "majority",
               patches: np.ndarray | None = None) -> np.ndarray:
    """Fill masks of non-edge pixels near edges from their edge neighbours.

    ``majority``: a view is kept when at least half the edge pixels within
    Chebyshev ``radius`` keep it (ties keep).  ``union``: kept when any does.
    ``cluster-majority``: majority over the edge pixels in range whose own
    color patch (``patches`` from ``select_unoccluded``) puts the pixel in
    their cluster, i.e. voters on the same side of the edge.
    Edge pixels and pixels with no voter in range are unchanged.
    """
    edges = np.asarray(edges, dtype=bool)
    if mode == "cluster-majority":
        if patches is None:
            raise ValueError("cluster-majority voting needs the spatial patches")
        if patches.shape[2] != 2 * radius + 1:
            raise ValueError("patch size does not match the voting radius")
        yes, total = _cluster_votes(masks, edges, patches)
    else:
        total = _box_sum(edges, radius)
        yes = _box_sum(masks & edges[:, :, None, None], radius)
    if mode in ("majority", "cluster-majority"):
        voted = 2 * yes >= total[:, :, None, None]
    elif mode == "union":
        voted = yes >= 1
    else:
        raise ValueError(f"unknown voting mode {mode!r}")
    target = (~edges) & (total > 0)
    out = masks.copy()
    out[target] = voted[target]
    c = masks.shape[2] // 2
    out[:, :, c, c] = True
    return out


def check_view_mask(masks: np.ndarray) -> None:
    if masks.ndim != 4 or masks.shape[2] != masks.shape[3]:
        raise InvariantError(f"view mask must be (H, W, N, N), got {masks.shape}")
    c = masks.shape[2] // 2
    if not masks[:, :, c, c].all():
        raise InvariantError("center view must always be selected")
    if not masks.any(axis=(2, 3)).all():
        raise InvariantError("empty view mask")
