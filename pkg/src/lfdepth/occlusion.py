"""Occlusion detection on the initial disparity map and view re-selection."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from lfdepth.lightfield import LightField4D
from lfdepth.selection import _patch, background_patch_mask, kmeans2, patch_to_views


def occlusion_threshold(n_uv: int) -> Fraction:
    """Relaxed disparity-jump threshold ``1 / floor(N_uv / 2)``."""
    if n_uv < 3:
        raise ValueError(f"angular resolution must be >= 3, got {n_uv}")
    if n_uv % 2 == 0:
        raise ValueError(f"angular resolution must be odd, got {n_uv}")
    return Fraction(1, n_uv // 2)


def _depth_clusters(d: np.ndarray, y: int, x: int, radius: int, robust: bool = False):
    """Two disparity clusters of the patch around ``(y, x)``: their means, or
    their medians when ``robust``.  ``None`` for a flat patch."""
    vals, ok = _patch(d, y, x, radius)
    feats = vals[ok]
    res = kmeans2(feats, center_index=int(ok.ravel()[:radius * (2 * radius + 1) + radius].sum()))
    if res.degenerate:
        return None
    if robust:
        return tuple(float(np.median(feats[res.labels == k])) for k in (0, 1))
    return float(res.centers[0, 0]), float(res.centers[1, 0])


def detect_occlusion(d_ini: np.ndarray, edges: np.ndarray, patch_radius: int, eps) -> np.ndarray:
    """Occ(p) = 1 for candidate pixels whose local disparity patch splits
    into two clusters at least ``eps`` apart."""
    if d_ini.shape != edges.shape:
        raise ValueError("disparity map and edge map differ in size")
    eps = float(eps)
    occ = np.zeros(d_ini.shape, dtype=bool)
    for y, x in zip(*np.nonzero(edges)):
        c = _depth_clusters(d_ini, y, x, patch_radius)
        if c is not None and abs(c[0] - c[1]) >= eps:
            occ[y, x] = True
    return occ


def projection_radius(d_bg: float, d_occ: float, u_extent: int) -> int:
    """Spatial reach, in whole pixels, of an occluder's shadow in angular space:
    ``ceil(|u_extent * (d_occ - d_bg)|)``, at least 1."""
    r = abs(u_extent * (d_occ - d_bg))
    if not math.isfinite(r):
        raise ValueError("non-finite disparities")
    # absorb float noise from cluster means before rounding up
    return max(1, int(math.ceil(r - 1e-9)))


def reselect_views(lf: LightField4D, occ: np.ndarray, d_ini: np.ndarray, prior: np.ndarray,
                   patch_radius: int | None = None, resample: str = "nearest",
                   max_radius: int | None = None) -> np.ndarray:
    """Redo view selection at occlusion points with a patch sized by the
    projection radius.

    Background and occluder disparities are the medians of the two 2-means
    clusters of the local disparity patch (smaller = farther = background);
    medians keep a few bad initial estimates from inflating the radius.
    All other pixels keep ``prior``.
    """
    if patch_radius is None:
        patch_radius = lf.radius
    if max_radius is None:
        max_radius = max(lf.height, lf.width)
    center = lf.center_image()
    out = prior.copy()
    for y, x in zip(*np.nonzero(occ)):
        c = _depth_clusters(d_ini, y, x, patch_radius, robust=True)
        if c is None:
            continue
        d_bg, d_occ = min(c), max(c)
        r = min(projection_radius(d_bg, d_occ, lf.radius), max_radius)
        bg = background_patch_mask(center, (y, x), r)
        if bg is None:
            continue
        out[y, x] = patch_to_views(bg, lf.n_uv, resample)
    return out
