"""Masked photo-consistency cost volume and winner-take-all disparity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lfdepth.lightfield import DisparityGrid, LightField4D, shift_image


@dataclass(frozen=True, eq=False)
class CostVolume:
    costs: np.ndarray  # (n_labels, H, W), label-major
    grid: DisparityGrid
    low_confidence: np.ndarray  # (H, W): some label had no usable view besides the center

    def __post_init__(self):
        c = self.costs
        if c.ndim != 3 or c.shape[0] != self.grid.n_labels:
            raise ValueError("cost volume shape does not match the label grid")
        if not np.all(np.isfinite(c)) or c.min(initial=0.0) < 0:
            raise ValueError("costs must be finite and non-negative")


def masked_cost(lf: LightField4D, masks: np.ndarray, grid: DisparityGrid) -> CostVolume:
    """Mean absolute color deviation from the center view over selected views.

    For label ``d`` and pixel ``p`` the cost averages, over views that are
    both selected in ``masks[p]`` and in bounds after the shear, the
    channel-mean ``|A_p,d(u, v) - A_p,d(0, 0)|``.  The center view counts in
    the mean.  Where only the center view remains the cost is 0 and the pixel
    is flagged low-confidence.
    """
    if grid.n_labels < 1:
        raise ValueError("empty label grid")
    n, r = lf.n_uv, lf.radius
    h, w = lf.height, lf.width
    if masks.shape != (h, w, n, n):
        raise ValueError(f"mask shape {masks.shape} does not match light field")
    center = lf.center_image()
    lf_valid = lf.valid
    costs = np.zeros((grid.n_labels, h, w))
    low = np.zeros((h, w), dtype=bool)
    for li, d in enumerate(grid.labels):
        total = np.zeros((h, w))
        count = np.zeros((h, w))
        for iv in range(n):
            for iu in range(n):
                sel = masks[:, :, iv, iu]
                if iu == r and iv == r:
                    count += sel
                    continue
                if not sel.any():
                    continue
                vmask = None if lf_valid is None else lf_valid[iv, iu]
                shifted, ok = shift_image(lf.samples[iv, iu], (iv - r) * d, (iu - r) * d, vmask)
                use = sel & ok
                dev = np.abs(shifted - center).mean(axis=2)
                total += np.where(use, dev, 0.0)
                count += use
        lonely = count <= 1
        low |= lonely
        costs[li] = np.where(lonely, 0.0, total / np.maximum(count, 1))
    return CostVolume(costs, grid, low)


def argmin_labels(cv: CostVolume) -> np.ndarray:
    """Per-pixel index of the cheapest label; ties go to the smallest disparity."""
    return np.argmin(cv.costs, axis=0)


def argmin_depth(cv: CostVolume) -> np.ndarray:
    return cv.grid.labels[argmin_labels(cv)]
