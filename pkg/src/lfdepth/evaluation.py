"""Disparity RMSE, boundary F-measure and view-selection F-measure."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

BOUNDARY_TOLERANCE = 1  # pixels, Chebyshev


def rmse(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray | None = None) -> float:
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(gt, dtype=np.float64)
    if mask is not None:
        diff = diff[np.asarray(mask, dtype=bool)]
    if diff.size == 0:
        raise ValueError("empty evaluation region")
    return float(np.sqrt(np.mean(diff ** 2)))


def _f(tp_p, n_pred, tp_r, n_gt):
    precision = tp_p / n_pred if n_pred else 0.0
    recall = tp_r / n_gt if n_gt else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def fmeasure_binary(pred: np.ndarray, gt: np.ndarray, tol: int = 0) -> float:
    """F-measure of binary maps.  A predicted positive within Chebyshev
    ``tol`` of a ground-truth positive is a hit for precision, and a ground
    truth positive with a prediction within ``tol`` is recalled."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    if tol < 0:
        raise ValueError("tolerance must be >= 0")
    if tol > 0:
        box = np.ones((2 * tol + 1, 2 * tol + 1), dtype=bool)
        gt_near = ndimage.binary_dilation(gt, box)
        pred_near = ndimage.binary_dilation(pred, box)
    else:
        gt_near, pred_near = gt, pred
    return _f(int((pred & gt_near).sum()), int(pred.sum()),
              int((gt & pred_near).sum()), int(gt.sum()))


def selection_fmeasure(pred: np.ndarray, gt_vis: np.ndarray, region: np.ndarray) -> float:
    """Micro-averaged F over (pixel, view) pairs of the pixels in ``region``."""
    if pred.shape != gt_vis.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt_vis.shape}")
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ValueError("empty region")
    p = pred[region]
    g = gt_vis[region]
    tp = int((p & g).sum())
    return _f(tp, int(p.sum()), tp, int(g.sum()))


def boundary_from_disparity(disp: np.ndarray, threshold: float) -> np.ndarray:
    """Pixels on either side of a 4-neighbour disparity jump of at least
    ``threshold`` (any nonzero jump when ``threshold`` is 0)."""
    disp = np.asarray(disp, dtype=np.float64)
    out = np.zeros(disp.shape, dtype=bool)
    jy = np.abs(np.diff(disp, axis=0))
    jx = np.abs(np.diff(disp, axis=1))
    jy = jy >= threshold if threshold > 0 else jy > 0
    jx = jx >= threshold if threshold > 0 else jx > 0
    out[:-1] |= jy
    out[1:] |= jy
    out[:, :-1] |= jx
    out[:, 1:] |= jx
    return out


def occlusion_band(boundary: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0 or not boundary.any():
        return boundary.copy()
    return ndimage.binary_dilation(boundary, np.ones((2 * radius + 1,) * 2, dtype=bool))


@dataclass
class MetricReport:
    scene: str
    rmse: float
    rmse_band: float | None
    rmse_interior: float | None
    boundary_f: float | None
    selection_f: float | None
    extra: dict = field(default_factory=dict)

    def rows(self):
        vals = {"rmse": self.rmse, "rmse_band": self.rmse_band,
                "rmse_interior": self.rmse_interior, "boundary_f": self.boundary_f,
                "selection_f": self.selection_f, **self.extra}
        return [(self.scene, k, v) for k, v in vals.items() if v is not None]


def evaluate(scene: str, d_final, gt_disp, band_radius: int, *, gt_boundary=None,
             pred_boundary=None, masks=None, gt_vis=None, region=None, extra=None) -> MetricReport:
    """Collect the metrics available for one scene.  The band is the ground
    truth boundary dilated by ``band_radius``; interior is the rest."""
    r_band = r_int = bf = sf = None
    if gt_boundary is not None and gt_boundary.any():
        band = occlusion_band(gt_boundary, band_radius)
        r_band = rmse(d_final, gt_disp, band)
        if (~band).any():
            r_int = rmse(d_final, gt_disp, ~band)
        if pred_boundary is not None:
            bf = fmeasure_binary(pred_boundary, gt_boundary, BOUNDARY_TOLERANCE)
    if masks is not None and gt_vis is not None and region is not None and region.any():
        sf = selection_fmeasure(masks, gt_vis, region)
    return MetricReport(scene, rmse(d_final, gt_disp), r_band, r_int, bf, sf, dict(extra or {}))


def write_csv(path, reports) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["scene", "metric", "value"])
        for rep in reports:
            for row in rep.rows():
                w.writerow([row[0], row[1], f"{row[2]:.6g}"])


def read_csv(path) -> list[tuple[str, str, float]]:
    with open(path, newline="") as f:
        return [(r["scene"], r["metric"], float(r["value"])) for r in csv.DictReader(f)]


def summary(reports) -> str:
    lines = [f"# boundary F-measure matching tolerance: {BOUNDARY_TOLERANCE} px (Chebyshev)",
             "# selection F-measure: micro-averaged over (pixel, view) pairs"]
    for rep in reports:
        parts = [f"{k}={v:.4f}" for _, k, v in rep.rows()]
        lines.append(f"{rep.scene}: " + " ".join(parts))
    return "\n".join(lines) + "\n"
