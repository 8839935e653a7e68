"""Report figures, written straight to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _show(ax, img, title, **kw):
    im = ax.imshow(img, interpolation="nearest", **kw)
    ax.set_title(title, fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])
    return im


def overview(path, center, d_ini, d_final, occ, d_range, gt=None) -> None:
    """Center view, initial and final disparity, occlusion map and (with
    ground truth) the absolute error of the final map."""
    n = 5 if gt is not None else 4
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.4), layout="constrained")
    _show(axes[0], np.clip(center, 0, 1).squeeze(), "center view", cmap="gray")
    lo, hi = d_range
    _show(axes[1], d_ini, "initial disparity", cmap="viridis", vmin=lo, vmax=hi)
    im = _show(axes[2], d_final, "final disparity", cmap="viridis", vmin=lo, vmax=hi)
    fig.colorbar(im, ax=axes[1:3], shrink=0.8)
    overlay = np.clip(center, 0, 1).copy()
    if overlay.ndim == 2 or overlay.shape[-1] == 1:
        overlay = np.repeat(overlay.reshape(overlay.shape[:2] + (1,)), 3, axis=2)
    overlay[occ] = (1.0, 0.1, 0.1)
    _show(axes[3], overlay, f"occlusion points ({int(occ.sum())})")
    if gt is not None:
        err = np.abs(d_final - gt)
        im = _show(axes[4], err, "|final - truth|", cmap="magma", vmin=0, vmax=max(err.max(), 1e-6))
        fig.colorbar(im, ax=axes[4], shrink=0.8)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def view_mask(path, mask: np.ndarray, gt: np.ndarray | None = None, title: str = "") -> None:
    """Angular mask of one pixel, optionally beside its true visibility."""
    n = 2 if gt is not None else 1
    fig, axes = plt.subplots(1, n, figsize=(2.6 * n, 2.8), squeeze=False)
    _show(axes[0, 0], mask, title or "selected views", cmap="gray", vmin=0, vmax=1)
    if gt is not None:
        _show(axes[0, 1], gt, "visible views", cmap="gray", vmin=0, vmax=1)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def metric_bars(path, rows) -> None:
    """Bar chart of ``(label, value)`` pairs."""
    labels = [r[0] for r in rows]
    vals = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(rows) + 2), 3.2))
    ax.bar(range(len(vals)), vals, color="#4c72b0")
    ax.set_xticks(range(len(vals)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    for i, v in enumerate(vals):
        ax.text(i, v, f"{v:.3f}", ha="center", va="bottom", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
