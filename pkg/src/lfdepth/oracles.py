"""Exhaustive reference solvers for small instances.

These share no code with the fast paths they check: cuts are enumerated
subset by subset, labelings label by label.
"""

from __future__ import annotations

import itertools

import numpy as np


def min_cut_bruteforce(n: int, arcs) -> tuple[float, tuple]:
    """Minimum s-t cut of a graph with ordinary nodes ``0..n-1``, source ``n``
    and sink ``n+1``; ``arcs`` is an iterable of ``(tail, head, capacity)``.
    Returns the cut value and the source-side node set."""
    arcs = list(arcs)
    best = (float("inf"), ())
    for bits in itertools.product((False, True), repeat=n):
        side = list(bits) + [True, False]
        val = sum(c for a, b, c in arcs if side[a] and not side[b])
        if val < best[0]:
            best = (val, tuple(i for i in range(n) if bits[i]))
    return best


def mrf_energy(unary, w_h, w_v, lam, label_pos, labels) -> float:
    """Energy of a labeling, written out pixel by pixel."""
    _, h, w = unary.shape
    e = 0.0
    for y in range(h):
        for x in range(w):
            e += unary[labels[y][x], y, x]
            if x + 1 < w:
                e += lam * w_h[y, x] * abs(label_pos[labels[y][x]] - label_pos[labels[y][x + 1]])
            if y + 1 < h:
                e += lam * w_v[y, x] * abs(label_pos[labels[y][x]] - label_pos[labels[y + 1][x]])
    return float(e)


def mrf_bruteforce(unary, w_h, w_v, lam, label_pos) -> float:
    """Global minimum by enumerating every labeling (tiny grids only)."""
    n_labels, h, w = unary.shape
    best = float("inf")
    for flat in itertools.product(range(n_labels), repeat=h * w):
        lab = [flat[r * w:(r + 1) * w] for r in range(h)]
        best = min(best, mrf_energy(unary, w_h, w_v, lam, label_pos, lab))
    return best


def mrf_rowdp(unary, w_h, w_v, lam, label_pos) -> float:
    """Global minimum by dynamic programming over whole-row labelings.

    Exact like enumeration but costs ``H * L^(2W)`` instead of ``L^(HW)``,
    which makes 4x4 grids with 3 labels cheap.
    """
    n_labels, h, w = unary.shape
    pos = np.asarray(label_pos, dtype=np.float64)
    rows = np.array(list(itertools.product(range(n_labels), repeat=w)), dtype=np.int64)
    # within-row cost of each row labeling, per image row
    inner = np.zeros((h, len(rows)))
    for y in range(h):
        inner[y] = unary[rows, y, np.arange(w)].sum(axis=1)
        for x in range(w - 1):
            inner[y] += lam * w_h[y, x] * np.abs(pos[rows[:, x]] - pos[rows[:, x + 1]])
    best = inner[0].copy()
    for y in range(1, h):
        # transition between row labeling a (row y-1) and b (row y)
        trans = (lam * w_v[y - 1][None, None, :]
                 * np.abs(pos[rows][:, None, :] - pos[rows][None, :, :])).sum(axis=2)
        best = (best[:, None] + trans).min(axis=0) + inner[y]
    return float(best.min())
