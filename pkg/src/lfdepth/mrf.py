"""Occlusion-aware MRF over disparity labels, minimised by alpha-expansion.

Energy: sum_p U_p(f_p) + lam * sum_{p~q} w_pq * |f_p - f_q| on the 4-connected
grid.  The data term is a robust (Gaussian-shaped) penalty of the refined
matching cost; the smoothness weight drops across occlusion boundaries,
candidate edges and colour changes of the center view.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from lfdepth.depth import CostVolume
from lfdepth.maxflow import FlowGraph
from lfdepth.selection import InvariantError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyParams:
    lam: float = 0.35
    sigma: float = 3.0
    gamma_occ: float = 0.5
    gamma_edge: float = 0.5
    gamma_color: float = 0.1
    cost_scale: float = 1.0  # multiplies raw costs before the robust penalty
    distance: str = "index"  # "index" (label steps) or "disparity"

    def __post_init__(self):
        for name in ("sigma", "gamma_occ", "gamma_edge", "gamma_color", "cost_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.distance not in ("index", "disparity"):
            raise ValueError(f"unknown label distance {self.distance!r}")


@dataclass(frozen=True, eq=False)
class EnergyInstance:
    unary: np.ndarray  # (L, H, W)
    w_h: np.ndarray  # (H, W-1) weight between (y, x) and (y, x+1)
    w_v: np.ndarray  # (H-1, W) weight between (y, x) and (y+1, x)
    lam: float
    label_pos: np.ndarray  # (L,) coordinate used for |f_p - f_q|

    @property
    def n_labels(self):
        return self.unary.shape[0]

    @property
    def shape(self):
        return self.unary.shape[1:]

    def pair_cost(self, a, b):
        return np.abs(self.label_pos[a] - self.label_pos[b])


def smoothness_weights(occ, edges, center, params: EnergyParams):
    """Horizontal and vertical neighbour weights in (0, 1]."""
    occ = occ.astype(float)
    e = edges.astype(float)
    img = center if center.ndim == 3 else center[..., None]

    def w(sl_a, sl_b):
        do = occ[sl_a] - occ[sl_b]
        de = e[sl_a] - e[sl_b]
        dc = ((img[sl_a] - img[sl_b]) ** 2).sum(axis=-1)
        return np.exp(-do ** 2 / (2 * params.gamma_occ ** 2)
                      - de ** 2 / (2 * params.gamma_edge ** 2)
                      - dc / (2 * params.gamma_color ** 2))

    w_h = w((slice(None), slice(None, -1)), (slice(None), slice(1, None)))
    w_v = w((slice(None, -1), slice(None)), (slice(1, None), slice(None)))
    return w_h, w_v


def build_energy(cv: CostVolume, occ, edges, center, params: EnergyParams = EnergyParams()):
    c = cv.costs * params.cost_scale
    unary = 1.0 - np.exp(-c ** 2 / (2 * params.sigma ** 2))
    # no usable views: let the smoothness term fill in
    unary[:, cv.low_confidence] = 0.0
    w_h, w_v = smoothness_weights(occ, edges, center, params)
    if params.distance == "index":
        pos = np.arange(cv.grid.n_labels, dtype=float)
    else:
        pos = np.asarray(cv.grid.labels, dtype=float)
    return EnergyInstance(unary, w_h, w_v, float(params.lam), pos)


def energy(inst: EnergyInstance, labels: np.ndarray) -> float:
    data = np.take_along_axis(inst.unary, labels[None], 0)[0].sum()
    sh = (inst.w_h * inst.pair_cost(labels[:, :-1], labels[:, 1:])).sum()
    sv = (inst.w_v * inst.pair_cost(labels[:-1], labels[1:])).sum()
    return float(data + inst.lam * (sh + sv))


def _tol(e):
    # float summation slack, relative to the energy's magnitude
    return 1e-10 * (1.0 + abs(e))


def _expansion(inst: EnergyInstance, labels: np.ndarray, alpha: int, check: bool):
    h, w = inst.shape
    idx = np.arange(h * w).reshape(h, w)
    keep = np.take_along_axis(inst.unary, labels[None], 0)[0].copy()
    move = inst.unary[alpha].copy()
    const = 0.0
    graph = FlowGraph(h * w)

    for wt, p_sl, q_sl in ((inst.w_h, (slice(None), slice(None, -1)), (slice(None), slice(1, None))),
                           (inst.w_v, (slice(None, -1), slice(None)), (slice(1, None), slice(None)))):
        fp, fq = labels[p_sl], labels[q_sl]
        k = inst.lam * wt
        a = k * inst.pair_cost(fp, fq)  # both keep
        b = k * inst.pair_cost(fp, alpha)  # p keeps, q moves
        c = k * inst.pair_cost(alpha, fq)  # p moves, q keeps
        # both move: 0.  submodular iff b + c >= a + 0
        cross = b + c - a
        if check and np.any(cross < -1e-12 * (1.0 + k.max(initial=0.0))):
            raise InvariantError("expansion term is not submodular")
        const += float(a.sum())
        move[p_sl] += c - a
        move[q_sl] -= c
        graph.add_edges(idx[p_sl].ravel(), idx[q_sl].ravel(), np.maximum(cross, 0.0).ravel())

    # sink side (x_p = 1) means p takes alpha
    m = np.minimum(keep, move)
    const += float(m.sum())
    graph.add_tedges(idx.ravel(), (move - m).ravel(), (keep - m).ravel())
    return graph, const


def expansion_graph(inst: EnergyInstance, labels: np.ndarray, alpha: int) -> FlowGraph:
    """The s-t graph of one expansion move (for inspection or export)."""
    return _expansion(inst, np.asarray(labels, dtype=np.int64), alpha, True)[0]


def expansion_move(inst: EnergyInstance, labels: np.ndarray, alpha: int, check: bool = True):
    """Optimal alpha-expansion of ``labels``: returns (proposal, its energy)."""
    graph, const = _expansion(inst, labels, alpha, check)
    flow = graph.maxflow()
    moved = graph.segments().reshape(inst.shape).astype(bool)
    proposal = np.where(moved, alpha, labels)
    e_new = energy(inst, proposal)
    if check and abs(e_new - (flow + const)) > 1e-8 * (1.0 + abs(e_new)):
        raise InvariantError(f"cut value {flow + const} disagrees with energy {e_new}")
    return proposal, e_new


@dataclass
class SolveResult:
    labels: np.ndarray
    energy: float
    energies: list  # energy after each accepted move, starting with the initial
    cycles: int
    converged: bool


def solve(inst: EnergyInstance, init: np.ndarray | None = None, max_cycles: int = 10,
          check: bool = True) -> SolveResult:
    """Alpha-expansion, labels visited in increasing order, until a full cycle
    brings no improvement or ``max_cycles`` is reached."""
    if init is None:
        labels = np.argmin(inst.unary, axis=0)
    else:
        labels = np.asarray(init, dtype=np.int64).copy()
    if inst.n_labels == 1:
        return SolveResult(labels, energy(inst, labels), [energy(inst, labels)], 0, True)
    e = energy(inst, labels)
    history = [e]
    converged = False
    cycles = 0
    for cycles in range(1, max_cycles + 1):
        improved = False
        for alpha in range(inst.n_labels):
            proposal, e_new = expansion_move(inst, labels, alpha, check)
            if check and e_new > e + _tol(e):
                raise InvariantError(f"expansion on label {alpha} raised energy {e} -> {e_new}")
            if e_new < e - _tol(e):
                labels, e = proposal, e_new
                history.append(e)
                improved = True
        log.debug("cycle %d energy %.6g", cycles, e)
        if not improved:
            converged = True
            break
    return SolveResult(labels, e, history, cycles, converged)


def icm(inst: EnergyInstance, init: np.ndarray | None = None, max_sweeps: int = 50) -> SolveResult:
    """Iterated conditional modes; a weak local baseline for comparison."""
    labels = np.argmin(inst.unary, axis=0) if init is None else np.asarray(init).copy()
    h, w = inst.shape
    all_l = np.arange(inst.n_labels)
    history = [energy(inst, labels)]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for y in range(h):
            for x in range(w):
                local = inst.unary[:, y, x].copy()
                if x > 0:
                    local += inst.lam * inst.w_h[y, x - 1] * inst.pair_cost(all_l, labels[y, x - 1])
                if x < w - 1:
                    local += inst.lam * inst.w_h[y, x] * inst.pair_cost(all_l, labels[y, x + 1])
                if y > 0:
                    local += inst.lam * inst.w_v[y - 1, x] * inst.pair_cost(all_l, labels[y - 1, x])
                if y < h - 1:
                    local += inst.lam * inst.w_v[y, x] * inst.pair_cost(all_l, labels[y + 1, x])
                best = int(np.argmin(local))
                if local[best] < local[labels[y, x]] - 1e-15:
                    labels[y, x] = best
                    changed = True
        history.append(energy(inst, labels))
        if not changed:
            return SolveResult(labels, history[-1], history, sweeps, True)
    return SolveResult(labels, history[-1], history, sweeps, False)
