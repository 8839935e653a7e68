"""s-t max-flow / min-cut on a residual graph.

Dinic's algorithm: BFS builds a level graph, then shortest augmenting paths
are pushed until the level graph is blocked.  Arcs are stored in pairs so the
reverse of arc ``a`` is ``a ^ 1``; the adjacency is CSR after ``finalize``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

EPS = 1e-12


@njit(cache=True)
def _bfs_levels(n, start, arc_to, cap, s, level, queue):
    level[:] = -1
    level[s] = 0
    head = 0
    tail = 1
    queue[0] = s
    while head < tail:
        u = queue[head]
        head += 1
        for a in range(start[u], start[u + 1]):
            v = arc_to[a]
            if level[v] < 0 and cap[a] > EPS:
                level[v] = level[u] + 1
                queue[tail] = v
                tail += 1


@njit(cache=True)
def _dinic(n, start, arc_to, rev, cap, s, t):
    level = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    it = np.empty(n, np.int64)
    path = np.empty(n, np.int64)
    flow = 0.0
    while True:
        _bfs_levels(n, start, arc_to, cap, s, level, queue)
        if level[t] < 0:
            break
        for i in range(n):
            it[i] = start[i]
        # iterative DFS with current-arc pointers
        depth = 0
        u = s
        while True:
            if u == t:
                f = np.inf
                for i in range(depth):
                    if cap[path[i]] < f:
                        f = cap[path[i]]
                for i in range(depth):
                    a = path[i]
                    cap[a] -= f
                    cap[rev[a]] += f
                flow += f
                depth = 0
                u = s
                continue
            advanced = False
            while it[u] < start[u + 1]:
                a = it[u]
                v = arc_to[a]
                if cap[a] > EPS and level[v] == level[u] + 1:
                    path[depth] = a
                    depth += 1
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                if depth == 0:
                    break
                level[u] = -1
                depth -= 1
                a = path[depth]
                u = arc_to[rev[a]]
                it[u] += 1
    return flow


@njit(cache=True)
def _reachable(n, start, arc_to, cap, s):
    level = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    _bfs_levels(n, start, arc_to, cap, s, level, queue)
    return level >= 0


class FlowGraph:
    """Directed graph with ``n`` ordinary nodes plus a source and a sink.

    Mirrors the usual graph-cut interface: ``add_edges`` for node-node arcs,
    ``add_tedges`` for terminal capacities, ``maxflow`` then ``segments``
    (0 = source side, 1 = sink side).
    """

    def __init__(self, n_nodes: int):
        self.n = int(n_nodes)
        self.source = self.n
        self.sink = self.n + 1
        self._tails, self._heads, self._caps, self._rcaps = [], [], [], []
        self._residual = None
        self._flow = None

    def add_edges(self, u, v, cap, rev_cap=0.0):
        u = np.atleast_1d(np.asarray(u, dtype=np.int64))
        v = np.atleast_1d(np.asarray(v, dtype=np.int64))
        cap = np.broadcast_to(np.asarray(cap, dtype=np.float64), u.shape)
        rev_cap = np.broadcast_to(np.asarray(rev_cap, dtype=np.float64), u.shape)
        if np.any(u == v):
            raise ValueError("self loops are not allowed")
        if np.any(cap < 0) or np.any(rev_cap < 0):
            raise ValueError("capacities must be non-negative")
        self._tails.append(u)
        self._heads.append(v)
        self._caps.append(np.array(cap))
        self._rcaps.append(np.array(rev_cap))
        self._residual = None

    def add_tedges(self, nodes, cap_source, cap_sink):
        nodes = np.atleast_1d(np.asarray(nodes, dtype=np.int64))
        self.add_edges(np.full(nodes.shape, self.source), nodes, cap_source)
        self.add_edges(nodes, np.full(nodes.shape, self.sink), cap_sink)

    def arcs(self):
        """Forward arcs as ``(tail, head, capacity)`` arrays, insertion order."""
        if not self._tails:
            e = np.zeros(0, dtype=np.int64)
            return e, e, np.zeros(0)
        return (np.concatenate(self._tails), np.concatenate(self._heads),
                np.concatenate(self._caps))

    def _build(self):
        tails, heads, caps = self.arcs()
        rcaps = np.concatenate(self._rcaps) if self._rcaps else np.zeros(0)
        m = len(tails)
        # paired arcs: 2k forward, 2k+1 reverse
        a_tail = np.empty(2 * m, dtype=np.int64)
        a_head = np.empty(2 * m, dtype=np.int64)
        a_cap = np.empty(2 * m)
        a_tail[0::2], a_tail[1::2] = tails, heads
        a_head[0::2], a_head[1::2] = heads, tails
        a_cap[0::2], a_cap[1::2] = caps, rcaps
        order = np.argsort(a_tail, kind="stable")
        pos = np.empty(2 * m, dtype=np.int64)
        pos[order] = np.arange(2 * m)
        n_all = self.n + 2
        start = np.zeros(n_all + 1, dtype=np.int64)
        np.cumsum(np.bincount(a_tail, minlength=n_all), out=start[1:])
        self._start = start
        self._arc_to = a_head[order]
        self._rev = pos[np.arange(2 * m) ^ 1][order]
        self._residual = a_cap[order].copy()
        self._fwd_pos = pos[0::2]

    def maxflow(self) -> float:
        self._build()
        self._flow = float(_dinic(self.n + 2, self._start, self._arc_to, self._rev,
                                  self._residual, self.source, self.sink))
        return self._flow

    def source_side(self) -> np.ndarray:
        """Nodes reachable from the source in the residual graph."""
        if self._flow is None:
            raise RuntimeError("call maxflow() first")
        reach = _reachable(self.n + 2, self._start, self._arc_to, self._residual, self.source)
        return reach[: self.n]

    def segments(self) -> np.ndarray:
        return (~self.source_side()).astype(np.int64)

    def cut_value(self, source_side: np.ndarray) -> float:
        """Capacity of arcs from the given source set to its complement."""
        side = np.zeros(self.n + 2, dtype=bool)
        side[: self.n] = source_side
        side[self.source] = True
        tails, heads, caps = self.arcs()
        rcaps = np.concatenate(self._rcaps) if self._rcaps else np.zeros(0)
        return float(caps[side[tails] & ~side[heads]].sum()
                     + rcaps[side[heads] & ~side[tails]].sum())

    def write_dimacs(self, path) -> None:
        """DIMACS max-flow text; nodes numbered from 1, source n+1, sink n+2."""
        tails, heads, caps = self.arcs()
        rcaps = np.concatenate(self._rcaps) if self._rcaps else np.zeros(0)
        lines = [f"p max {self.n + 2} {int((caps > 0).sum() + (rcaps > 0).sum())}",
                 f"n {self.source + 1} s", f"n {self.sink + 1} t"]
        for a, b, c, rc in zip(tails, heads, caps, rcaps):
            if c > 0:
                lines.append(f"a {a + 1} {b + 1} {c:.17g}")
            if rc > 0:
                lines.append(f"a {b + 1} {a + 1} {rc:.17g}")
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
