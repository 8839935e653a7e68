"""Quick oracle checks runnable from the installed package (``lfdepth selftest``)."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from lfdepth import oracles, synth
from lfdepth.lightfield import refocus
from lfdepth.maxflow import FlowGraph
from lfdepth.mrf import EnergyInstance, energy, solve
from lfdepth.occlusion import occlusion_threshold


def check_maxflow(n_graphs=30, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n_graphs):
        n = int(rng.integers(1, 9))
        g = FlowGraph(n)
        arcs = []
        for _ in range(int(rng.integers(0, 3 * n + 1))):
            a, b = (int(v) for v in rng.choice(n + 2, 2, replace=False))
            if a == n + 1 or b == n:
                continue
            c = float(rng.random())
            g.add_edges(a, b, c)
            arcs.append((a, b, c))
        flow = g.maxflow()
        best, _ = oracles.min_cut_bruteforce(n, arcs)
        if abs(flow - best) > 1e-9:
            return f"max-flow {flow} != brute-force min cut {best}"
    return None


def check_expansion(n_instances=20, seed=1):
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        u = rng.random((3, 3, 3))
        w_h, w_v = rng.random((3, 2)), rng.random((2, 3))
        lam = float(rng.random() * 2)
        inst = EnergyInstance(u, w_h, w_v, lam, np.arange(3.0))
        res = solve(inst)
        opt = oracles.mrf_bruteforce(u, w_h, w_v, lam, np.arange(3.0))
        if res.energy > 2 * opt + 1e-9:
            return f"expansion energy {res.energy} above twice the optimum {opt}"
        if abs(energy(inst, res.labels) - oracles.mrf_energy(u, w_h, w_v, lam, np.arange(3.0),
                                                             res.labels)) > 1e-9:
            return "energy evaluation disagrees with the pixel-by-pixel oracle"
    return None


def check_threshold():
    for n in range(3, 18, 2):
        if occlusion_threshold(n) != Fraction(1, n // 2):
            return f"threshold wrong for N={n}"
    return None


def check_refocus():
    lf, _ = synth.render(synth.half_plane_scene(16, 16, 5))
    if not np.array_equal(refocus(lf, 0.0).samples, lf.samples):
        return "refocus at d=0 is not the identity"
    return None


def check_visibility():
    scene = synth.wedge_scene(24, 24, 5, d_occ=1.0)
    gt = synth.ground_truth(scene)
    rng = np.random.default_rng(2)
    for _ in range(40):
        y, x = (int(v) for v in rng.integers(0, 24, 2))
        for iv, iu in itertools.product(range(5), range(5)):
            if gt.visibility[y, x, iv, iu] != synth.oracle_visibility(scene, (y, x), (iu - 2, iv - 2)):
                return f"rendered visibility disagrees with the ray oracle at {(y, x)}"
    return None


CHECKS = {"max-flow vs enumeration": check_maxflow,
          "alpha-expansion vs enumeration": check_expansion,
          "occlusion threshold": check_threshold,
          "refocus identity": check_refocus,
          "visibility vs ray oracle": check_visibility}


def run(out=print) -> bool:
    ok = True
    for name, fn in CHECKS.items():
        err = fn()
        out(f"{'PASS' if err is None else 'FAIL'}  {name}" + (f": {err}" if err else ""))
        ok &= err is None
    return ok
