import itertools
import math

import numpy as np
import pytest

from lfdepth import oracles
from lfdepth.depth import CostVolume
from lfdepth.lightfield import DisparityGrid
from lfdepth.maxflow import FlowGraph
from lfdepth.mrf import (EnergyInstance, EnergyParams, build_energy, energy, expansion_graph,
                         expansion_move, icm, smoothness_weights, solve)
from lfdepth.selection import InvariantError


def random_graph(rng, max_nodes=12):
    n = int(rng.integers(1, max_nodes + 1))
    g = FlowGraph(n)
    arcs = []
    for _ in range(int(rng.integers(0, 4 * n + 1))):
        a, b = (int(v) for v in rng.choice(n + 2, 2, replace=False))
        if a == n + 1 or b == n:
            continue
        c = float(rng.integers(0, 10)) if rng.random() < 0.3 else float(rng.random())
        g.add_edges(a, b, c)
        arcs.append((a, b, c))
    return n, g, arcs


def test_maxflow_matches_exhaustive_min_cut():
    rng = np.random.default_rng(42)
    for _ in range(100):
        n, g, arcs = random_graph(rng)
        flow = g.maxflow()
        best, _ = oracles.min_cut_bruteforce(n, arcs)
        assert flow == pytest.approx(best, abs=1e-9)
        # the residual-reachable set is itself a minimum cut
        assert g.cut_value(g.source_side()) == pytest.approx(flow, abs=1e-9)


def test_maxflow_reverse_capacities():
    g = FlowGraph(2)
    g.add_tedges([0, 1], [3.0, 0.0], [0.0, 5.0])
    g.add_edges(1, 0, 0.0, rev_cap=2.0)  # 0 -> 1 with capacity 2
    assert g.maxflow() == pytest.approx(2.0)
    assert list(g.segments()) == [0, 1]


def test_maxflow_validation():
    g = FlowGraph(2)
    with pytest.raises(ValueError):
        g.add_edges(0, 0, 1.0)
    with pytest.raises(ValueError):
        g.add_edges(0, 1, -1.0)
    with pytest.raises(RuntimeError):
        g.source_side()
    assert FlowGraph(0).maxflow() == 0.0


def test_dimacs_export(tmp_path):
    g = FlowGraph(2)
    g.add_tedges([0, 1], [1.5, 0.0], [0.0, 2.0])
    g.add_edges(0, 1, 1.0, rev_cap=0.25)
    g.write_dimacs(tmp_path / "g.dimacs")
    lines = (tmp_path / "g.dimacs").read_text().splitlines()
    assert lines[:3] == ["p max 4 4", "n 3 s", "n 4 t"]
    arcs = {tuple(line.split()[1:3]): float(line.split()[3]) for line in lines[3:]}
    assert arcs == {("3", "1"): 1.5, ("2", "4"): 2.0, ("1", "2"): 1.0, ("2", "1"): 0.25}


def _cv(costs):
    g = DisparityGrid(0.0, float(costs.shape[0] - 1), costs.shape[0])
    return CostVolume(costs, g, np.zeros(costs.shape[1:], dtype=bool))


def test_unary_limits():
    costs = np.zeros((2, 1, 2))
    costs[1, 0, 1] = 1e6
    inst = build_energy(_cv(costs), np.zeros((1, 2), bool), np.zeros((1, 2), bool),
                        np.zeros((1, 2, 3)), EnergyParams())
    assert inst.unary[0].max() == 0.0
    assert inst.unary[1, 0, 1] == pytest.approx(1.0)
    assert np.all((inst.unary >= 0) & (inst.unary <= 1))


def test_unary_scale():
    costs = np.full((1, 1, 1), 3.0 / 255)
    inst = build_energy(_cv(costs), np.zeros((1, 1), bool), np.zeros((1, 1), bool),
                        np.zeros((1, 1, 3)), EnergyParams(cost_scale=255.0))
    assert inst.unary[0, 0, 0] == pytest.approx(1 - math.exp(-0.5))


def test_low_confidence_pixels_have_zero_unary():
    costs = np.ones((3, 2, 2))
    low = np.zeros((2, 2), dtype=bool)
    low[0, 1] = True
    cv = CostVolume(costs, DisparityGrid(0, 2, 3), low)
    inst = build_energy(cv, np.zeros((2, 2), bool), np.zeros((2, 2), bool), np.zeros((2, 2, 3)))
    assert np.all(inst.unary[:, 0, 1] == 0) and np.all(inst.unary[:, 1, 1] > 0)


def test_smoothness_weight_examples():
    occ = np.array([[1, 0]], dtype=bool)
    flat = np.zeros((1, 2), dtype=bool)
    img = np.full((1, 2, 3), 0.4)
    w_h, _ = smoothness_weights(flat, flat, img, EnergyParams())
    assert w_h[0, 0] == 1.0
    w_h, _ = smoothness_weights(occ, flat, img, EnergyParams())
    assert w_h[0, 0] == pytest.approx(0.1353352832366127, rel=1e-12)
    w_h, _ = smoothness_weights(occ, occ, img, EnergyParams())
    assert w_h[0, 0] == pytest.approx(math.exp(-4), rel=1e-12)
    img[0, 1] = [0.5, 0.4, 0.4]
    w_h, w_v = smoothness_weights(flat, flat, img, EnergyParams())
    assert w_h[0, 0] == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert w_v.shape == (0, 2)


def test_energy_params_validation():
    with pytest.raises(ValueError):
        EnergyParams(sigma=0)
    with pytest.raises(ValueError):
        EnergyParams(lam=-1)
    with pytest.raises(ValueError):
        EnergyParams(distance="l2")


def random_instance(rng, h=4, w=4, n_labels=3, lam=None):
    unary = rng.random((n_labels, h, w))
    w_h = rng.random((h, w - 1))
    w_v = rng.random((h - 1, w))
    lam = float(rng.random() * 1.5) if lam is None else lam
    return EnergyInstance(unary, w_h, w_v, lam, np.arange(n_labels, dtype=float))


def test_energy_matches_pixelwise_oracle(rng):
    for _ in range(20):
        inst = random_instance(rng, 3, 5, 4)
        lab = rng.integers(0, 4, size=(3, 5))
        assert energy(inst, lab) == pytest.approx(
            oracles.mrf_energy(inst.unary, inst.w_h, inst.w_v, inst.lam, inst.label_pos, lab),
            abs=1e-12)


@pytest.mark.parametrize("shape", [(3, 3), (2, 4), (4, 2), (1, 5)])
def test_row_dp_oracle_matches_enumeration(shape):
    rng = np.random.default_rng(sum(shape))
    for _ in range(3):
        inst = random_instance(rng, *shape)
        args = (inst.unary, inst.w_h, inst.w_v, inst.lam, inst.label_pos)
        assert oracles.mrf_rowdp(*args) == pytest.approx(oracles.mrf_bruteforce(*args), abs=1e-12)


def _enumerate_4x4(inst):
    """Energy of all 3^16 labelings, each evaluated explicitly from per-row
    and row-pair tables (no min-plus elimination)."""
    u, pos = inst.unary, inst.label_pos
    rows = np.array(list(itertools.product(range(3), repeat=4)), dtype=np.int64)  # 81 x 4
    inner = np.stack([u[rows, y, np.arange(4)].sum(axis=1)
                      + inst.lam * (inst.w_h[y] * np.abs(pos[rows[:, :-1]] - pos[rows[:, 1:]])).sum(axis=1)
                      for y in range(4)])
    pair = np.stack([inst.lam * (inst.w_v[y] * np.abs(pos[rows][:, None] - pos[rows][None])).sum(axis=2)
                     for y in range(3)])
    best = np.inf
    for a in range(81):
        e = (inner[0, a] + pair[0, a][:, None, None] + inner[1][:, None, None]
             + pair[1][:, :, None] + inner[2][None, :, None]
             + pair[2][None] + inner[3][None, None, :])
        best = min(best, float(e.min()))
    return best


def test_full_enumeration_agrees_with_row_dp():
    inst = random_instance(np.random.default_rng(7))
    dp = oracles.mrf_rowdp(inst.unary, inst.w_h, inst.w_v, inst.lam, inst.label_pos)
    assert _enumerate_4x4(inst) == pytest.approx(dp, abs=1e-12)


def test_expansion_near_optimal_on_random_instances():
    rng = np.random.default_rng(2024)
    good = 0
    for _ in range(100):
        inst = random_instance(rng)
        res = solve(inst)
        opt = oracles.mrf_rowdp(inst.unary, inst.w_h, inst.w_v, inst.lam, inst.label_pos)
        assert res.energy >= opt - 1e-9
        assert res.energy <= 2 * opt + 1e-9  # expansion bound for the linear metric
        good += res.energy <= 1.05 * opt
    assert good >= 95


def test_solve_not_worse_than_icm(rng):
    for _ in range(20):
        inst = random_instance(rng, 8, 8, 3)
        init = rng.integers(0, 3, size=(8, 8))
        assert solve(inst, init).energy <= icm(inst, init).energy + 1e-12


def test_energy_history_is_monotone(rng):
    inst = random_instance(rng, 8, 8, 5)
    res = solve(inst, rng.integers(0, 5, size=(8, 8)))
    assert all(b < a for a, b in zip(res.energies, res.energies[1:]))
    assert res.converged and res.cycles <= 10


def test_lambda_zero_is_argmin(rng):
    inst = random_instance(rng, 6, 7, 5, lam=0.0)
    res = solve(inst, rng.integers(0, 5, size=(6, 7)))
    assert np.array_equal(res.labels, np.argmin(inst.unary, axis=0))


def test_single_label():
    inst = random_instance(np.random.default_rng(0), 3, 3, 1)
    res = solve(inst)
    assert np.all(res.labels == 0)
    assert res.energy == energy(inst, np.zeros((3, 3), dtype=np.int64))


def test_expansion_cut_equals_energy(rng):
    inst = random_instance(rng, 5, 5, 4)
    lab = rng.integers(0, 4, size=(5, 5))
    for alpha in range(4):
        prop, e_new = expansion_move(inst, lab, alpha)
        assert e_new <= energy(inst, lab) + 1e-12
        assert np.all((prop == lab) | (prop == alpha))


class _SquaredInstance(EnergyInstance):
    def pair_cost(self, a, b):
        return (self.label_pos[a] - self.label_pos[b]) ** 2


def test_non_metric_pairwise_is_rejected():
    inst = random_instance(np.random.default_rng(1), 1, 2, 3)
    bad = _SquaredInstance(inst.unary, np.ones((1, 1)), inst.w_v, 1.0, inst.label_pos)
    with pytest.raises(InvariantError):
        expansion_graph(bad, np.array([[0, 2]]), 1)


def test_solve_is_deterministic(rng):
    inst = random_instance(rng, 10, 10, 6)
    a, b = solve(inst), solve(inst)
    assert np.array_equal(a.labels, b.labels) and a.energy == b.energy


def test_disparity_distance_option():
    cv = _cv(np.zeros((3, 2, 2)))
    inst = build_energy(cv, np.zeros((2, 2), bool), np.zeros((2, 2), bool), np.zeros((2, 2, 3)),
                        EnergyParams(distance="disparity"))
    assert np.array_equal(inst.label_pos, cv.grid.labels)
