"""Acceptance criteria, one check per criterion.

Each ``criterion_*`` returns ``(passed, detail)``; the pytest wrappers record a
PASS/FAIL line (echoed in the terminal summary) and then assert.  Run this
file directly to print the lines without pytest.
"""

import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from scipy import ndimage

sys.path.insert(0, str(Path(__file__).parent))

import conftest  # noqa: E402
from lfdepth import oracles, synth  # noqa: E402
from lfdepth.cli import main as cli_main  # noqa: E402
from lfdepth.depth import argmin_labels, masked_cost  # noqa: E402
from lfdepth.evaluation import selection_fmeasure  # noqa: E402
from lfdepth.lightfield import DisparityGrid, save_lightfield  # noqa: E402
from lfdepth.maxflow import FlowGraph  # noqa: E402
from lfdepth.mrf import EnergyInstance, solve  # noqa: E402
from lfdepth.occlusion import detect_occlusion, occlusion_threshold, projection_radius  # noqa: E402
from lfdepth.pipeline import PipelineConfig, candidate_edges, run_pipeline  # noqa: E402
from lfdepth.selection import CannyParams, select_unoccluded, vote_views  # noqa: E402


def _run(scene, out, **kw):
    lf, gt = synth.render(scene)
    cfg = PipelineConfig(Path(out) / "lightfield.txt", out, figures=False, **kw)
    return lf, gt, run_pipeline(cfg, lf)


def _occluded_boundary(gt):
    return ~gt.visibility.all(axis=(2, 3)) & gt.occlusion_boundary


def criterion_1():
    """Refined view masks vs oracle visibility."""
    t0 = time.perf_counter()
    fs, exact = [], []
    with tempfile.TemporaryDirectory() as tmp:
        for seed in range(20):
            _, gt, res = _run(synth.random_scene(seed), Path(tmp) / f"r{seed}")
            fs.append(selection_fmeasure(res.masks, gt.visibility, _occluded_boundary(gt)))
        for angle in (0, 90, 180, 270):
            for d_occ in (1.0, 2.0):
                scene = synth.half_plane_scene(64, 64, 9, d_occ=d_occ, angle_deg=angle)
                _, gt, res = _run(scene, Path(tmp) / f"a{angle}_{d_occ}")
                exact.append(selection_fmeasure(res.masks, gt.visibility, _occluded_boundary(gt)))
    dt = time.perf_counter() - t0
    mean = float(np.mean(fs))
    ok = mean >= 0.95 and all(f == 1.0 for f in exact) and dt < 120
    return ok, (f"mean F={mean:.4f} over 20 seeded scenes (min {min(fs):.4f}, >=0.95); "
                f"axis-aligned half-planes F={[round(f, 4) for f in exact]} (need all 1.0); "
                f"{dt:.1f}s (<120s)")


def criterion_2():
    """Reach of oracle occlusion equals the projection radius."""
    t0 = time.perf_counter()
    bad = []
    for u_ext in (1, 2, 3, 4):
        n = 2 * u_ext + 1
        for dd in (1, 2, 3):
            want = projection_radius(0.0, float(dd), u_ext)
            for angle in (0, 90, 180, 270):
                scene = synth.half_plane_scene(40, 40, n, d_occ=float(dd), angle_deg=angle)
                gt = synth.ground_truth(scene)
                occluder = gt.disparity == dd
                dist = ndimage.distance_transform_cdt(~occluder, metric="chessboard")
                reach = int(dist[~gt.visibility.all(axis=(2, 3))].max())
                if reach != want:
                    bad.append((u_ext, dd, angle, reach, want))
    dt = time.perf_counter() - t0
    return not bad and dt < 30, (f"48 cases (u_extent 1..4 x dd 1..3 x 4 orientations), "
                                 f"mismatches={bad}; {dt:.1f}s (<30s)")


def criterion_3():
    """Threshold formula and weak-occlusion behaviour."""
    exact = all(occlusion_threshold(n) * (n // 2) == 1 for n in range(3, 18, 2))
    eps = occlusion_threshold(9)
    got = {}
    estimated = {}
    for step in (0.2, 0.3):
        lf, gt = synth.render(synth.half_plane_scene(40, 40, 9, d_occ=step))
        _, edges = candidate_edges(lf.center_image(), CannyParams(), 1)
        occ = detect_occlusion(gt.disparity, edges, lf.radius, eps)
        got[step] = (int(occ.sum()), bool(occ[gt.occlusion_boundary].all()))
        # same rule on the estimated initial map, for the record
        m, p = select_unoccluded(lf, edges, return_patches=True)
        m = vote_views(m, edges, lf.radius, "cluster-majority", p)
        grid = DisparityGrid(-1.0, 3.0, 41)
        d_ini = grid.labels[argmin_labels(masked_cost(lf, m, grid))]
        estimated[step] = int(detect_occlusion(d_ini, edges, lf.radius, eps).sum())
    ok = exact and got[0.2][0] == 0 and got[0.3][1]
    return ok, (f"1/floor(N/2) exact for N=3..17: {exact}; step 0.2: Occ count {got[0.2][0]} (need 0); "
                f"step 0.3: Occ on every boundary pixel {got[0.3][1]}; "
                f"on the estimated initial map the counts are {estimated[0.2]} / {estimated[0.3]}")


def criterion_4():
    """Masked cost against the all-views control on the high-contrast wedge."""
    scene = synth.high_contrast_wedge()
    with tempfile.TemporaryDirectory() as tmp:
        lf, gt = synth.render(scene)
        save_lightfield(lf, tmp)
        from lfdepth import io

        io.write_pfm(Path(tmp) / "gt.pfm", gt.disparity)
        kw = dict(figures=False, gt_disparity=Path(tmp) / "gt.pfm")
        pipe = run_pipeline(PipelineConfig(Path(tmp) / "lightfield.txt", Path(tmp) / "p", **kw), lf)
        ctrl = run_pipeline(PipelineConfig(Path(tmp) / "lightfield.txt", Path(tmp) / "c",
                                           control=True, **kw), lf)
    from lfdepth.evaluation import occlusion_band, rmse

    band = occlusion_band(gt.occlusion_boundary, projection_radius(0.0, 2.0, 4))
    half = DisparityGrid(-1.0, 3.0, 33).spacing / 2
    pb, cb = pipe.report.rmse_band, ctrl.report.rmse_band
    pi, ci = pipe.report.rmse_interior, ctrl.report.rmse_interior
    ini_p, ini_c = rmse(pipe.d_ini, gt.disparity, band), rmse(ctrl.d_ini, gt.disparity, band)
    ok = pb <= 0.5 * cb and pi <= half and ci <= half
    note = "; control also reaches 0 after the MRF, so the final-map comparison does not discriminate" \
        if cb == 0 else ""
    return ok, (f"band RMSE pipeline {pb:.4f} vs control {cb:.4f} (need <= 50%); "
                f"interior {pi:.4f} / {ci:.4f} (<= {half}); "
                f"initial-map band RMSE {ini_p:.4f} vs {ini_c:.4f}{note}")


def criterion_5():
    """Occlusion-boundary F-measure on synthetic scenes."""
    scenes = {"wedge d=1": synth.wedge_scene(64, 64, 9, d_occ=1.0),
              "wedge d=2": synth.wedge_scene(64, 64, 9, d_occ=2.0),
              "half-plane 30deg": synth.half_plane_scene(64, 64, 9, d_occ=1.0, edge=(31.7, 32.2),
                                                         angle_deg=30.0),
              "high-contrast wedge": synth.high_contrast_wedge()}
    for seed in range(4):
        scenes[f"random {seed}"] = synth.random_scene(100 + seed)
    fs = {}
    with tempfile.TemporaryDirectory() as tmp:
        for i, (name, scene) in enumerate(scenes.items()):
            lf, gt = synth.render(scene)
            save_lightfield(lf, Path(tmp) / str(i))
            from lfdepth import io

            io.write_pfm(Path(tmp) / str(i) / "gt.pfm", gt.disparity)
            cfg = PipelineConfig(Path(tmp) / str(i) / "lightfield.txt", Path(tmp) / str(i) / "out",
                                 figures=False, gt_disparity=Path(tmp) / str(i) / "gt.pfm")
            fs[name] = run_pipeline(cfg, lf).report.boundary_f
    ok = all(f >= 0.85 for f in fs.values())
    return ok, "boundary F (1 px) " + ", ".join(f"{k}={v:.3f}" for k, v in fs.items()) + " (each >= 0.85)"


def criterion_6():
    """Solver correctness."""
    rng = np.random.default_rng(6)
    # (b) max-flow vs enumeration
    cut_ok = 0
    for _ in range(100):
        n = int(rng.integers(1, 13))
        g = FlowGraph(n)
        arcs = []
        for _ in range(int(rng.integers(0, 3 * n + 1))):
            a, b = (int(v) for v in rng.choice(n + 2, 2, replace=False))
            if a == n + 1 or b == n:
                continue
            c = float(rng.random())
            g.add_edges(a, b, c)
            arcs.append((a, b, c))
        cut_ok += abs(g.maxflow() - oracles.min_cut_bruteforce(n, arcs)[0]) <= 1e-9
    # (a) + (c): solve asserts monotone moves internally; its history must also be monotone
    near, monotone = 0, True
    for _ in range(100):
        u = rng.random((3, 4, 4))
        w_h, w_v = rng.random((4, 3)), rng.random((3, 4))
        lam = float(rng.random() * 1.5)
        inst = EnergyInstance(u, w_h, w_v, lam, np.arange(3.0))
        res = solve(inst, rng.integers(0, 3, (4, 4)))
        monotone &= all(b < a for a, b in zip(res.energies, res.energies[1:]))
        near += res.energy <= 1.05 * oracles.mrf_rowdp(u, w_h, w_v, lam, np.arange(3.0))
    # (d) lambda = 0
    u = rng.random((7, 12, 10))
    inst = EnergyInstance(u, rng.random((12, 9)), rng.random((11, 10)), 0.0, np.arange(7.0))
    decoupled = np.array_equal(solve(inst, rng.integers(0, 7, (12, 10))).labels, u.argmin(axis=0))
    ok = monotone and cut_ok == 100 and near >= 95 and decoupled
    return ok, (f"(a) moves non-increasing: {monotone}; (b) max-flow = exhaustive min cut on "
                f"{cut_ok}/100 graphs; (c) within 1.05x optimum on {near}/100 (need >= 95); "
                f"(d) lambda=0 gives argmin: {decoupled}")


def criterion_7():
    """Bit-identical reruns from the CLI."""
    with tempfile.TemporaryDirectory() as tmp:
        scene = Path(tmp) / "scene"
        cli_main(["gen-scene", "--builtin", "wedge", "--size", "48", "48", "-o", str(scene)])
        outs = []
        for run in ("a", "b"):
            rc = cli_main(["run", str(scene / "lightfield.txt"), "--paper-defaults", "--seed", "7",
                           "--no-figures", "-o", str(Path(tmp) / run)])
            outs.append((rc, [(Path(tmp) / run / f).read_bytes() for f in ("d_ini.pfm", "d_final.pfm")]))
    same = outs[0] == outs[1] and outs[0][0] == 0
    return same, f"d_ini.pfm and d_final.pfm identical across two runs: {same}"


def criterion_8():
    """Property suites under hypothesis."""
    import test_properties as tp

    tp.CASES.clear()
    t0 = time.perf_counter()
    for name in tp.PROPERTIES:
        getattr(tp, name)()
    dt = time.perf_counter() - t0
    total = sum(tp.CASES.values())
    return total >= 1000 and dt < 300, (f"{total} generated cases across {len(tp.CASES)} "
                                        f"properties (>= 1000); {dt:.1f}s (< 300s)")


CRITERIA = {
    1: ("occluder consistency of refined masks", criterion_1),
    2: ("projection radius reach", criterion_2),
    3: ("occlusion threshold and weak occlusions", criterion_3),
    4: ("masked cost vs all-views control", criterion_4),
    5: ("occlusion-boundary F-measure", criterion_5),
    6: ("solver correctness", criterion_6),
    7: ("determinism", criterion_7),
    8: ("property suites", criterion_8),
}


def _check(k):
    title, fn = CRITERIA[k]
    ok, detail = fn()
    line = f"{'PASS' if ok else 'FAIL'} criterion {k} ({title}): {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok, line


def test_criterion_1():
    ok, line = _check(1)
    assert ok, line


def test_criterion_2():
    ok, line = _check(2)
    assert ok, line


def test_criterion_3():
    ok, line = _check(3)
    assert ok, line


def test_criterion_4():
    ok, line = _check(4)
    assert ok, line


def test_criterion_5():
    ok, line = _check(5)
    assert ok, line


def test_criterion_6():
    ok, line = _check(6)
    assert ok, line


def test_criterion_7():
    ok, line = _check(7)
    assert ok, line


def test_criterion_8():
    ok, line = _check(8)
    assert ok, line


if __name__ == "__main__":
    results = [_check(k)[0] for k in CRITERIA]
    sys.exit(0 if all(results) else 1)
