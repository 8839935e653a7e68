"""End-to-end driver: edges, view selection, initial depth, occlusion
refinement and MRF regularization, with every intermediate written to disk.

Stages, in order: ``edges``, ``select``, ``cost``, ``occlusion``,
``reselect``, ``mrf``.  A run can resume from any stage, reading the
artifacts the earlier stages left in the output directory.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from lfdepth import evaluation, io, plotting
from lfdepth.depth import argmin_labels, masked_cost
from lfdepth.lightfield import DisparityGrid, LightField4D, load_lightfield
from lfdepth.mrf import EnergyParams, build_energy, solve
from lfdepth.occlusion import detect_occlusion, occlusion_threshold, projection_radius, reselect_views
from lfdepth.selection import (CannyParams, InvariantError, check_view_mask, detect_edges,
                               full_mask, select_unoccluded, vote_views)

log = logging.getLogger(__name__)

STAGES = ("edges", "select", "cost", "occlusion", "reselect", "mrf")


class StageError(RuntimeError):
    """A pipeline stage failed; the original exception is ``__cause__``."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


@dataclass
class PipelineConfig:
    manifest: Path
    out_dir: Path
    d_min: float = -1.0
    d_max: float = 3.0
    n_labels: int = 33
    energy: EnergyParams = field(default_factory=lambda: EnergyParams(cost_scale=255.0))
    canny: CannyParams = field(default_factory=CannyParams)
    candidate_dilation: int = 1  # grow Canny edges by this many pixels
    patch_radius: int | None = None  # default floor(N_uv / 2)
    vote_mode: str = "cluster-majority"
    resample: str = "nearest"
    max_cycles: int = 10
    seed: int | None = None  # enables seeded k-means restarts
    control: bool = False  # all views everywhere, no occlusion handling
    gt_disparity: Path | None = None
    gt_visibility: Path | None = None
    resume_from: str = "edges"
    figures: bool = True
    dump_costs: bool = False
    dump_dimacs: bool = False

    def __post_init__(self):
        self.manifest = Path(self.manifest)
        self.out_dir = Path(self.out_dir)
        if self.resume_from not in STAGES:
            raise ValueError(f"unknown stage {self.resume_from!r}; expected one of {STAGES}")
        if self.candidate_dilation < 0:
            raise ValueError("candidate_dilation must be >= 0")
        if self.vote_mode not in ("majority", "union", "cluster-majority"):
            raise ValueError(f"unknown voting mode {self.vote_mode!r}")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        DisparityGrid(self.d_min, self.d_max, self.n_labels)

    @property
    def grid(self) -> DisparityGrid:
        return DisparityGrid(self.d_min, self.d_max, self.n_labels)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, Path):
                d[k] = str(v)
        return d


# keys accepted in a key=value config file, with their parsers
def _opt_int(s):
    return None if s.lower() in ("", "none") else int(s)


def _bool(s):
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


TOP_KEYS = {"d_min": float, "d_max": float, "n_labels": int, "candidate_dilation": int,
            "patch_radius": _opt_int, "vote_mode": str, "resample": str, "max_cycles": int,
            "seed": _opt_int, "control": _bool, "figures": _bool, "dump_costs": _bool,
            "dump_dimacs": _bool}
ENERGY_KEYS = {"lam": float, "sigma": float, "gamma_occ": float, "gamma_edge": float,
               "gamma_color": float, "cost_scale": float, "distance": str}
CANNY_KEYS = {"canny_sigma": ("sigma", float), "canny_low": ("low", float),
              "canny_high": ("high", float), "canny_mode": ("mode", str)}


def apply_overrides(cfg: PipelineConfig, values: dict) -> PipelineConfig:
    """New config with ``key=value`` string overrides applied."""
    top, energy, canny = {}, {}, {}
    for key, raw in values.items():
        if key in TOP_KEYS:
            top[key] = TOP_KEYS[key](raw)
        elif key in ENERGY_KEYS:
            energy[key] = ENERGY_KEYS[key](raw)
        elif key in CANNY_KEYS:
            name, conv = CANNY_KEYS[key]
            canny[name] = conv(raw)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if energy:
        top["energy"] = dataclasses.replace(cfg.energy, **energy)
    if canny:
        top["canny"] = dataclasses.replace(cfg.canny, **canny)
    return dataclasses.replace(cfg, **top)


@dataclass
class PipelineResult:
    d_ini: np.ndarray
    d_final: np.ndarray
    occ: np.ndarray
    edges: np.ndarray
    masks: np.ndarray
    energy: float
    report: evaluation.MetricReport | None


def _artifact(cfg, name):
    return cfg.out_dir / name


def _need(path: Path) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"cannot resume: missing artifact {path}")
    return path


def _labels_of(grid: DisparityGrid, disp: np.ndarray) -> np.ndarray:
    idx = grid.index_of(disp)
    if not np.allclose(grid.labels[idx], disp, atol=1e-5):
        raise ValueError("disparity map does not lie on the configured label grid")
    return idx


def candidate_edges(center: np.ndarray, params: CannyParams, dilation: int):
    """Canny map and the candidate set (Canny grown by ``dilation`` pixels)."""
    canny = detect_edges(center, params)
    if dilation == 0:
        return canny, canny.copy()
    box = np.ones((2 * dilation + 1,) * 2, dtype=bool)
    return canny, ndimage.binary_dilation(canny, box)


def run_pipeline(cfg: PipelineConfig, lf: LightField4D | None = None) -> PipelineResult:
    """Run (or resume) the pipeline; raises ``StageError`` on failure with
    the artifacts of completed stages left in place."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    start = STAGES.index(cfg.resume_from)
    stage = "load"
    try:
        if lf is None:
            lf = load_lightfield(cfg.manifest)
        grid = cfg.grid
        radius = cfg.patch_radius if cfg.patch_radius is not None else lf.radius
        center = lf.center_image()
        eps = occlusion_threshold(lf.n_uv)
        _write_manifest(cfg, lf, radius, eps)
        timings = {}

        def begin(name):
            nonlocal stage
            stage = name
            timings[name] = time.perf_counter()
            log.info("stage %s", name)

        def done(name):
            timings[name] = time.perf_counter() - timings[name]
            log.info("stage %s took %.2fs", name, timings[name])

        begin("edges")
        if start <= 0:
            canny, edges = candidate_edges(center, cfg.canny, cfg.candidate_dilation)
            io.write_binary_png(_artifact(cfg, "edges_canny.png"), canny)
            io.write_binary_png(_artifact(cfg, "edges.png"), edges)
        else:
            edges = io.read_binary_png(_need(_artifact(cfg, "edges.png")))
        done("edges")

        begin("select")
        if start <= 1:
            if cfg.control:
                masks = full_mask(lf.height, lf.width, lf.n_uv)
            else:
                masks, patches = select_unoccluded(lf, edges, radius, cfg.seed, cfg.resample,
                                                   return_patches=True)
                masks = vote_views(masks, edges, radius, cfg.vote_mode, patches)
            check_view_mask(masks)
            io.write_view_mask(_artifact(cfg, "masks_init.vmask"), masks)
        else:
            masks = io.read_view_mask(_need(_artifact(cfg, "masks_init.vmask")))
        done("select")

        begin("cost")
        if start <= 2:
            cv = masked_cost(lf, masks, grid)
            d_ini = grid.labels[argmin_labels(cv)]
            io.write_pfm(_artifact(cfg, "d_ini.pfm"), d_ini)
            io.write_disparity_preview(_artifact(cfg, "d_ini.png"), d_ini, cfg.d_min, cfg.d_max)
            if cfg.dump_costs:
                io.write_cost_volume(_artifact(cfg, "cost_init.f32"), cv.costs)
        else:
            d_ini = grid.labels[_labels_of(grid, io.read_pfm(_need(_artifact(cfg, "d_ini.pfm"))))]
            cv = None
        done("cost")

        begin("occlusion")
        if start <= 3:
            if cfg.control:
                occ = np.zeros(edges.shape, dtype=bool)
            else:
                occ = detect_occlusion(d_ini, edges, radius, eps)
            if np.any(occ & ~edges):
                raise InvariantError("occlusion map is not a subset of the edge map")
            io.write_binary_png(_artifact(cfg, "occ.png"), occ)
        else:
            occ = io.read_binary_png(_need(_artifact(cfg, "occ.png")))
        done("occlusion")

        begin("reselect")
        if start <= 4:
            refined = masks if cfg.control else reselect_views(lf, occ, d_ini, masks, radius,
                                                               cfg.resample)
            check_view_mask(refined)
            io.write_view_mask(_artifact(cfg, "masks_refined.vmask"), refined)
        else:
            refined = io.read_view_mask(_need(_artifact(cfg, "masks_refined.vmask")))
        done("reselect")

        begin("mrf")
        if refined is masks and cv is not None:
            cv_ref = cv
        else:
            cv_ref = masked_cost(lf, refined, grid)
        if cfg.dump_costs:
            io.write_cost_volume(_artifact(cfg, "cost_refined.f32"), cv_ref.costs)
        inst = build_energy(cv_ref, occ, edges, center, cfg.energy)
        init = argmin_labels(cv_ref)
        if cfg.dump_dimacs:
            _dump_first_move(inst, init, _artifact(cfg, "expansion_0.dimacs"))
        res = solve(inst, init, cfg.max_cycles)
        d_final = grid.labels[res.labels]
        io.write_pfm(_artifact(cfg, "d_final.pfm"), d_final)
        io.write_disparity_preview(_artifact(cfg, "d_final.png"), d_final, cfg.d_min, cfg.d_max)
        done("mrf")
        log.info("mrf: %d cycles, energy %.6g, converged=%s", res.cycles, res.energy, res.converged)

        stage = "report"
        report = None
        gt = None
        if cfg.gt_disparity is not None:
            gt = io.read_pfm(cfg.gt_disparity)
            if gt.shape != d_final.shape:
                raise ValueError("ground-truth disparity size differs from the light field")
            gt_vis = io.read_view_mask(cfg.gt_visibility) if cfg.gt_visibility else None
            report = score(cfg.manifest.parent.name, lf.n_uv, d_final, gt, refined, gt_vis,
                           eps, extra={"rmse_initial": evaluation.rmse(d_ini, gt)})
            evaluation.write_csv(_artifact(cfg, "metrics.csv"), [report])
            _artifact(cfg, "metrics.txt").write_text(evaluation.summary([report]))
        if cfg.figures:
            plotting.overview(_artifact(cfg, "overview.png"), center, d_ini, d_final, occ,
                              (cfg.d_min, cfg.d_max), gt)
        return PipelineResult(d_ini, d_final, occ, edges, refined, res.energy, report)
    except StageError:
        raise
    except Exception as exc:  # annotate with the failing stage
        raise StageError(stage, exc) from exc


def score(scene: str, n_uv: int, d_final, gt, masks=None, gt_vis=None, eps=None, extra=None):
    """Metric report of a final map against ground truth."""
    if eps is None:
        eps = occlusion_threshold(n_uv)
    gt_boundary = evaluation.boundary_from_disparity(gt, 0.0)
    band_r = projection_radius(float(gt.min()), float(gt.max()), n_uv // 2)
    region = None
    if gt_vis is not None:
        region = ~gt_vis.all(axis=(2, 3)) & gt_boundary
        if gt_vis.shape[:2] != gt.shape:
            raise ValueError("ground-truth visibility size differs from the disparity map")
    return evaluation.evaluate(scene, d_final, gt, band_r, gt_boundary=gt_boundary,
                               pred_boundary=evaluation.boundary_from_disparity(d_final, float(eps)),
                               masks=masks, gt_vis=gt_vis, region=region, extra=extra)


def _dump_first_move(inst, init, path):
    from lfdepth.mrf import expansion_graph

    expansion_graph(inst, init, 0).write_dimacs(path)


def _write_manifest(cfg: PipelineConfig, lf: LightField4D, radius: int, eps) -> None:
    info = {
        "config": cfg.to_dict(),
        "light_field": {"n_uv": lf.n_uv, "width": lf.width, "height": lf.height,
                        "channels": lf.channels},
        "derived": {"patch_radius": radius, "eps_occ": str(eps), "eps_occ_value": float(eps),
                    "label_spacing": cfg.grid.spacing},
        "decisions": {
            "angular_mask": "reflected background patch, nearest resampling",
            "vote_mode": cfg.vote_mode,
            "candidates": f"canny grown by {cfg.candidate_dilation} px",
            "reselect_depths": "medians of the two disparity clusters",
            "cost": "channel-mean L1 to the center view, out-of-bounds views dropped",
            "unary": "1 - exp(-(cost_scale * C)^2 / (2 sigma^2)); low-confidence pixels 0",
            "pairwise": f"w_pq * |f_p - f_q| in {cfg.energy.distance} units, 4-connected",
            "solver": "alpha-expansion, increasing label order, Dinic max-flow",
        },
    }
    _artifact(cfg, "run_manifest.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
