"""Command line: ``lfdepth run | gen-scene | eval | selftest``.

Exit codes: 0 success, 1 bad input, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from lfdepth import evaluation, io, plotting, synth
from lfdepth.lightfield import LightFieldError, save_lightfield
from lfdepth.pipeline import STAGES, PipelineConfig, StageError, apply_overrides, run_pipeline, score
from lfdepth.selection import InvariantError

log = logging.getLogger("lfdepth")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2
INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, LightFieldError, synth.SceneError, ValueError,
                OSError)


class InputError(Exception):
    pass


def _set_threads(n):
    if n is None:
        return
    if n < 1:
        raise InputError("--threads must be >= 1")
    import cv2
    import numba

    cv2.setNumThreads(n)
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _parse_sets(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def build_config(args) -> PipelineConfig:
    manifest = Path(args.manifest)
    if not manifest.is_file():
        raise InputError(f"manifest not found: {manifest}")
    cfg = PipelineConfig(manifest, Path(args.out), resume_from=args.resume_from)
    overrides = {}
    if args.config:
        overrides.update(io.read_key_values(args.config))
    overrides.update(_parse_sets(args.set))
    if args.paper_defaults and overrides:
        raise InputError("--paper-defaults pins every parameter; drop --config/--set")
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    extra = {}
    if args.seed is not None:
        extra["seed"] = args.seed
    if args.control:
        extra["control"] = True
    if args.no_figures:
        extra["figures"] = False
    if args.dump_costs:
        extra["dump_costs"] = True
    if args.dump_dimacs:
        extra["dump_dimacs"] = True
    gt_d = Path(args.gt_disparity) if args.gt_disparity else manifest.parent / "gt_disparity.pfm"
    gt_v = Path(args.gt_visibility) if args.gt_visibility else manifest.parent / "gt_visibility.vmask"
    if not args.no_gt:
        if gt_d.is_file():
            extra["gt_disparity"] = gt_d
            if gt_v.is_file():
                extra["gt_visibility"] = gt_v
        elif args.gt_disparity:
            raise InputError(f"ground truth not found: {gt_d}")
    return dataclasses.replace(cfg, **extra)


def cmd_run(args) -> int:
    cfg = build_config(args)
    res = run_pipeline(cfg)
    print(f"wrote {cfg.out_dir}/d_final.pfm (energy {res.energy:.6g})")
    if res.report is not None:
        sys.stdout.write(evaluation.summary([res.report]))
    return EXIT_OK


BUILTIN = ("half-plane", "wedge", "high-contrast-wedge", "random", "plane")


def _builtin_scene(args):
    kw = dict(width=args.size[0], height=args.size[1], n_uv=args.views)
    if args.builtin == "half-plane":
        return synth.half_plane_scene(d_occ=args.d_occ, angle_deg=args.angle, **kw)
    if args.builtin == "wedge":
        return synth.wedge_scene(d_occ=args.d_occ, **kw)
    if args.builtin == "high-contrast-wedge":
        return synth.high_contrast_wedge(d_occ=args.d_occ, **kw)
    if args.builtin == "plane":
        return synth.SceneSpec(kw["width"], kw["height"], kw["n_uv"], 0.0, synth.BG_TEXTURE)
    return synth.random_scene(args.seed, **kw)


def cmd_gen_scene(args) -> int:
    if (args.scene is None) == (args.builtin is None):
        raise InputError("give either a scene file or --builtin")
    scene = synth.load_scene(args.scene) if args.scene else _builtin_scene(args)
    out = Path(args.out)
    lf, gt = synth.render(scene)
    manifest = save_lightfield(lf, out, bits=args.bits)
    io.write_pfm(out / "gt_disparity.pfm", gt.disparity)
    io.write_view_mask(out / "gt_visibility.vmask", gt.visibility)
    io.write_binary_png(out / "gt_boundary.png", gt.occlusion_boundary)
    (out / "scene.txt").write_text(synth.format_scene(scene))
    print(f"wrote {manifest} ({scene.n_uv}x{scene.n_uv} views, {scene.width}x{scene.height})")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = io.read_pfm(args.pred)
    gt = io.read_pfm(args.gt)
    if pred.shape != gt.shape:
        raise InputError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    masks = io.read_view_mask(args.masks) if args.masks else None
    gt_vis = io.read_view_mask(args.gt_visibility) if args.gt_visibility else None
    n_uv = args.n_uv
    for m in (masks, gt_vis):
        if m is not None:
            n_uv = m.shape[2]
    if n_uv is None:
        raise InputError("--n-uv is needed when no view masks are given")
    if (masks is None) != (gt_vis is None):
        raise InputError("--masks and --gt-visibility go together")
    name = args.name or Path(args.pred).parent.name or "scene"
    report = score(name, n_uv, pred, gt, masks, gt_vis)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_csv(out / "metrics.csv", [report])
    text = evaluation.summary([report])
    (out / "metrics.txt").write_text(text)
    plotting.metric_bars(out / "metrics.png", [(k, v) for _, k, v in report.rows()])
    plotting.overview(out / "error.png", np.zeros(pred.shape + (3,)), pred, pred,
                      np.zeros(pred.shape, dtype=bool), (float(gt.min()) - 0.5, float(gt.max()) + 0.5),
                      gt)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from lfdepth import selftest

    return EXIT_OK if selftest.run() else EXIT_INTERNAL


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfdepth", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--threads", type=int, default=None, help="cap worker threads")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="estimate disparity for a light field")
    r.add_argument("manifest", help="light field manifest (N W H header, 'u v path' lines)")
    r.add_argument("-o", "--out", required=True, help="output directory")
    r.add_argument("--config", help="key=value parameter file")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one parameter")
    r.add_argument("--paper-defaults", action="store_true",
                   help="use the built-in parameter set, refusing any override")
    r.add_argument("--seed", type=int, default=None, help="seed for k-means restarts")
    r.add_argument("--control", action="store_true", help="all views everywhere (baseline)")
    r.add_argument("--resume-from", choices=STAGES, default="edges")
    r.add_argument("--gt-disparity", help="ground-truth PFM (default: gt_disparity.pfm beside the manifest)")
    r.add_argument("--gt-visibility", help="ground-truth packed visibility")
    r.add_argument("--no-gt", action="store_true", help="skip evaluation even if ground truth exists")
    r.add_argument("--no-figures", action="store_true")
    r.add_argument("--dump-costs", action="store_true", help="write raw float32 cost volumes")
    r.add_argument("--dump-dimacs", action="store_true", help="write the first expansion graph")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen-scene", help="render a synthetic scene with ground truth")
    g.add_argument("scene", nargs="?", help="scene file")
    g.add_argument("-o", "--out", required=True)
    g.add_argument("--builtin", choices=BUILTIN)
    g.add_argument("--seed", type=int, default=0, help="seed for --builtin random")
    g.add_argument("--d-occ", type=float, default=2.0)
    g.add_argument("--angle", type=float, default=0.0, help="half-plane edge normal, degrees")
    g.add_argument("--size", type=int, nargs=2, default=(64, 64), metavar=("W", "H"))
    g.add_argument("--views", type=int, default=9)
    g.add_argument("--bits", type=int, choices=(8, 16), default=16)
    g.set_defaults(func=cmd_gen_scene)

    e = sub.add_parser("eval", help="score a disparity map against ground truth")
    e.add_argument("pred", help="predicted disparity PFM")
    e.add_argument("gt", help="ground-truth disparity PFM")
    e.add_argument("-o", "--out", required=True)
    e.add_argument("--masks", help="predicted packed view masks")
    e.add_argument("--gt-visibility", help="ground-truth packed visibility")
    e.add_argument("--n-uv", type=int, help="angular resolution (if no masks)")
    e.add_argument("--name", help="scene name in the report")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("selftest", help="run the built-in oracle checks")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        _set_threads(args.threads)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        cause = exc.__cause__
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(cause, InvariantError):
            return EXIT_INTERNAL
        return EXIT_INPUT if isinstance(cause, INPUT_ERRORS) else EXIT_INTERNAL
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
