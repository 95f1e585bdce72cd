"""``gmp`` command line.

Exit codes: 0 success, 1 processing failure, 2 usage or I/O error.
``GMP_THREADS`` sets the default thread count; ``--threads`` overrides it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .denoise import TvParams, denoise_volume
from .detect import DetectParams, detect_map
from .gmp import PSI_CHOICES, GmpConfig, default_angles, enhance_volume
from .metrics import EvalError, evaluate, load_manifest
from .phantom import PhantomConfig, PhantomError, phantom_set, write_phantoms
from .pipeline import PipelineConfig, PipelineError, RoiParams, run_pipeline
from .roi import RoiRecord, brightest_row_profile, extract_roi, fit_gaussian_1d, row_mean_profile
from .segment import SegmentParams, segment_volume
from .volume import (
    Volume, VolumeFormatError, load_probability_map, load_volume, minmax_normalize,
    parse_hw, resize_volume, save_mask, save_probability_map, save_volume,
)

log = logging.getLogger("gmpfluid")


class UsageError(Exception):
    pass


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _roi_sidecar(path) -> Path:
    path = Path(path)
    return path / "roi.json" if path.suffix.lower() != ".vol" else path.with_suffix(".roi.json")


def _read_roi(path) -> RoiRecord | None:
    side = _roi_sidecar(path)
    return RoiRecord.from_dict(json.loads(side.read_text())) if side.is_file() else None


def _range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None


def _threshold(text: str):
    if text == "otsu":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'otsu', got {text!r}") from None


def _hw(text: str):
    try:
        return parse_hw(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- subcommands --------------------------------------------------------------


def cmd_convert(args) -> int:
    vol = load_volume(args.input)
    if args.resize:
        vol = resize_volume(vol, *args.resize)
    if args.minmax_normalize:
        vol = Volume(minmax_normalize(vol.data), vol.meta)
    save_volume(vol, args.output, bits=args.bits)
    return 0


def cmd_denoise(args) -> int:
    params = TvParams(weight=args.weight, max_iters=args.iters, tol=args.tol, step=args.step)
    vol = load_volume(args.input)
    out, results = denoise_volume(vol, params, args.median, args.threads)
    save_volume(out, args.output)
    stalled = sum(not r.converged for r in results)
    if stalled:
        log.info("%d of %d slices stopped at max_iters", stalled, len(results))
    return 0


def cmd_roi(args) -> int:
    vol = load_volume(args.input)
    profile = brightest_row_profile(vol) if args.profile == "argmax" else row_mean_profile(vol)
    fit = fit_gaussian_1d(profile)
    cropped, record = extract_roi(vol, fit, args.height, args.width)
    save_volume(cropped, args.output)
    _write_json(_roi_sidecar(args.output), record.to_dict())
    if args.emit_fit:
        _write_json(args.emit_fit, fit.to_dict())
    return 0


def _gmp_config(args) -> GmpConfig:
    return GmpConfig(
        delta=args.delta, big_d=args.extent, angles=default_angles(args.angles),
        k_neighbors=args.neighbors, outer_psi=args.psi,
    )


def cmd_enhance(args) -> int:
    config = _gmp_config(args)
    vol = load_volume(args.input)
    if args.emit_ensemble:
        out, ensemble = enhance_volume(vol, config, threads=args.threads, return_ensemble=True)
        root = Path(args.emit_ensemble)
        for theta, stack in zip(config.angles, ensemble):
            save_probability_map(Volume(np.clip(stack, 0, 1), vol.meta), root / f"angle_{theta:06.2f}")
        _write_json(root / "config.json", config.to_dict())
    else:
        out = enhance_volume(vol, config, threads=args.threads)
    save_volume(out, args.output)
    side = _roi_sidecar(args.input)
    if side.is_file():
        _write_json(_roi_sidecar(args.output), json.loads(side.read_text()))
    return 0


def cmd_segment(args) -> int:
    params = SegmentParams(
        threshold=args.threshold, min_area=args.min_area,
        cluster_filter=not args.no_cluster_filter, prob_map=args.prob_map,
    )
    source = load_volume(args.source)
    score = load_probability_map(args.map) if args.prob_map else load_volume(args.map)
    roi = _read_roi(args.map) or _read_roi(args.source)
    mask, comps = segment_volume(score, source, params, roi=roi, threads=args.threads, return_components=True)
    save_mask(mask, args.output)
    if args.emit_components:
        _write_json(args.emit_components, {"components": [c.to_dict() for c in comps]})
    return 0


def cmd_detect(args) -> int:
    params = DetectParams(
        t=args.threshold, k=args.k, score_floor=args.score_floor,
        grad_floor=args.grad_floor, min_run=args.min_run,
    )
    report = detect_map(load_volume(args.map), params)
    _write_json(args.report, {**report.to_dict(), "params": params.to_dict()})
    print("present" if report.volume_present else "absent", f"{report.volume_score:.6f}")
    return 0


def cmd_eval(args) -> int:
    report = evaluate(args.pred, args.truth, load_manifest(args.manifest), args.threads)
    _write_json(args.out, report.to_dict())
    table = report.table()
    if args.table:
        Path(args.table).write_text(table)
    sys.stdout.write(table)
    return 0


def cmd_phantom(args) -> int:
    base = PhantomConfig(
        dims=(args.depth, args.height, args.width), n_pockets=args.pockets,
        pocket_axes_z=tuple(float(v) for v in args.pocket_z), speckle_looks=args.looks,
    )
    configs = phantom_set(args.count, args.seed, base, empty_every=args.empty_every)
    labels = write_phantoms(configs, args.out, groups=args.groups, threads=args.threads, block=max(args.empty_every, 1))
    print(f"wrote {len(labels)} phantoms to {args.out}")
    return 0


def _pipeline_config(args) -> PipelineConfig:
    if args.config:
        cfg = PipelineConfig.loads(Path(args.config).read_text())
    else:
        cfg = PipelineConfig()
    tv, gmp, seg, det = cfg.tv, cfg.gmp, cfg.segment, cfg.detect
    if args.weight is not None:
        tv = replace(tv, weight=args.weight)
    if args.iters is not None:
        tv = replace(tv, max_iters=args.iters)
    if args.psi is not None:
        gmp = replace(gmp, outer_psi=args.psi)
    if args.extent is not None:
        gmp = replace(gmp, big_d=args.extent)
    if args.seg_threshold is not None:
        seg = replace(seg, threshold=args.seg_threshold)
    if args.min_area is not None:
        seg = replace(seg, min_area=args.min_area)
    cfg = replace(cfg, tv=tv, gmp=gmp, segment=seg, detect=det)
    if args.resize is not None:
        cfg = replace(cfg, resize=args.resize)
    if args.median is not None:
        cfg = replace(cfg, median_radius=args.median)
    if args.roi_height is not None or args.roi_width is not None:
        cfg = replace(cfg, roi=RoiParams(args.roi_height or cfg.roi.height, args.roi_width or cfg.roi.width, cfg.roi.profile))
    if args.threads is not None:
        cfg = cfg.with_threads(args.threads)
    return cfg


def cmd_pipeline(args) -> int:
    cfg = _pipeline_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.dumps())
        return 0
    if args.input is None or args.output is None:
        raise UsageError("pipeline needs an input volume and an output directory")
    manifest = run_pipeline(args.input, cfg, args.output, keep_intermediates=args.keep_intermediates)
    print(f"{manifest['volume_id']}: {'present' if manifest['volume_present'] else 'absent'} "
          f"score={manifest['volume_score']:.6f} voxels={manifest['mask_voxels']} "
          f"in {manifest['total_seconds']:.2f}s")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmp", description="GMP fluid enhancement, segmentation and detection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: $GMP_THREADS or CPU count)")
        return sp

    sp = add("convert", cmd_convert, "convert, resize or normalize a volume")
    sp.add_argument("input")
    sp.add_argument("output", help="PGM directory or .vol file")
    sp.add_argument("--resize", type=_hw, metavar="HxW")
    sp.add_argument("--minmax-normalize", action="store_true")
    sp.add_argument("--bits", type=int, choices=(8, 16), default=16)

    base = TvParams()
    sp = add("denoise", cmd_denoise, "total-variation denoising per slice")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--weight", type=float, default=base.weight)
    sp.add_argument("--iters", type=int, default=base.max_iters)
    sp.add_argument("--tol", type=float, default=base.tol)
    sp.add_argument("--step", type=float, default=base.step)
    sp.add_argument("--median", type=int, default=0, metavar="R", help="median prefilter radius")

    sp = add("roi", cmd_roi, "crop the band around the brightest rows")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--height", type=int, default=256)
    sp.add_argument("--width", type=int, default=256)
    sp.add_argument("--profile", choices=("argmax", "rowmean"), default="argmax")
    sp.add_argument("--emit-fit", metavar="FIT_JSON")

    g = GmpConfig()
    sp = add("enhance", cmd_enhance, "GMP enhancement")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--delta", type=float, default=g.delta)
    sp.add_argument("--extent", type=float, default=g.big_d, help="D, translation extent")
    sp.add_argument("--angles", type=int, default=len(g.angles), help="number of angles over [0, 180)")
    sp.add_argument("--neighbors", type=int, default=g.k_neighbors)
    sp.add_argument("--psi", choices=PSI_CHOICES, default=g.outer_psi)
    sp.add_argument("--emit-ensemble", metavar="DIR")

    s = SegmentParams()
    sp = add("segment", cmd_segment, "threshold and clean a fluid map")
    sp.add_argument("map")
    sp.add_argument("output", help="mask directory")
    sp.add_argument("--source", required=True, help="volume supplying intensities for clustering")
    sp.add_argument("--prob-map", action="store_true", help="map is a 16-bit fluid probability map")
    sp.add_argument("--threshold", type=_threshold, default=s.threshold)
    sp.add_argument("--min-area", type=int, default=s.min_area)
    sp.add_argument("--no-cluster-filter", action="store_true")
    sp.add_argument("--emit-components", metavar="COMPS_JSON")

    d = DetectParams()
    sp = add("detect", cmd_detect, "volume-level fluid presence")
    sp.add_argument("map")
    sp.add_argument("--report", required=True)
    sp.add_argument("--threshold", type=float, default=d.t)
    sp.add_argument("--k", type=int, default=d.k)
    sp.add_argument("--score-floor", type=float, default=d.score_floor)
    sp.add_argument("--grad-floor", type=float, default=d.grad_floor)
    sp.add_argument("--min-run", type=int, default=d.min_run)

    sp = add("eval", cmd_eval, "Dice and AUC against ground truth")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--manifest", required=True, help="labels.json mapping volume ids to group and label")
    sp.add_argument("--out", required=True)
    sp.add_argument("--table")

    ph = PhantomConfig()
    sp = add("phantom", cmd_phantom, "generate synthetic phantoms")
    sp.add_argument("--out", required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--pockets", type=_range, default=ph.n_pockets, metavar="A..B")
    sp.add_argument("--pocket-z", type=_range, default=ph.pocket_axes_z, metavar="A..B", help="pocket semi-axis range in slices")
    sp.add_argument("--looks", type=float, default=ph.speckle_looks)
    sp.add_argument("--depth", type=int, default=ph.dims[0])
    sp.add_argument("--height", type=int, default=ph.dims[1])
    sp.add_argument("--width", type=int, default=ph.dims[2])
    sp.add_argument("--empty-every", type=int, default=0, metavar="M", help="every M-th phantom has no pockets")
    sp.add_argument("--groups", type=int, default=1)

    sp = add("pipeline", cmd_pipeline, "run every stage on one volume")
    sp.add_argument("input", nargs="?")
    sp.add_argument("output", nargs="?", help="output directory")
    sp.add_argument("--config", help="pipeline config JSON")
    sp.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    sp.add_argument("--keep-intermediates", action="store_true")
    sp.add_argument("--resize", type=_hw, metavar="HxW")
    sp.add_argument("--weight", type=float)
    sp.add_argument("--iters", type=int)
    sp.add_argument("--median", type=int)
    sp.add_argument("--roi-height", type=int)
    sp.add_argument("--roi-width", type=int)
    sp.add_argument("--psi", choices=PSI_CHOICES)
    sp.add_argument("--extent", type=float)
    sp.add_argument("--seg-threshold", type=_threshold)
    sp.add_argument("--min-area", type=int)
    return p


_IO_ERRORS = (OSError, VolumeFormatError, json.JSONDecodeError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if exc.stage in ("load", "write") else 1
    except (UsageError, EvalError, PhantomError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # parameter validation failures are usage errors
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
