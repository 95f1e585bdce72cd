"""End-to-end run: load, denoise, resize, ROI, enhance, segment, detect.

Every stage is a barrier; parallelism lives inside stages and is bounded
by one thread count. ``PipelineConfig`` has a single canonical JSON form
and its digest identifies a run.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .denoise import TvParams, denoise_volume
from .detect import DetectionReport, DetectParams, detect_map
from .gmp import GmpConfig, enhance_volume
from .parallel import resolve_threads
from .roi import RoiRecord, brightest_row_profile, extract_roi, fit_gaussian_1d, row_mean_profile
from .segment import SegmentationMask, SegmentParams, segment_volume
from .volume import (
    Volume, load_volume, resize_slice, resize_volume, save_mask,
    save_probability_map, save_volume, volume_id,
)

STAGES = ("load", "denoise", "resize", "roi", "enhance", "segment", "detect")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, vid: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed for volume {vid!r}: {cause}")
        self.stage = stage
        self.volume_id = vid
        self.cause = cause


@dataclass(frozen=True)
class RoiParams:
    height: int = 256
    width: int = 256
    profile: str = "argmax"

    def __post_init__(self):
        if self.profile not in ("argmax", "rowmean"):
            raise ValueError("profile must be 'argmax' or 'rowmean'")


@dataclass(frozen=True)
class PipelineConfig:
    resize: tuple[int, int] = (512, 256)  # height, width
    tv: TvParams = field(default_factory=TvParams)
    median_radius: int = 0
    roi: RoiParams = field(default_factory=RoiParams)
    gmp: GmpConfig = field(default_factory=GmpConfig)
    segment: SegmentParams = field(default_factory=SegmentParams)
    detect: DetectParams = field(default_factory=DetectParams)
    threads: int | None = None

    def to_dict(self) -> dict:
        return {
            "resize": list(self.resize),
            "tv": vars(self.tv).copy(),
            "median_radius": self.median_radius,
            "roi": vars(self.roi).copy(),
            "gmp": self.gmp.to_dict(),
            "segment": vars(self.segment).copy(),
            "detect": self.detect.to_dict(),
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {"resize", "tv", "median_radius", "roi", "gmp", "segment", "detect", "threads"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {', '.join(sorted(extra))}")
        base = cls()
        return cls(
            resize=tuple(d.get("resize", base.resize)),
            tv=TvParams(**d.get("tv", {})),
            median_radius=int(d.get("median_radius", 0)),
            roi=RoiParams(**d.get("roi", {})),
            gmp=GmpConfig.from_dict(d.get("gmp", {})),
            segment=SegmentParams(**d.get("segment", {})),
            detect=DetectParams.from_dict(d.get("detect", {})),
            threads=d.get("threads"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PipelineConfig":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        # thread count never changes results, so it is not part of the identity
        d = self.to_dict()
        d.pop("threads")
        return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()

    def with_threads(self, threads) -> "PipelineConfig":
        return replace(self, threads=threads)


@dataclass
class PipelineResult:
    volume_id: str
    mask_roi: SegmentationMask
    mask_source: SegmentationMask
    report: DetectionReport
    roi: RoiRecord
    timings: dict[str, float]
    stages: dict[str, object] = field(default_factory=dict)


def mask_to_source(mask: SegmentationMask, source_hw: tuple[int, int]) -> SegmentationMask:
    """Undo ROI cropping and resizing; resampled masks are cut at 0.5."""
    full = mask.to_source()
    h, w = source_hw
    if full.shape[1:] == (h, w):
        return SegmentationMask(full)
    return SegmentationMask(np.stack([resize_slice(s.astype(np.float64), h, w) >= 0.5 for s in full]))


def process_volume(volume: Volume, config: PipelineConfig = PipelineConfig(), vid: str = "",
                   keep_stages: bool = False) -> PipelineResult:
    vid = vid or volume_id(volume.meta or "volume")
    threads = resolve_threads(config.threads)
    timings: dict[str, float] = {}
    stages: dict[str, object] = {}
    stage = "denoise"

    def tick(name, start):
        timings[name] = time.perf_counter() - start

    try:
        t0 = time.perf_counter()
        den, _ = denoise_volume(volume, config.tv, config.median_radius, threads)
        tick("denoise", t0)

        stage, t0 = "resize", time.perf_counter()
        resized = resize_volume(den, *config.resize)
        tick("resize", t0)

        stage, t0 = "roi", time.perf_counter()
        profile = brightest_row_profile(resized) if config.roi.profile == "argmax" else row_mean_profile(resized)
        fit = fit_gaussian_1d(profile)
        roi_vol, record = extract_roi(resized, fit, config.roi.height, config.roi.width)
        tick("roi", t0)

        stage, t0 = "enhance", time.perf_counter()
        enhanced = enhance_volume(roi_vol, config.gmp, threads=threads)
        tick("enhance", t0)

        stage, t0 = "segment", time.perf_counter()
        mask = segment_volume(enhanced, roi_vol, config.segment, roi=record, threads=threads)
        source_mask = mask_to_source(mask, (volume.height, volume.width))
        tick("segment", t0)

        stage, t0 = "detect", time.perf_counter()
        report = detect_map(Volume(mask.data.astype(np.float64)), config.detect)
        tick("detect", t0)
    except Exception as exc:  # surface with stage context
        raise PipelineError(stage, vid, exc) from exc

    if keep_stages:
        stages = {"denoised": den, "resized": resized, "roi": roi_vol, "enhanced": enhanced, "fit": fit}
    return PipelineResult(vid, mask, source_mask, report, record, timings, stages)


def run_pipeline(input_path, config: PipelineConfig, out_dir, keep_intermediates: bool = False) -> dict:
    """Run one volume from disk and write its artifacts; returns the manifest."""
    start = time.perf_counter()
    vid = volume_id(input_path)
    t0 = time.perf_counter()
    try:
        volume = load_volume(input_path)
    except Exception as exc:
        raise PipelineError("load", vid, exc) from exc
    load_time = time.perf_counter() - t0

    result = process_volume(volume, config, vid, keep_stages=keep_intermediates)
    out = Path(out_dir)
    t0 = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        # thread count lives in the manifest so artifacts match across thread counts
        (out / "config.json").write_text(config.with_threads(None).dumps())
        save_mask(result.mask_source, out / "mask")
        save_mask(result.mask_roi, out / "mask_roi")
        (out / "report.json").write_text(json.dumps(result.report.to_dict(), indent=2, sort_keys=True) + "\n")
        if keep_intermediates:
            st = result.stages
            save_volume(st["denoised"], out / "intermediate" / "denoised.vol")
            save_volume(st["resized"], out / "intermediate" / "resized.vol")
            save_volume(st["roi"], out / "intermediate" / "roi.vol")
            save_probability_map(st["enhanced"], out / "intermediate" / "enhanced")
            (out / "intermediate" / "fit.json").write_text(json.dumps(st["fit"].to_dict(), indent=2, sort_keys=True) + "\n")
    except Exception as exc:
        raise PipelineError("write", vid, exc) from exc
    write_time = time.perf_counter() - t0

    timings = {"load": load_time, **result.timings, "write": write_time}
    manifest = {
        "volume_id": vid,
        "input": str(input_path),
        "config_digest": config.digest(),
        "threads": resolve_threads(config.threads),
        "timings": timings,
        "total_seconds": time.perf_counter() - start,
        "volume_present": result.report.volume_present,
        "volume_score": result.report.volume_score,
        "mask_voxels": result.mask_source.count(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
