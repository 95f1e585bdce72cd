"""Generalized Motion Pattern enhancement and classical fluid segmentation for volumetric scans."""

from .denoise import TvParams, TvResult, denoise_volume, median_filter, rof_energy, tv_denoise
from .detect import DetectionReport, DetectParams, detect_map, detect_volume, score_gradient, slice_score
from .gmp import GmpConfig, GmpEnsemble, build_ensemble, coalesce_ensemble, enhance_volume, gmp_single_angle, translate_image
from .metrics import EvalReport, dice, evaluate, roc_auc
from .phantom import PhantomConfig, generate
from .pipeline import PipelineConfig, PipelineError, process_volume, run_pipeline
from .roi import GaussianFit, RoiRecord, RowProfile, brightest_row_profile, extract_roi, fit_gaussian_1d
from .segment import Component, SegmentationMask, SegmentParams, connected_components, segment_volume
from .volume import Volume, load_mask, load_probability_map, load_volume, resize_slice, save_mask, save_volume

__version__ = "0.1.0"

__all__ = [
    "Component", "DetectParams", "DetectionReport", "EvalReport", "GaussianFit", "GmpConfig",
    "GmpEnsemble", "PhantomConfig", "PipelineConfig", "PipelineError", "RoiRecord", "RowProfile",
    "SegmentParams", "SegmentationMask", "TvParams", "TvResult", "Volume", "brightest_row_profile",
    "build_ensemble", "coalesce_ensemble", "connected_components", "denoise_volume", "detect_map",
    "detect_volume", "dice", "enhance_volume", "evaluate", "extract_roi", "fit_gaussian_1d", "generate",
    "gmp_single_angle", "load_mask", "load_probability_map", "load_volume", "median_filter",
    "process_volume", "resize_slice", "roc_auc", "rof_energy", "run_pipeline", "save_mask",
    "save_volume", "score_gradient", "segment_volume", "slice_score", "tv_denoise", "translate_image",
]
