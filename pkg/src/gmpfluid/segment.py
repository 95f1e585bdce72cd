"""Binary fluid masks from enhanced volumes or probability maps.

Pipeline: score map -> threshold -> per-slice 8-connected components ->
drop small components -> keep the darker of two intensity clusters ->
reassemble the mask. Every stage only removes foreground.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .parallel import ordered_map
from .roi import RoiRecord
from .volume import Volume

_EIGHT = np.ones((3, 3), dtype=bool)
_SAME = 1e-12


@dataclass(frozen=True)
class SegmentationMask:
    data: np.ndarray
    roi: RoiRecord | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[np.newaxis]
        if data.ndim != 3:
            raise ValueError("mask needs shape (depth, height, width)")
        if data.dtype != bool:
            if not np.isin(data, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")
            data = data.astype(bool)
        if self.roi is not None and data.shape[1:] != (self.roi.roi_height, self.roi.roi_width):
            raise ValueError("mask dimensions do not match its ROI record")
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    def count(self) -> int:
        return int(self.data.sum())

    def to_source(self) -> np.ndarray:
        """Mask in the coordinates of the volume the ROI was cut from."""
        return self.data if self.roi is None else self.roi.paste(self.data, fill=False)


@dataclass
class Component:
    label: int
    pixel_count: int
    slice_index: int
    mean_source_intensity: float
    bounding_box: tuple[int, int, int, int]  # row, col, height, width
    pixels: np.ndarray = field(repr=False, compare=False)  # flat indices within the slice
    retained: bool = True
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "slice_index": self.slice_index,
            "pixel_count": self.pixel_count,
            "mean_source_intensity": self.mean_source_intensity,
            "bounding_box": list(self.bounding_box),
            "retained": self.retained,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class SegmentParams:
    threshold: float | str = 0.5
    min_area: int = 10
    cluster_filter: bool = True
    prob_map: bool = False

    def __post_init__(self):
        if isinstance(self.threshold, str):
            if self.threshold != "otsu":
                raise ValueError("threshold must be a number in [0, 1] or 'otsu'")
        elif not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.min_area < 0:
            raise ValueError("min_area must be >= 0")


def fluid_score_map(enhanced: Volume) -> Volume:
    """Fluid is dark, so the score is the complement of the enhanced intensity."""
    return Volume(1.0 - enhanced.data, enhanced.meta)


def otsu_threshold(values, bins: int = 256) -> float:
    """Otsu's threshold on [0, 1]; pixels strictly above it form the foreground."""
    hist, edges = np.histogram(np.asarray(values, dtype=np.float64).ravel(), bins=bins, range=(0.0, 1.0))
    p = hist.astype(np.float64)
    total = p.sum()
    if total == 0:
        return 0.5
    centres = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(p)[:-1]
    w1 = total - w0
    s0 = np.cumsum(p * centres)[:-1]
    mu0 = np.divide(s0, w0, out=np.zeros_like(s0), where=w0 > 0)
    mu1 = np.divide(s0[-1] + p[-1] * centres[-1] - s0, w1, out=np.zeros_like(s0), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return float(edges[1 + int(np.argmax(between))])


def threshold_map(score: Volume, t: float | str = 0.5) -> SegmentationMask:
    if t == "otsu":
        t = otsu_threshold(score.data)
    elif not 0.0 <= float(t) <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return SegmentationMask(score.data > float(t))


def connected_components(mask_slice, source_slice=None, slice_index: int = 0) -> list[Component]:
    """8-connected components, labelled 1.. in row-major order of their first pixel."""
    mask_slice = np.asarray(mask_slice, dtype=bool)
    if source_slice is None:
        source_slice = np.zeros(mask_slice.shape)
    labels, n = ndimage.label(mask_slice, structure=_EIGHT)
    if n == 0:
        return []
    flat = labels.ravel()
    fg = np.flatnonzero(flat)
    lab = flat[fg]
    # reorder labels by first occurrence in raster order
    uniq, first = np.unique(lab, return_index=True)
    order = uniq[np.argsort(first)]
    counts = np.bincount(lab, minlength=n + 1)
    sums = np.bincount(lab, weights=np.asarray(source_slice, dtype=np.float64).ravel()[fg], minlength=n + 1)
    groups = np.split(fg[np.argsort(lab, kind="stable")], np.cumsum(counts[1:])[:-1])
    boxes = ndimage.find_objects(labels)
    comps = []
    for new_label, old in enumerate(order, start=1):
        sl = boxes[old - 1]
        comps.append(Component(
            label=new_label,
            pixel_count=int(counts[old]),
            slice_index=slice_index,
            mean_source_intensity=float(sums[old] / counts[old]),
            bounding_box=(sl[0].start, sl[1].start, sl[0].stop - sl[0].start, sl[1].stop - sl[1].start),
            pixels=groups[old - 1],
        ))
    return comps


def filter_small_components(components, min_area: int) -> list[Component]:
    if min_area < 0:
        raise ValueError("min_area must be >= 0")
    return [c for c in components if c.pixel_count >= min_area]


def two_means_split(values) -> float | None:
    """Boundary of the optimal 1-D 2-means partition, or None if all values agree.

    Values ``<= boundary`` form the lower cluster. The split minimising the
    total within-cluster sum of squares is found exactly over the sorted values.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    # means of equal intensities can differ in the last bits; treat as one value
    if len(v) < 2 or v[-1] - v[0] <= _SAME * max(1.0, abs(v[-1])):
        return None
    n = len(v)
    cs = np.cumsum(v)
    cs2 = np.cumsum(v * v)
    # candidate splits only between distinct values
    cut = np.flatnonzero(np.diff(v) > 0) + 1
    left_n = cut.astype(np.float64)
    right_n = n - left_n
    left_s, left_s2 = cs[cut - 1], cs2[cut - 1]
    right_s, right_s2 = cs[-1] - left_s, cs2[-1] - left_s2
    sse = (left_s2 - left_s**2 / left_n) + (right_s2 - right_s**2 / right_n)
    best = cut[int(np.argmin(sse))]
    return float(v[best - 1])


def intensity_cluster_filter(components, k: int = 2) -> list[Component]:
    """Split components into two intensity clusters and keep the darker one."""
    if k != 2:
        raise ValueError("only k=2 clustering is supported")
    components = list(components)
    if not components:
        return []
    boundary = two_means_split([c.mean_source_intensity for c in components])
    if boundary is None:
        return components
    return [c for c in components if c.mean_source_intensity <= boundary]


def _slice_components(args):
    i, mask_slice, source_slice = args
    return connected_components(mask_slice, source_slice, i)


def segment_volume(
    enhanced_or_prob: Volume,
    source: Volume,
    params: SegmentParams = SegmentParams(),
    roi: RoiRecord | None = None,
    threads: int | None = None,
    return_components: bool = False,
):
    """Threshold, clean and reassemble a fluid mask.

    ``source`` supplies the intensities used for clustering. With
    ``params.prob_map`` the input is used as a fluid probability directly;
    otherwise it is an enhanced volume and dark means fluid.
    """
    if enhanced_or_prob.shape != source.shape:
        raise ValueError(f"map {enhanced_or_prob.shape} and source {source.shape} differ in shape")
    score = enhanced_or_prob if params.prob_map else fluid_score_map(enhanced_or_prob)
    raw = threshold_map(score, params.threshold)
    per_slice = ordered_map(
        _slice_components, [(i, raw.data[i], source[i]) for i in range(source.depth)], threads
    )
    comps = [c for cs in per_slice for c in cs]
    kept = filter_small_components(comps, params.min_area)
    kept_ids = {id(c) for c in kept}
    for c in comps:
        if id(c) not in kept_ids:
            c.retained, c.reason = False, "small"
    if params.cluster_filter and kept:
        dark = intensity_cluster_filter(kept)
        dark_ids = {id(c) for c in dark}
        for c in kept:
            if id(c) not in dark_ids:
                c.retained, c.reason = False, "bright-cluster"
        kept = dark
    out = np.zeros(source.shape, dtype=bool)
    h, w = source.height, source.width
    for c in kept:
        out[c.slice_index].reshape(h * w)[c.pixels] = True
    mask = SegmentationMask(out, roi)
    return (mask, comps) if return_components else mask
