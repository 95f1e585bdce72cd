"""Generalized Motion Pattern (GMP) images.

For a direction ``theta`` an image is translated by ``j * delta`` pixels
along ``(cos theta, sin theta)`` for ``j = -D/delta .. D/delta`` (the
untranslated image is the ``j = 0`` member), and the stack is reduced
pixelwise with ``min``: dark compact structures survive while the
brighter surroundings are pulled down only where they meet something
darker. Repeating this over several directions gives an ensemble of K
images that a second reduction (``psi``: min, mean or max) combines into
the enhanced slice. Neighbouring slices (``k`` on each side, clamped at
the volume ends) join the stack before the inner reduction.

Coordinates: ``dx`` moves content along columns (x), ``dy`` along rows
(y). Sub-pixel shifts use bilinear sampling with replicate borders.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .parallel import chunk_ranges, ordered_map, resolve_threads
from .volume import Volume

PSI_CHOICES = ("min", "mean", "max")
_SNAP = 1e-9


def default_angles(count: int = 8) -> tuple[float, ...]:
    """``count`` directions evenly spaced over [0, 180) degrees."""
    if count < 1:
        raise ValueError("need at least one angle")
    return tuple(i * 180.0 / count for i in range(count))


@dataclass(frozen=True)
class GmpConfig:
    delta: float = 1.0
    big_d: float = 5.0
    angles: tuple[float, ...] = field(default_factory=default_angles)
    k_neighbors: int = 1
    inner_f: str = "min"
    outer_psi: str = "max"
    border: str = "replicate"

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.big_d < 0:
            raise ValueError("big_d must be >= 0")
        ratio = self.big_d / self.delta
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("big_d must be an integer multiple of delta")
        if not self.angles:
            raise ValueError("angles must be non-empty")
        if any(not 0.0 <= a < 180.0 for a in self.angles):
            raise ValueError("angles must lie in [0, 180)")
        if len(set(self.angles)) != len(self.angles):
            raise ValueError("angles must be distinct")
        if self.k_neighbors < 0:
            raise ValueError("k_neighbors must be >= 0")
        if self.inner_f != "min":
            raise ValueError("only min is supported as the translation coalescer")
        if self.outer_psi not in PSI_CHOICES:
            raise ValueError(f"outer_psi must be one of {PSI_CHOICES}")
        if self.border != "replicate":
            raise ValueError("only replicate borders are supported")

    @property
    def steps(self) -> int:
        return int(round(self.big_d / self.delta))

    @property
    def stack_size(self) -> int:
        """Translated images per angle per slice, ``2 D / delta + 1``."""
        return 2 * self.steps + 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["angles"] = list(self.angles)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GmpConfig":
        d = dict(d)
        if "angles" in d:
            d["angles"] = tuple(d["angles"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def offsets(self, theta: float) -> tuple[np.ndarray, np.ndarray]:
        """(dx, dy) for every member of the translation stack at ``theta`` degrees."""
        rad = math.radians(theta)
        j = np.arange(-self.steps, self.steps + 1, dtype=np.float64)
        dxs = np.array([_snap(v) for v in j * self.delta * math.cos(rad)])
        dys = np.array([_snap(v) for v in j * self.delta * math.sin(rad)])
        return dxs, dys


def _snap(v: float) -> float:
    # cos(90 deg) is 6e-17, not 0; keep axis-aligned shifts exact
    r = round(v)
    return float(r) if abs(v - r) < _SNAP else float(v)


@dataclass(frozen=True)
class GmpEnsemble:
    per_angle: tuple[np.ndarray, ...]
    slice_index: int
    config_digest: str

    def __len__(self):
        return len(self.per_angle)


def translate_image(img, dx: float, dy: float) -> np.ndarray:
    """Sample ``img`` at ``(x - dx, y - dy)``: bilinear, replicate border."""
    img = np.asarray(img, dtype=np.float64)
    if not (math.isfinite(dx) and math.isfinite(dy)):
        raise ValueError("offsets must be finite")
    h, w = img.shape
    dx, dy = _snap(dx), _snap(dy)
    sx = np.arange(w, dtype=np.float64) - dx
    x0 = np.floor(sx)
    fx = sx - x0
    ix0 = np.clip(x0.astype(np.intp), 0, w - 1)
    ix1 = np.clip(x0.astype(np.intp) + 1, 0, w - 1)
    a = img[:, ix0]
    rows = a + fx * (img[:, ix1] - a)
    sy = np.arange(h, dtype=np.float64) - dy
    y0 = np.floor(sy)
    fy = (sy - y0)[:, None]
    iy0 = np.clip(y0.astype(np.intp), 0, h - 1)
    iy1 = np.clip(y0.astype(np.intp) + 1, 0, h - 1)
    top = rows[iy0]
    return top + fy * (rows[iy1] - top)


def _slice_gmp(img: np.ndarray, dxs: np.ndarray, dys: np.ndarray) -> np.ndarray:
    out = np.full(img.shape, np.inf)
    _kernels.min_translated(np.ascontiguousarray(img, dtype=np.float64), dxs, dys, out)
    return out


def gmp_single_angle(slices, theta: float, config: GmpConfig) -> np.ndarray:
    """Pixelwise min over every slice translated by every stack offset at ``theta``."""
    slices = [np.asarray(s, dtype=np.float64) for s in slices]
    if not slices:
        raise ValueError("need at least one slice")
    if float(theta) not in config.angles:
        raise ValueError(f"angle {theta} is not in the configured angle set")
    dxs, dys = config.offsets(theta)
    out = np.full(slices[0].shape, np.inf)
    for s in slices:
        if s.shape != out.shape:
            raise ValueError("all slices must share dimensions")
        _kernels.min_translated(np.ascontiguousarray(s), dxs, dys, out)
    return out


def neighbour_indices(index: int, depth: int, k: int) -> list[int]:
    return [min(max(i, 0), depth - 1) for i in range(index - k, index + k + 1)]


def build_ensemble(volume: Volume, slice_index: int, config: GmpConfig) -> GmpEnsemble:
    if not 0 <= slice_index < volume.depth:
        raise IndexError(f"slice index {slice_index} outside volume of depth {volume.depth}")
    idx = sorted(set(neighbour_indices(slice_index, volume.depth, config.k_neighbors)))
    stack = [volume[i] for i in idx]
    per_angle = tuple(gmp_single_angle(stack, a, config) for a in config.angles)
    return GmpEnsemble(per_angle, slice_index, config.digest())


def _reduce(images, psi: str) -> np.ndarray:
    # fixed left-to-right order keeps the result schedule independent
    it = iter(images)
    acc = np.array(next(it), dtype=np.float64, copy=True)
    n = 1
    for img in it:
        if psi == "min":
            np.minimum(acc, img, out=acc)
        elif psi == "max":
            np.maximum(acc, img, out=acc)
        else:
            acc += img
        n += 1
    if psi == "mean":
        acc /= n
    return acc


def coalesce_ensemble(ensemble: GmpEnsemble, psi: str = "min") -> np.ndarray:
    if psi not in PSI_CHOICES:
        raise ValueError(f"psi must be one of {PSI_CHOICES}")
    if not ensemble.per_angle:
        raise ValueError("empty ensemble")
    return _reduce(ensemble.per_angle, psi)


def _enhance_chunk(data: np.ndarray, rows: range, config: GmpConfig, psi: str, keep: bool):
    depth = data.shape[0]
    k = config.k_neighbors
    need = sorted({j for i in rows for j in neighbour_indices(i, depth, k)})
    out = np.empty((len(rows), *data.shape[1:]))
    per_angle = np.empty((len(config.angles), len(rows), *data.shape[1:])) if keep else None
    acc = None
    for a_i, theta in enumerate(config.angles):
        dxs, dys = config.offsets(theta)
        single = {j: _slice_gmp(data[j], dxs, dys) for j in need}
        cur = np.empty_like(out)
        for r, i in enumerate(rows):
            nb = neighbour_indices(i, depth, k)
            m = single[nb[0]].copy()
            for j in nb[1:]:
                np.minimum(m, single[j], out=m)
            cur[r] = m
        if keep:
            per_angle[a_i] = cur
        if acc is None:
            acc = cur
        elif psi == "min":
            np.minimum(acc, cur, out=acc)
        elif psi == "max":
            np.maximum(acc, cur, out=acc)
        else:
            acc += cur
    if psi == "mean":
        acc /= len(config.angles)
    out[:] = acc
    return out, per_angle


def enhance_volume(
    volume: Volume,
    config: GmpConfig = GmpConfig(),
    psi: str | None = None,
    threads: int | None = None,
    return_ensemble: bool = False,
):
    """Apply the GMP ensemble and ``psi`` reduction to every slice.

    Work is split into contiguous slice chunks run on a thread pool; each
    output slice is computed by the same arithmetic regardless of the
    split, so the result is bit-identical for any ``threads``. With
    ``return_ensemble`` the per-angle images are returned as a
    ``(K, depth, height, width)`` array alongside the enhanced volume.
    """
    psi = config.outer_psi if psi is None else psi
    if psi not in PSI_CHOICES:
        raise ValueError(f"psi must be one of {PSI_CHOICES}")
    n_threads = resolve_threads(threads)
    data = volume.data
    # one chunk per worker: chunk edges recompute their neighbour slices, so fewer is cheaper
    chunks = chunk_ranges(volume.depth, n_threads)
    parts = ordered_map(lambda rows: _enhance_chunk(data, rows, config, psi, return_ensemble), chunks, n_threads)
    enhanced = np.concatenate([p[0] for p in parts])
    result = Volume(np.clip(enhanced, 0.0, 1.0), volume.meta)
    if return_ensemble:
        return result, np.concatenate([p[1] for p in parts], axis=1)
    return result
