"""Locate the bright tissue band and crop a fixed-size region around it.

Every column of every slice votes for the row holding its brightest
pixel. A 1-D Gaussian fitted to the pooled vote histogram gives the band
position, and a ``roi_height x roi_width`` block centred on it is cut out.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .volume import Volume

SIGMA_FLOOR = 0.5


@dataclass(frozen=True)
class RowProfile:
    counts: np.ndarray
    total: float

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise ValueError("profile counts must be non-negative")


@dataclass(frozen=True)
class GaussianFit:
    mean: float
    sigma: float
    amplitude: float
    residual: float
    fallback: bool = False
    iterations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RoiRecord:
    row_offset: int
    col_offset: int
    roi_height: int
    roi_width: int
    source_dims: tuple[int, int]

    def __post_init__(self):
        h, w = self.source_dims
        if self.row_offset < 0 or self.row_offset + self.roi_height > h:
            raise ValueError("ROI rows exceed the source height")
        if self.col_offset < 0 or self.col_offset + self.roi_width > w:
            raise ValueError("ROI columns exceed the source width")

    def to_source(self, row, col):
        """Map ROI pixel coordinates back to source coordinates."""
        return row + self.row_offset, col + self.col_offset

    def paste(self, roi_data: np.ndarray, fill=0) -> np.ndarray:
        """Embed ``(depth, roi_h, roi_w)`` data into a source-sized array."""
        roi_data = np.asarray(roi_data)
        out = np.full((roi_data.shape[0], *self.source_dims), fill, dtype=roi_data.dtype)
        out[:, self.row_offset:self.row_offset + self.roi_height,
            self.col_offset:self.col_offset + self.roi_width] = roi_data
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["source_dims"] = list(self.source_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RoiRecord":
        return cls(
            int(d["row_offset"]), int(d["col_offset"]), int(d["roi_height"]),
            int(d["roi_width"]), tuple(int(v) for v in d["source_dims"]),
        )


def brightest_row_profile(volume: Volume) -> RowProfile:
    """Histogram of per-column argmax rows, pooled over all slices.

    ``np.argmax`` returns the first maximum, so ties go to the smallest row.
    """
    winners = np.argmax(volume.data, axis=1)
    counts = np.bincount(winners.ravel(), minlength=volume.height).astype(np.float64)
    return RowProfile(counts, float(winners.size))


def row_mean_profile(volume: Volume) -> RowProfile:
    """Mean intensity of each row over all slices and columns."""
    counts = volume.data.mean(axis=(0, 2))
    return RowProfile(counts, float(counts.sum()))


def _gauss(x, amp, mu, sigma):
    return amp * np.exp(-((x - mu) ** 2) / (2.0 * sigma * sigma))


def gaussian_residual(counts, amp, mu, sigma) -> float:
    x = np.arange(len(counts), dtype=np.float64)
    r = _gauss(x, amp, mu, sigma) - counts
    return float(r @ r)


def fit_gaussian_1d(profile: RowProfile, max_iters: int = 50, sigma_floor: float = SIGMA_FLOOR) -> GaussianFit:
    """Least-squares fit of ``A exp(-(x-mu)^2 / (2 sigma^2))`` to the profile.

    Starts from the moments of the profile and refines with Gauss-Newton,
    halving any step that fails to lower the residual. If refinement ends
    above the starting residual the moment estimate is returned with
    ``fallback=True``.
    """
    y = np.asarray(profile.counts, dtype=np.float64)
    mass = y.sum()
    if profile.total <= 0 or mass <= 0:
        raise ValueError("cannot fit a Gaussian to an all-zero profile")
    n = len(y)
    x = np.arange(n, dtype=np.float64)
    mu0 = float((x * y).sum() / mass)
    sigma0 = max(math.sqrt(float(((x - mu0) ** 2 * y).sum() / mass)), sigma_floor)
    amp0 = float(y.max())
    res0 = gaussian_residual(y, amp0, mu0, sigma0)

    theta = np.array([amp0, mu0, sigma0])
    res = res0
    it = 0
    for it in range(1, max_iters + 1):
        amp, mu, sigma = theta
        e = np.exp(-((x - mu) ** 2) / (2.0 * sigma * sigma))
        model = amp * e
        jac = np.column_stack([e, model * (x - mu) / sigma**2, model * (x - mu) ** 2 / sigma**3])
        delta, *_ = np.linalg.lstsq(jac, y - model, rcond=None)
        step = 1.0
        accepted = False
        while step > 1e-6:
            cand = theta + step * delta
            cand[2] = max(cand[2], sigma_floor)
            if cand[0] > 0:
                r = gaussian_residual(y, *cand)
                if r < res:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break
        done = res - r <= 1e-12 * max(res, 1e-300)
        theta, res = cand, r
        if done:
            break

    amp, mu, sigma = (float(v) for v in theta)
    if not res <= res0 or not np.isfinite(res):
        return GaussianFit(float(np.clip(mu0, 0, n - 1)), sigma0, amp0, res0, True, it)
    return GaussianFit(float(np.clip(mu, 0, n - 1)), sigma, amp, res, False, it)


def extract_roi(volume: Volume, fit: GaussianFit, roi_height: int = 256, roi_width: int = 256):
    """Crop ``roi_height`` rows centred on the fitted mean and centre-crop the columns.

    The row band is shifted to stay inside the volume. Returns the cropped
    volume and the :class:`RoiRecord` needed to map results back.
    """
    h, w = volume.height, volume.width
    if roi_height > h or roi_width > w:
        raise ValueError(f"ROI {roi_height}x{roi_width} larger than volume {h}x{w}")
    if roi_height < 1 or roi_width < 1:
        raise ValueError("ROI dimensions must be positive")
    centre = math.floor(fit.mean + 0.5)
    top = min(max(centre - roi_height // 2, 0), h - roi_height)
    left = (w - roi_width) // 2
    record = RoiRecord(top, left, roi_height, roi_width, (h, w))
    cropped = volume.data[:, top:top + roi_height, left:left + roi_width]
    return Volume(cropped, volume.meta), record
