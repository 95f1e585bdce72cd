"""Volume-level fluid presence from per-slice scores.

Each slice gets a score (fraction of pixels above ``t``). Slices above
``score_floor`` are flagged, flags are smoothed by a majority vote over
``2k + 1`` neighbouring slices, and the volume is positive when some run of
at least ``min_run`` consecutive slices survives. The slice-to-slice score
gradient marks where fluid appears or disappears; those transition slices
are reported alongside the decision.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .volume import Volume


@dataclass(frozen=True)
class DetectParams:
    t: float = 0.5
    k: int = 1
    score_floor: float = 0.02
    grad_floor: float = 0.01
    min_run: int = 2

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.min_run < 1:
            raise ValueError("min_run must be >= 1")
        if self.grad_floor < 0 or self.score_floor < 0:
            raise ValueError("floors must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["grad_floor"]):
            d["grad_floor"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DetectParams":
        d = dict(d)
        if d.get("grad_floor") == "inf":
            d["grad_floor"] = math.inf
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class DetectionReport:
    slice_scores: np.ndarray
    gradient: np.ndarray
    slice_flags: np.ndarray
    transitions: np.ndarray  # slices whose |gradient| exceeds grad_floor
    volume_score: float
    volume_present: bool
    params_digest: str

    def to_dict(self) -> dict:
        return {
            "slice_scores": [float(v) for v in self.slice_scores],
            "gradient": [float(v) for v in self.gradient],
            "slice_flags": [bool(v) for v in self.slice_flags],
            "transitions": [int(v) for v in self.transitions],
            "volume_score": float(self.volume_score),
            "volume_present": bool(self.volume_present),
            "params_digest": self.params_digest,
        }


def slice_score(grid, t: float = 0.5) -> float:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        return 0.0
    return float(np.count_nonzero(grid > t)) / grid.size


def slice_scores(volume: Volume, t: float = 0.5) -> np.ndarray:
    d = volume.data.reshape(volume.depth, -1)
    return np.count_nonzero(d > t, axis=1) / d.shape[1]


def score_gradient(scores) -> np.ndarray:
    """Central differences inside, one-sided differences at the two ends."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or len(s) < 2:
        raise ValueError("need at least 2 slice scores")
    return np.gradient(s)


def _majority(flags: np.ndarray, k: int) -> np.ndarray:
    # slices beyond the ends count as unflagged
    if k == 0:
        return flags.copy()
    padded = np.concatenate([np.zeros(k, int), flags.astype(int), np.zeros(k, int)])
    votes = np.convolve(padded, np.ones(2 * k + 1, int), mode="valid")
    return votes > k


def _windowed_mean(s: np.ndarray, k: int) -> np.ndarray:
    # mean over the in-range part of each window: a convex combination of scores
    n = len(s)
    csum = np.concatenate([[0.0], np.cumsum(s)])
    idx = np.arange(n)
    lo = np.maximum(idx - k, 0)
    hi = np.minimum(idx + k, n - 1) + 1
    return (csum[hi] - csum[lo]) / (hi - lo)


def longest_run(flags) -> int:
    best = run = 0
    for f in flags:
        run = run + 1 if f else 0
        best = max(best, run)
    return best


def detect_volume(scores, params: DetectParams = DetectParams()) -> DetectionReport:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or len(s) == 0:
        raise ValueError("need a non-empty 1-D score sequence")
    grad = score_gradient(s) if len(s) > 1 else np.zeros(1)
    flags = _majority(s > params.score_floor, params.k)
    transitions = np.flatnonzero(np.abs(grad) > params.grad_floor)
    volume_score = float(np.clip(_windowed_mean(s, params.k).max(), s.min(), s.max()))
    present = longest_run(flags) >= params.min_run
    return DetectionReport(s, grad, flags, transitions, volume_score, bool(present), params.digest())


def detect_map(prob: Volume, params: DetectParams = DetectParams()) -> DetectionReport:
    return detect_volume(slice_scores(prob, params.t), params)
