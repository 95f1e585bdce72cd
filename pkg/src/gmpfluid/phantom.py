"""Synthetic OCT-like volumes with known fluid ground truth.

A bright band with a Gaussian vertical profile bends sinusoidally across
the columns; dark ellipsoidal pockets sit inside it and span runs of
consecutive slices. Unit-mean gamma speckle multiplies the clean render,
which is then clamped to [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .parallel import ordered_map
from .segment import SegmentationMask
from .volume import Volume, save_mask, save_volume


class PhantomError(ValueError):
    pass


@dataclass(frozen=True)
class PhantomConfig:
    dims: tuple[int, int, int] = (128, 256, 256)  # depth, height, width
    band_center: float = 128.0
    band_sigma: float = 22.0
    band_peak: float = 0.95
    background: float = 0.62
    curvature: float = 6.0  # rows of vertical swing
    curvature_cycles: float = 1.0  # sine periods across the width
    n_pockets: tuple[int, int] = (1, 3)
    pocket_axes_z: tuple[float, float] = (6.0, 14.0)  # semi-axes, slices
    pocket_axes_y: tuple[float, float] = (10.0, 20.0)  # semi-axes, rows
    pocket_axes_x: tuple[float, float] = (24.0, 48.0)  # semi-axes, columns
    pocket_darkness: tuple[float, float] = (0.75, 0.9)  # fraction of intensity removed
    speckle_looks: float = 4.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))
        for name in ("n_pockets", "pocket_axes_z", "pocket_axes_y", "pocket_axes_x", "pocket_darkness"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise PhantomError(f"{name} range is empty: ({lo}, {hi})")
            object.__setattr__(self, name, (lo, hi))
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise PhantomError("dims must be three positive sizes")
        if self.n_pockets[0] < 0:
            raise PhantomError("pocket count must be >= 0")
        if min(self.pocket_axes_z[0], self.pocket_axes_y[0], self.pocket_axes_x[0]) <= 0:
            raise PhantomError("pocket semi-axes must be positive")
        if not (0.0 <= self.pocket_darkness[0] and self.pocket_darkness[1] <= 1.0):
            raise PhantomError("pocket darkness must lie in [0, 1]")
        if not 0.0 <= self.background <= self.band_peak <= 1.0:
            raise PhantomError("need 0 <= background <= band_peak <= 1")
        if self.band_sigma <= 0 or self.speckle_looks <= 0:
            raise PhantomError("band_sigma and speckle_looks must be positive")
        if not 0 <= self.seed < 2**64:
            raise PhantomError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomConfig":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True)
class Pocket:
    center: tuple[float, float, float]  # z, y, x
    axes: tuple[float, float, float]
    darkness: float


@dataclass(frozen=True)
class Phantom:
    volume: Volume
    truth: SegmentationMask
    label: bool
    pockets: tuple[Pocket, ...]
    clean: np.ndarray


def band_centre(config: PhantomConfig, phase: float) -> np.ndarray:
    """Band centre row for every column."""
    x = np.arange(config.dims[2], dtype=np.float64)
    w = max(config.dims[2], 1)
    return config.band_center + config.curvature * np.sin(2.0 * math.pi * config.curvature_cycles * x / w + phase)


def _place_pockets(config: PhantomConfig, rng: np.random.Generator, centre: np.ndarray) -> list[Pocket]:
    depth, height, width = config.dims
    n = int(rng.integers(config.n_pockets[0], config.n_pockets[1] + 1))
    band = 2.0 * config.band_sigma
    pockets = []
    for _ in range(n):
        az = rng.uniform(*config.pocket_axes_z)
        ay = rng.uniform(*config.pocket_axes_y)
        ax = rng.uniform(*config.pocket_axes_x)
        if 2 * az > depth - 1 or 2 * ax > width - 1 or ay > band:
            raise PhantomError(f"pocket with semi-axes ({az:.1f}, {ay:.1f}, {ax:.1f}) cannot fit the region")
        z0 = rng.uniform(az, depth - 1 - az)
        x0 = rng.uniform(ax, width - 1 - ax)
        c = float(np.interp(x0, np.arange(width), centre))
        y0 = c + rng.uniform(-(band - ay), band - ay)
        if y0 - ay < 0 or y0 + ay > height - 1:
            raise PhantomError("pocket extends outside the volume rows")
        pockets.append(Pocket((z0, y0, x0), (az, ay, ax), float(rng.uniform(*config.pocket_darkness))))
    return pockets


def pocket_mask(shape, pocket: Pocket) -> np.ndarray:
    """Voxels with ``sum(((p - c) / a)^2) <= 1``."""
    z, y, x = np.ogrid[: shape[0], : shape[1], : shape[2]]
    (cz, cy, cx), (az, ay, ax) = pocket.center, pocket.axes
    return ((z - cz) / az) ** 2 + ((y - cy) / ay) ** 2 + ((x - cx) / ax) ** 2 <= 1.0


def generate(config: PhantomConfig) -> Phantom:
    """Render one phantom; a pure function of ``config`` (including its seed)."""
    rng = np.random.default_rng(config.seed)
    depth, height, width = config.dims
    phase = rng.uniform(0.0, 2.0 * math.pi)
    centre = band_centre(config, phase)
    rows = np.arange(height, dtype=np.float64)[:, None]
    profile = np.exp(-((rows - centre[None, :]) ** 2) / (2.0 * config.band_sigma**2))
    slab = config.background + (config.band_peak - config.background) * profile
    clean = np.broadcast_to(slab, config.dims).copy()

    pockets = _place_pockets(config, rng, centre)
    truth = np.zeros(config.dims, dtype=bool)
    for p in pockets:
        inside = pocket_mask(config.dims, p)
        dark = np.broadcast_to(slab * (1.0 - p.darkness), config.dims)
        clean[inside] = np.minimum(clean[inside], dark[inside])
        truth |= inside

    noise = rng.gamma(config.speckle_looks, 1.0 / config.speckle_looks, size=config.dims)
    data = np.clip(clean * noise, 0.0, 1.0)
    meta = f"phantom-seed-{config.seed}"
    return Phantom(Volume(data, meta), SegmentationMask(truth), bool(pockets), tuple(pockets), clean)


def phantom_set(count: int, seed: int, base: PhantomConfig = PhantomConfig(), empty_every: int = 0):
    """``count`` configs with seeds ``seed, seed+1, ...``.

    With ``empty_every = m > 0`` every m-th phantom has no pockets.
    """
    configs = []
    for i in range(count):
        cfg = replace(base, seed=seed + i)
        if empty_every and i % empty_every == empty_every - 1:
            cfg = replace(cfg, n_pockets=(0, 0))
        configs.append(cfg)
    return configs


def write_phantoms(configs, out_dir, groups: int = 1, threads: int | None = None, block: int = 1) -> dict:
    """Write ``<id>/volume.vol`` and ``<id>/truth/`` per phantom plus ``labels.json``.

    Volume ids are ``phantom_<seed>``. Consecutive blocks of ``block``
    volumes are dealt round-robin into groups ``g0, g1, ...``; matching
    ``block`` to ``empty_every`` puts positives and negatives in every group.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(item):
        i, cfg = item
        ph = generate(cfg)
        vid = f"phantom_{cfg.seed}"
        save_volume(ph.volume, out / vid / "volume.vol")
        save_mask(ph.truth, out / vid / "truth")
        return vid, {"group": f"g{(i // max(block, 1)) % max(groups, 1)}", "label": ph.label, "n_pockets": len(ph.pockets), "config": cfg.to_dict()}

    labels = dict(ordered_map(one, list(enumerate(configs)), threads))
    (out / "labels.json").write_text(json.dumps({"volumes": labels}, indent=2, sort_keys=True) + "\n")
    return labels
