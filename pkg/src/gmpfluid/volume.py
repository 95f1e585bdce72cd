"""Volume containers, PGM / ``.vol`` file formats and bilinear resizing.

A volume is a stack of equally sized grayscale slices with values in
``[0, 1]``, stored as a ``(depth, height, width)`` float64 array. Single
slices are plain 2-D arrays.

On disk a volume is either a directory of binary PGM (P5) files read in
lexicographic filename order, or a single ``.vol`` file::

    b"GMPV" | u32 height | u32 width | u32 depth | float32[depth*height*width]

all little-endian, slice-major and row-major.
"""

from __future__ import annotations

import os
import re
import struct
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VOL_MAGIC = b"GMPV"

_PGM_HEADER = re.compile(
    rb"^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s"
)


class VolumeFormatError(ValueError):
    """Raised for unreadable, inconsistent or unsupported volume files."""


@dataclass(frozen=True)
class Volume:
    """Immutable stack of 2-D slices with values in [0, 1]."""

    data: np.ndarray
    meta: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[np.newaxis]
        if data.ndim != 3 or data.shape[0] < 1:
            raise ValueError(f"volume needs shape (depth, height, width), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume contains non-finite values")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("volume values must lie in [0, 1]")
        data = data.copy() if data is self.data else data
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def depth(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __len__(self):
        return self.depth

    def __getitem__(self, index) -> np.ndarray:
        return self.data[index]

    def __iter__(self):
        return iter(self.data)

    @classmethod
    def from_slices(cls, slices, meta: str = "") -> "Volume":
        slices = [np.asarray(s, dtype=np.float64) for s in slices]
        if not slices:
            raise ValueError("a volume needs at least one slice")
        shapes = {s.shape for s in slices}
        if len(shapes) != 1:
            raise VolumeFormatError(f"inconsistent slice dimensions: {sorted(shapes)}")
        return cls(np.stack(slices), meta)


# -- PGM ---------------------------------------------------------------------


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Return ``(raw integer samples, maxval)`` of a binary P5 PGM file."""
    buf = Path(path).read_bytes()
    m = _PGM_HEADER.match(buf)
    if m is None:
        raise VolumeFormatError(f"not a binary PGM file: {path}")
    width, height, maxval = (int(g) for g in m.groups())
    if not 0 < maxval < 65536:
        raise VolumeFormatError(f"unsupported PGM maxval {maxval}: {path}")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    count = width * height
    if len(buf) - m.end() < count * dtype.itemsize:
        raise VolumeFormatError(f"truncated PGM data: {path}")
    data = np.frombuffer(buf, dtype=dtype, count=count, offset=m.end())
    return data.reshape(height, width).astype(np.uint16 if dtype.itemsize == 2 else np.uint8), maxval


def write_pgm(path, samples: np.ndarray, maxval: int) -> None:
    """Write integer samples as a P5 PGM with the given maxval (8 or 16 bit)."""
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    if samples.min(initial=0) < 0 or samples.max(initial=0) > maxval:
        raise ValueError("PGM samples exceed maxval")
    dtype = ">u1" if maxval < 256 else ">u2"
    header = b"P5\n%d %d\n%d\n" % (samples.shape[1], samples.shape[0], maxval)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(samples.astype(dtype).tobytes())


def _bit_depth_maxval(bits: int) -> int:
    if bits not in (8, 16):
        raise VolumeFormatError(f"unsupported bit depth {bits}; only 8 and 16 bit")
    return (1 << bits) - 1


def _pgm_files(directory: Path) -> list[Path]:
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        raise VolumeFormatError(f"no .pgm files in {directory}")
    return files


def _load_pgm_stack(directory: Path) -> tuple[np.ndarray, list[int]]:
    raws, maxvals = [], []
    for p in _pgm_files(directory):
        raw, maxval = read_pgm(p)
        if raws and raw.shape != raws[0].shape:
            raise VolumeFormatError(
                f"inconsistent slice dimensions: {p.name} is {raw.shape}, expected {raws[0].shape}"
            )
        raws.append(raw)
        maxvals.append(maxval)
    return np.stack(raws), maxvals


def _write_pgm_stack(directory, samples: np.ndarray, maxval: int, prefix: str = "slice") -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for stale in directory.glob(f"{prefix}_*.pgm"):
        stale.unlink()
    for i, sl in enumerate(samples):
        write_pgm(directory / f"{prefix}_{i:04d}.pgm", sl, maxval)


# -- .vol --------------------------------------------------------------------


def read_vol(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < 16 or buf[:4] != VOL_MAGIC:
        raise VolumeFormatError(f"not a GMPV volume: {path}")
    height, width, depth = struct.unpack("<III", buf[4:16])
    count = depth * height * width
    if len(buf) - 16 != 4 * count:
        raise VolumeFormatError(f"GMPV payload size mismatch in {path}")
    return np.frombuffer(buf, dtype="<f4", count=count, offset=16).reshape(depth, height, width)


def write_vol(path, data: np.ndarray) -> None:
    data = np.asarray(data)
    depth, height, width = data.shape
    with open(path, "wb") as fh:
        fh.write(VOL_MAGIC + struct.pack("<III", height, width, depth))
        fh.write(data.astype("<f4").tobytes())


# -- public volume I/O -------------------------------------------------------


def load_volume(path, minmax: bool = False) -> Volume:
    """Load a PGM directory or ``.vol`` file as a volume normalized to [0, 1].

    PGM samples are divided by their file's maxval; ``.vol`` values are
    taken as stored. ``minmax=True`` additionally stretches the loaded
    volume to span exactly [0, 1].
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such volume: {path}")
    if path.is_dir():
        raw, maxvals = _load_pgm_stack(path)
        data = raw.astype(np.float64) / np.asarray(maxvals, dtype=np.float64)[:, None, None]
    elif path.suffix.lower() == ".vol":
        data = read_vol(path).astype(np.float64)
    elif path.suffix.lower() == ".pgm":
        raw, maxval = read_pgm(path)
        data = raw[np.newaxis].astype(np.float64) / maxval
    else:
        raise VolumeFormatError(f"unsupported volume path {path}")
    if minmax:
        data = minmax_normalize(data)
    return Volume(data, meta=str(path))


def save_volume(volume: Volume, path, bits: int = 16) -> None:
    """Save as ``.vol`` (float32) when ``path`` ends in .vol, else as a PGM directory."""
    path = Path(path)
    if path.suffix.lower() == ".vol":
        path.parent.mkdir(parents=True, exist_ok=True)
        write_vol(path, volume.data)
        return
    maxval = _bit_depth_maxval(bits)
    _write_pgm_stack(path, quantize(volume.data, maxval), maxval)


def quantize(data: np.ndarray, maxval: int) -> np.ndarray:
    return np.rint(np.clip(data, 0.0, 1.0) * maxval).astype(np.uint16 if maxval > 255 else np.uint8)


def minmax_normalize(data: np.ndarray) -> np.ndarray:
    lo, hi = float(np.min(data)), float(np.max(data))
    if hi <= lo:
        return np.zeros_like(data, dtype=np.float64)
    return (np.asarray(data, dtype=np.float64) - lo) / (hi - lo)


def save_probability_map(volume: Volume, path) -> None:
    """Probability maps are 16-bit PGM stacks, value/65535."""
    _write_pgm_stack(path, quantize(volume.data, 65535), 65535)


def load_probability_map(path) -> Volume:
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"probability map directory not found: {path}")
    raw, maxvals = _load_pgm_stack(path)
    if any(mv != 65535 for mv in maxvals):
        raise VolumeFormatError("probability maps must be 16-bit PGM (maxval 65535)")
    return Volume(raw.astype(np.float64) / 65535.0, meta=str(path))


# -- resizing ----------------------------------------------------------------


def _axis_weights(n_in: int, n_out: int):
    # corner-aligned: output 0 -> input 0, output n_out-1 -> input n_in-1
    if n_in == 1:
        z = np.zeros(n_out, dtype=np.intp)
        return z, z, np.zeros(n_out)
    pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    i0 = np.minimum(np.floor(pos).astype(np.intp), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def resize_slice(img: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Bilinear resize with corner-aligned sampling.

    Output values stay within ``[img.min(), img.max()]``.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("resize_slice expects a 2-D image")
    if target_h < 2 or target_w < 2:
        raise ValueError(f"degenerate resize target {target_h}x{target_w}; both sides must be >= 2")
    y0, y1, fy = _axis_weights(img.shape[0], target_h)
    x0, x1, fx = _axis_weights(img.shape[1], target_w)
    top = img[y0]
    rows = top + fy[:, None] * (img[y1] - top)
    left = rows[:, x0]
    out = left + fx[None, :] * (rows[:, x1] - left)
    return np.clip(out, img.min(), img.max())


def resize_volume(volume: Volume, target_h: int, target_w: int) -> Volume:
    if (volume.height, volume.width) == (target_h, target_w):
        return volume
    return Volume(
        np.stack([resize_slice(s, target_h, target_w) for s in volume]), volume.meta
    )


def parse_hw(text: str) -> tuple[int, int]:
    """Parse ``"512x256"`` as (height, width)."""
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if m is None:
        raise ValueError(f"expected HxW, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def volume_id(path) -> str:
    """Identifier for a volume path; ``<id>/volume.vol`` is named after its directory."""
    norm = os.path.normpath(str(path))
    name = os.path.basename(norm)
    if name.lower() == "volume.vol":
        return os.path.basename(os.path.dirname(norm)) or "volume"
    return name[:-4] if name.lower().endswith(".vol") else name


# -- masks -------------------------------------------------------------------


def save_mask(mask, path) -> None:
    """Write a segmentation mask as an 8-bit {0, 255} PGM stack plus ``roi.json``."""
    path = Path(path)
    data = np.asarray(mask.data)
    if not np.isin(data, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    _write_pgm_stack(path, data.astype(np.uint8) * 255, 255)
    roi_file = path / "roi.json"
    if mask.roi is not None:
        roi_file.write_text(json.dumps(mask.roi.to_dict(), indent=2, sort_keys=True) + "\n")
    elif roi_file.exists():
        roi_file.unlink()


def load_mask(path):
    """Inverse of :func:`save_mask`; rejects samples other than 0 and 255."""
    from .roi import RoiRecord
    from .segment import SegmentationMask

    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"mask directory not found: {path}")
    raw, maxvals = _load_pgm_stack(path)
    if any(mv != 255 for mv in maxvals):
        raise VolumeFormatError("masks must be 8-bit PGM (maxval 255)")
    if not np.isin(raw, (0, 255)).all():
        raise VolumeFormatError(f"mask {path} contains values other than 0 and 255")
    roi_file = path / "roi.json"
    roi = RoiRecord.from_dict(json.loads(roi_file.read_text())) if roi_file.exists() else None
    return SegmentationMask(raw == 255, roi)


__all__ = [
    "Volume",
    "VolumeFormatError",
    "load_volume",
    "save_volume",
    "read_pgm",
    "write_pgm",
    "read_vol",
    "write_vol",
    "resize_slice",
    "resize_volume",
    "save_mask",
    "load_mask",
    "save_probability_map",
    "load_probability_map",
    "minmax_normalize",
    "quantize",
    "parse_hw",
]
