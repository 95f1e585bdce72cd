"""Dice overlap, ROC AUC and grouped evaluation reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .parallel import ordered_map
from .volume import load_mask


class EvalError(ValueError):
    pass


def _mask_array(m) -> np.ndarray:
    return np.asarray(getattr(m, "data", m), dtype=bool)


def dice(a, b) -> float:
    """``2|A & B| / (|A| + |B|)`` over the whole volume; two empty masks score 1."""
    a, b = _mask_array(a), _mask_array(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total


def roc_auc(scores, labels) -> float:
    """Rank-statistic AUC; tied scores share credit equally."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and equally long")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative label")
    ranks = rankdata(s)  # average ranks for ties
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class VolumeResult:
    volume_id: str
    group: str
    dice: float
    label: bool
    score: float


@dataclass
class GroupResult:
    group: str
    mean_dice: float
    auc: float | None
    n: int


@dataclass
class EvalReport:
    per_volume: list[VolumeResult]
    per_group: list[GroupResult] = field(default_factory=list)
    mean_dice: float = 0.0
    mean_auc: float | None = None

    def to_dict(self) -> dict:
        return {
            "per_volume": [vars(v) for v in self.per_volume],
            "per_group": [vars(g) for g in self.per_group],
            "overall": {"mean_dice": self.mean_dice, "mean_auc": self.mean_auc},
        }

    def table(self) -> str:
        """Plain-text table: one row per group, then the mean row."""
        def fmt(v):
            return "  n/a" if v is None else f"{v:5.3f}"

        width = max([len("Group"), len("Mean")] + [len(g.group) for g in self.per_group])
        lines = [f"{'Group':<{width}}  {'AUC':>5}  {'Dice':>5}  {'N':>3}"]
        lines += [f"{g.group:<{width}}  {fmt(g.auc)}  {fmt(g.mean_dice)}  {g.n:>3}" for g in self.per_group]
        lines.append(f"{'Mean':<{width}}  {fmt(self.mean_auc)}  {fmt(self.mean_dice)}  {len(self.per_volume):>3}")
        return "\n".join(lines) + "\n"


def summarize(per_volume: list[VolumeResult]) -> EvalReport:
    groups: dict[str, list[VolumeResult]] = {}
    for v in per_volume:
        groups.setdefault(v.group, []).append(v)
    per_group = []
    for name in sorted(groups):
        members = groups[name]
        labels = [m.label for m in members]
        auc = roc_auc([m.score for m in members], labels) if 0 < sum(labels) < len(labels) else None
        per_group.append(GroupResult(name, float(np.mean([m.dice for m in members])), auc, len(members)))
    aucs = [g.auc for g in per_group if g.auc is not None]
    return EvalReport(
        per_volume,
        per_group,
        float(np.mean([v.dice for v in per_volume])) if per_volume else 0.0,
        float(np.mean(aucs)) if aucs else None,
    )


def _find_mask(root: Path, vid: str, names: tuple[str, ...]) -> Path:
    for name in names:
        p = root / vid / name
        if p.is_dir():
            return p
    p = root / vid
    if p.is_dir() and any(p.glob("*.pgm")):
        return p
    raise EvalError(f"no mask found for volume {vid!r} under {root}")


def _load_score(pred_dir: Path, vid: str) -> float:
    report = pred_dir / vid / "report.json"
    if not report.is_file():
        raise EvalError(f"no detection report for volume {vid!r} at {report}")
    return float(json.loads(report.read_text())["volume_score"])


def load_manifest(path) -> dict:
    """``{volume_id: {"group": str, "label": bool}}``."""
    data = json.loads(Path(path).read_text())
    if "volumes" in data:
        data = data["volumes"]
    return {vid: {"group": str(e.get("group", "all")), "label": bool(e["label"])} for vid, e in data.items()}


def evaluate(pred_dir, truth_dir, manifest, threads: int | None = None) -> EvalReport:
    """Score every volume in ``manifest``.

    Predictions are read from ``pred_dir/<id>/mask`` (source coordinates)
    and ``pred_dir/<id>/report.json``; ground truth from
    ``truth_dir/<id>/truth`` or ``truth_dir/<id>``.
    """
    pred_dir, truth_dir = Path(pred_dir), Path(truth_dir)
    entries = manifest if isinstance(manifest, dict) else load_manifest(manifest)
    if not entries:
        raise EvalError("manifest lists no volumes")
    ids = sorted(entries)
    missing = [v for v in ids if not (pred_dir / v).is_dir()]
    if missing:
        raise EvalError(f"volumes without predictions: {', '.join(missing)}")

    def one(vid):
        pred = load_mask(_find_mask(pred_dir, vid, ("mask",)))
        truth = load_mask(_find_mask(truth_dir, vid, ("truth",)))
        return VolumeResult(vid, entries[vid]["group"], dice(pred, truth), entries[vid]["label"], _load_score(pred_dir, vid))

    return summarize(ordered_map(one, ids, threads))
