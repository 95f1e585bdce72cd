"""Phantoms to evaluation table, the same way the CLI does it.

Writes a small phantom set to a temporary directory, runs the full
pipeline on every volume and prints the grouped Dice / AUC table.

    python demos/02_end_to_end.py [--count 8] [--depth 24]
"""

import argparse
import tempfile
from pathlib import Path

from gmpfluid import PhantomConfig, PipelineConfig, evaluate, run_pipeline
from gmpfluid.phantom import phantom_set, write_phantoms

ap = argparse.ArgumentParser()
ap.add_argument("--count", type=int, default=8)
ap.add_argument("--depth", type=int, default=24)
args = ap.parse_args()

base = PhantomConfig(dims=(args.depth, 256, 256), pocket_axes_z=(3.0, max(3.0, args.depth / 4)))
with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    labels = write_phantoms(phantom_set(args.count, 0, base, empty_every=2), root / "data", groups=2, block=2)
    for vid in sorted(labels):
        m = run_pipeline(root / "data" / vid / "volume.vol", PipelineConfig(), root / "pred" / vid)
        verdict = "present" if m["volume_present"] else "absent "
        print(f"{vid:<12} truth={'fluid' if labels[vid]['label'] else 'clean'}  {verdict}  "
              f"score={m['volume_score']:.4f}  {m['total_seconds']:.1f}s")
    report = evaluate(root / "pred", root / "data", root / "data" / "labels.json")
    print()
    print(report.table(), end="")
