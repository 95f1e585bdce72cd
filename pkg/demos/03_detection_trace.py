"""Slice-level view of the detection rule.

Runs the pipeline on one phantom and prints, per slice, the segmented
area fraction, whether the slice survives the majority vote and whether
the score gradient marks it as a transition.

    python demos/03_detection_trace.py
"""

from gmpfluid import PhantomConfig, PipelineConfig, generate, process_volume

ph = generate(PhantomConfig(dims=(20, 256, 256), n_pockets=(2, 2), pocket_axes_z=(3, 5), seed=12))
res = process_volume(ph.volume, PipelineConfig(), vid="demo")
rep = res.report
truth = ph.truth.data.any(axis=(1, 2))
marks = set(rep.transitions.tolist())

print("slice  truth  score    flag  transition")
for i, s in enumerate(rep.slice_scores):
    print(f"{i:5d}  {'fluid' if truth[i] else '  -  '}  {s:.4f}  {'###' if rep.slice_flags[i] else ' . '}   "
          f"{'<>' if i in marks else ''}")
print(f"\nvolume_present={rep.volume_present} volume_score={rep.volume_score:.4f}")
