#!/usr/bin/env python3
"""Feature-norm salience and the dual-threshold retention bands.

Each patch carries one feature vector per stream. The 3D share of the
combined L1 mass says which stream the model leans on; two thresholds turn
that share into a retention decision per patch.
"""

import numpy as np

from trimask import Stage1Thresholds, stage1_candidates, stage1_salience
from trimask.trace import PatchObservation

rng = np.random.default_rng(0)

print("=== Per-patch modality shares ===")
print()
print("A texture-heavy patch: big 2D feature norms, small 3D ones.")
patch = PatchObservation(
    patch_id=0,
    f2d=rng.normal(0, 2.0, 8),
    f3d=rng.normal(0, 0.15, 8),
    a2d=rng.random(4),
    a3d=rng.random(4),
)
s = stage1_salience(patch)
print(f"  2D share {s.m2d:.3f}, 3D share {s.m3d:.3f}  (they always sum to 1)")
print()

print("A geometry-heavy patch: the 3D stream dominates.")
patch = PatchObservation(
    patch_id=1,
    f2d=rng.normal(0, 0.2, 8),
    f3d=rng.normal(0, 2.0, 8),
    a2d=rng.random(4),
    a3d=rng.random(4),
)
s = stage1_salience(patch)
print(f"  2D share {s.m2d:.3f}, 3D share {s.m3d:.3f}")
print()

print("=== Dual thresholds map the 3D share to a candidate set ===")
print()
thresholds = Stage1Thresholds()  # tau2d=0.08, tau3d=0.20
print(f"lower bound tau2d={thresholds.tau2d}, upper bound tau3d={thresholds.tau3d}")
print()
print("  3D share   candidates")
for m3d in (0.02, 0.08, 0.12, 0.20, 0.35, 0.90):
    c = stage1_candidates(m3d, thresholds)
    print(f"    {m3d:4.2f}     {c}")
print()
print("Below the band only the 2D token survives; above it only the 3D token;")
print("the inclusive band keeps both. Decisions downstream use the temporally")
print("smoothed share, not the raw one (see demo 03).")
