import numpy as np
import pytest

from trimask import EpisodeTrace, PatchObservation, StepObservation


def make_patch(patch_id=0, f2d=(1.0, 2.0), f3d=(3.0, 4.0), a2d=(1.0, 0.0), a3d=(0.0, 1.0)):
    return PatchObservation(
        patch_id=patch_id,
        f2d=np.asarray(f2d, dtype=float),
        f3d=np.asarray(f3d, dtype=float),
        a2d=np.asarray(a2d, dtype=float),
        a3d=np.asarray(a3d, dtype=float),
    )


def make_trace(episode_id="ep", num_steps=2, num_patches=4, rng_seed=0, feat_dim=3, attn_dim=3):
    rng = np.random.default_rng(rng_seed)
    steps = []
    for t in range(1, num_steps + 1):
        patches = [
            PatchObservation(
                patch_id=p,
                f2d=rng.normal(size=feat_dim),
                f3d=rng.normal(size=feat_dim),
                a2d=rng.random(attn_dim),
                a3d=rng.random(attn_dim),
            )
            for p in range(num_patches)
        ]
        steps.append(StepObservation(step_index=t, patches=patches))
    return EpisodeTrace(episode_id=episode_id, num_patches=num_patches, steps=steps)


def handcrafted_patches():
    """Six patches with one exemplar of every fusion path (constant in time).

    With bg_keep_prob=0 and default thresholds the per-step outcome at t >= 2:
      0: OBJ balanced        -> BOTH  & BOTH -> both kept
      1: OBJ extreme 2D      -> {2D}  & BOTH -> 2D only
      2: ROB orthogonal-rich -> BOTH  & BOTH -> both kept
      3: ROB collinear attn, 3D-heavy features -> {2D} & {3D} -> conflict -> {2D}
      4,5: BG                -> pruned
    """
    return [
        make_patch(0, f2d=(0.9, 0.0), f3d=(0.1, 0.0), a2d=(5.0, 0.0), a3d=(0.0, 5.0)),
        make_patch(1, f2d=(0.9, 0.0), f3d=(0.1, 0.0), a2d=(9.8, 0.0), a3d=(0.2, 0.0)),
        make_patch(2, f2d=(0.85, 0.0), f3d=(0.15, 0.0), a2d=(2.0, 0.0), a3d=(0.0, 2.0)),
        make_patch(3, f2d=(0.5, 0.0), f3d=(0.5, 0.0), a2d=(3.0, 0.0), a3d=(1.0, 0.0)),
        make_patch(4, f2d=(0.85, 0.0), f3d=(0.15, 0.0), a2d=(0.2, 0.0), a3d=(0.2, 0.0)),
        make_patch(5, f2d=(0.85, 0.0), f3d=(0.15, 0.0), a2d=(0.2, 0.0), a3d=(0.2, 0.0)),
    ]


def handcrafted_trace(num_steps=2, episode_id="handcrafted"):
    patches = handcrafted_patches()
    steps = [StepObservation(step_index=t, patches=patches) for t in range(1, num_steps + 1)]
    return EpisodeTrace(episode_id=episode_id, num_patches=6, steps=steps)


@pytest.fixture
def tiny_trace():
    return make_trace()
