"""Feature-norm modality salience and the dual-threshold retention bands.

The per-patch 2D share is the L1 norm of the patch's 2D feature vector over
the summed L1 norms of both modalities; the 3D share is its complement. A
smoothed 3D share below the lower threshold keeps only the 2D token, above
the upper threshold keeps only the 3D token, and the inclusive band between
them keeps both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .candidates import BOTH, ONLY_2D, ONLY_3D, CandidateSet
from .errors import InvalidThresholds
from .trace import PatchObservation, StepObservation


@dataclass(frozen=True)
class Stage1Salience:
    """Per-patch feature-norm shares; m2d + m3d == 1 unless degenerate."""

    m2d: float
    m3d: float
    degenerate: bool = False


@dataclass(frozen=True)
class Stage1Thresholds:
    """Dual retention thresholds, 0 < tau2d < tau3d < 1."""

    tau2d: float = 0.08
    tau3d: float = 0.20

    def __post_init__(self):
        if not (0.0 < self.tau2d < 1.0 and 0.0 < self.tau3d < 1.0):
            raise InvalidThresholds(
                f"thresholds must lie in (0,1), got tau2d={self.tau2d}, tau3d={self.tau3d}"
            )
        if self.tau2d >= self.tau3d:
            raise InvalidThresholds(
                f"tau2d must be strictly below tau3d, got {self.tau2d} >= {self.tau3d}"
            )


def stage1_salience(patch: PatchObservation) -> Stage1Salience:
    """Feature-norm salience shares for one patch.

    Zero feature norms in both modalities yield the balanced 0.5/0.5
    convention with the degenerate flag set, so dead patches flow to the
    dual-retention band instead of aborting an episode.
    """
    n2 = float(np.abs(patch.f2d).sum())
    n3 = float(np.abs(patch.f3d).sum())
    denom = n2 + n3
    if denom == 0.0:
        return Stage1Salience(m2d=0.5, m3d=0.5, degenerate=True)
    m2d = n2 / denom
    return Stage1Salience(m2d=m2d, m3d=1.0 - m2d)


def stage1_salience_arrays(f2d: np.ndarray, f3d: np.ndarray):
    """Vectorized feature-norm shares over (P, D) matrices.

    Returns (m2d, m3d, degenerate) arrays of length P.
    """
    n2 = np.abs(f2d).sum(axis=1)
    n3 = np.abs(f3d).sum(axis=1)
    denom = n2 + n3
    degenerate = denom == 0.0
    safe = np.where(degenerate, 1.0, denom)
    m2d = np.where(degenerate, 0.5, n2 / safe)
    m3d = 1.0 - m2d
    return m2d, m3d, degenerate


def stage1_candidates(m3d_hat: float, thresholds: Stage1Thresholds) -> CandidateSet:
    """Map a smoothed 3D share onto a retention candidate set.

    Strictly below tau2d keeps 2D only; strictly above tau3d keeps 3D only;
    the inclusive band [tau2d, tau3d] keeps both. Exactly one branch fires
    for every m3d_hat in [0, 1], so the result is never empty.
    """
    if m3d_hat < thresholds.tau2d:
        return ONLY_2D
    if m3d_hat > thresholds.tau3d:
        return ONLY_3D
    return BOTH


def salience_percent(steps: list[StepObservation] | tuple[StepObservation, ...]):
    """Episode-level reporting statistic: patch-and-step averaged shares.

    Returns (mean_m2d, mean_m3d) over every patch of every step; degenerate
    patches contribute their 0.5/0.5 convention values.
    """
    values_2d: list[float] = []
    values_3d: list[float] = []
    for step in steps:
        for patch in step.patches:
            s = stage1_salience(patch)
            values_2d.append(s.m2d)
            values_3d.append(s.m3d)
    if not values_2d:
        return 0.0, 0.0
    return float(np.mean(values_2d)), float(np.mean(values_3d))
