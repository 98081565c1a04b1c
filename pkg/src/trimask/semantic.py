"""Attention-driven semantics: clustering, decomposition, and retention rules.

Patches are grouped into target-object / robot-body / background sets by
1-D clustering of their comprehensive attention scores (summed L1 norms of
both modalities' attention vectors). The 3D attention vector is split into
the component parallel to the 2D vector and the orthogonal remainder; the
orthogonal share is what counts as genuinely-3D salience. Per-label rules
then map smoothed shares and global baselines onto retention candidates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .candidates import BOTH, NONE, ONLY_2D, CandidateSet
from .errors import AllDegenerate, TooFewPatches
from .trace import PatchObservation


class SemanticLabel(enum.IntEnum):
    """Three-way semantic set, ordered by expected attention response."""

    BG = 0
    ROB = 1
    OBJ = 2


@dataclass(frozen=True)
class Stage2Salience:
    """Per-patch attention shares plus the decomposition component norms."""

    m2d: float
    m3d: float
    para_norm: float
    ortho_norm: float
    degenerate: bool = False


@dataclass(frozen=True)
class SemanticBaselines:
    """Global per-step means of the attention shares over non-degenerate patches."""

    mu2d: float
    mu3d: float


@dataclass(frozen=True)
class ClusteringResult:
    labels: np.ndarray          # int codes, SemanticLabel values, length P
    cluster_means: tuple[float, ...]
    degenerate: bool = False

    def histogram(self) -> dict[SemanticLabel, int]:
        return {lab: int(np.sum(self.labels == lab)) for lab in SemanticLabel}


def decompose_attention(a3d: np.ndarray, a2d: np.ndarray):
    """Split a3d into its projection onto a2d and the orthogonal remainder.

    para = (<a3d, a2d> / <a2d, a2d>) * a2d, ortho = a3d - para; the two sum
    back to a3d exactly and are mutually orthogonal. A zero a2d yields
    para = 0, ortho = a3d.
    """
    a3d = np.asarray(a3d, dtype=np.float64)
    a2d = np.asarray(a2d, dtype=np.float64)
    denom = float(np.dot(a2d, a2d))
    if denom == 0.0:
        return np.zeros_like(a3d), a3d.copy()
    coeff = float(np.dot(a3d, a2d)) / denom
    para = coeff * a2d
    return para, a3d - para


def stage2_salience(patch: PatchObservation) -> Stage2Salience:
    """Attention shares for one patch.

    m2d is the 2D attention mass over the combined mass; m3d is the L1 norm
    of the orthogonal 3D component over the same denominator (so it is not
    bounded by 1). Zero combined mass yields 0/0 with the degenerate flag.
    """
    n2 = float(np.abs(patch.a2d).sum())
    n3 = float(np.abs(patch.a3d).sum())
    para, ortho = decompose_attention(patch.a3d, patch.a2d)
    para_norm = float(np.abs(para).sum())
    ortho_norm = float(np.abs(ortho).sum())
    denom = n2 + n3
    if denom == 0.0:
        return Stage2Salience(0.0, 0.0, para_norm, ortho_norm, degenerate=True)
    return Stage2Salience(n2 / denom, ortho_norm / denom, para_norm, ortho_norm)


def stage2_salience_arrays(a2d: np.ndarray, a3d: np.ndarray):
    """Vectorized attention shares over (P, D) matrices.

    Returns (m2d, m3d, degenerate) arrays of length P.
    """
    n2 = np.abs(a2d).sum(axis=1)
    n3 = np.abs(a3d).sum(axis=1)
    sq = (a2d * a2d).sum(axis=1)
    dots = (a3d * a2d).sum(axis=1)
    coeff = np.divide(dots, sq, out=np.zeros_like(dots), where=sq > 0.0)
    ortho = a3d - coeff[:, None] * a2d
    ortho = np.where(sq[:, None] > 0.0, ortho, a3d)
    ortho_norm = np.abs(ortho).sum(axis=1)
    denom = n2 + n3
    degenerate = denom == 0.0
    safe = np.where(degenerate, 1.0, denom)
    m2d = np.where(degenerate, 0.0, n2 / safe)
    m3d = np.where(degenerate, 0.0, ortho_norm / safe)
    return m2d, m3d, degenerate


def comprehensive_scores(a2d: np.ndarray, a3d: np.ndarray) -> np.ndarray:
    """Per-patch clustering score: combined L1 attention mass of both streams."""
    return np.abs(a2d).sum(axis=1) + np.abs(a3d).sum(axis=1)


def optimal_1d_partition(values: np.ndarray, k: int):
    """Exact minimum-SSE partition of sorted 1-D values into k contiguous groups.

    Dynamic program over prefix sums; O(k * n^2). Returns the list of k
    boundary pairs [(lo, hi), ...) over the sorted order.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    s1 = np.concatenate(([0.0], np.cumsum(x)))
    s2 = np.concatenate(([0.0], np.cumsum(x * x)))

    def seg_cost(i: np.ndarray, j: int) -> np.ndarray:
        cnt = j - i
        tot = s1[j] - s1[i]
        return (s2[j] - s2[i]) - tot * tot / cnt

    cost = np.full((k + 1, n + 1), np.inf)
    split = np.zeros((k + 1, n + 1), dtype=np.intp)
    cost[0, 0] = 0.0
    for kk in range(1, k + 1):
        for j in range(kk, n + 1):
            i = np.arange(kk - 1, j)
            cand = cost[kk - 1, i] + seg_cost(i, j)
            best = int(np.argmin(cand))
            cost[kk, j] = cand[best]
            split[kk, j] = i[best]

    bounds = [n]
    j = n
    for kk in range(k, 0, -1):
        j = int(split[kk, j])
        bounds.append(j)
    bounds.reverse()
    return [(bounds[i], bounds[i + 1]) for i in range(k)]


def kmeans_1d(scores: np.ndarray, k: int = 3):
    """Globally optimal 1-D k-means on raw scores.

    Returns (assignment, centroids) where assignment[p] is the cluster index
    in ascending-centroid order. Analysis utility: k is configurable; the
    pipeline always uses k = 3.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < k:
        raise TooFewPatches(f"cannot split {scores.size} scores into {k} clusters")
    order = np.argsort(scores, kind="stable")
    segments = optimal_1d_partition(scores[order], k)
    assignment = np.empty(scores.size, dtype=np.intp)
    centroids = []
    for rank, (lo, hi) in enumerate(segments):
        members = order[lo:hi]
        assignment[members] = rank
        centroids.append(float(scores[members].mean()) if hi > lo else float("nan"))
    return assignment, tuple(centroids)


def cluster_semantics(scores: np.ndarray, rng_seed: int = 0) -> ClusteringResult:
    """Label each patch OBJ / ROB / BG from its comprehensive attention score.

    The three clusters are the exact minimum-SSE 1-D partition; the highest
    centroid is the target object, the middle the robot body, the lowest the
    background. Fewer than three distinct score levels collapses the split
    (one level: all OBJ; two levels: high OBJ, low BG) and flags the result.
    rng_seed is reserved for tie-breaking and currently unused: sorting is
    stable and the partition is unique up to equal-score boundaries.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 3:
        raise TooFewPatches(f"semantic clustering needs >= 3 patches, got {scores.size}")
    distinct = np.unique(scores)
    if distinct.size == 1:
        labels = np.full(scores.size, int(SemanticLabel.OBJ), dtype=np.intp)
        return ClusteringResult(labels, (float(distinct[0]),), degenerate=True)
    if distinct.size == 2:
        labels = np.where(scores == distinct[1], int(SemanticLabel.OBJ), int(SemanticLabel.BG))
        return ClusteringResult(
            labels.astype(np.intp), (float(distinct[0]), float(distinct[1])), degenerate=True
        )
    assignment, centroids = kmeans_1d(scores, k=3)
    return ClusteringResult(assignment, centroids)


def compute_baselines(saliences: list[Stage2Salience]) -> SemanticBaselines:
    """Mean attention shares over non-degenerate patches."""
    m2d = [s.m2d for s in saliences if not s.degenerate]
    m3d = [s.m3d for s in saliences if not s.degenerate]
    if not m2d:
        raise AllDegenerate("every patch has zero combined attention mass")
    return SemanticBaselines(mu2d=float(np.mean(m2d)), mu3d=float(np.mean(m3d)))


def stage2_candidates(
    label: SemanticLabel,
    m2d_hat: float,
    m3d_hat: float,
    baselines: SemanticBaselines,
    keep_bg: bool,
    theta_2dext: float = 0.95,
    eps_3d: float = 0.02,
) -> CandidateSet:
    """Per-label retention rule on smoothed attention shares.

    Background keeps both streams only when its random draw survives;
    robot patches keep both when the orthogonal 3D share beats its baseline,
    degrade to 2D-only when only the 2D share beats its baseline, and are
    dropped otherwise; object patches keep both unless the 2D share is
    extreme while the 3D share is negligible.
    """
    if label == SemanticLabel.BG:
        return BOTH if keep_bg else NONE
    if label == SemanticLabel.ROB:
        if m3d_hat > baselines.mu3d:
            return BOTH
        if m2d_hat > baselines.mu2d:
            return ONLY_2D
        return NONE
    if m2d_hat > theta_2dext and m3d_hat < eps_3d:
        return ONLY_2D
    return BOTH
