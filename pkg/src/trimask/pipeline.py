"""Per-step pruning pipeline: smooth, gate, cluster, fuse, mask.

Step order: measure raw indicators, advance the smoothing state, derive the
feature-share candidate set per patch, cluster raw attention into semantic
sets and apply the per-label rules, then intersect the two candidate sets.
An empty semantic set prunes the patch outright; an empty intersection under
a nonempty semantic set falls back to the semantic set so required streams
are never lost. Step 1 is a cold start: masks are all ones and only the
indicator state advances.

Background keep/drop draws come from a counter-based RNG keyed by
(episode seed, step), indexed by patch, so masks never depend on patch
iteration order and replaying any prefix of an episode reproduces it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .candidates import NONE
from .config import RunConfig
from .errors import IoFailure, MalformedTrace, RateOutOfRange, StateMismatch
from .salience import stage1_candidates, stage1_salience_arrays
from .semantic import (
    SemanticLabel,
    cluster_semantics,
    compute_baselines,
    comprehensive_scores,
    stage2_candidates,
    stage2_salience,
    stage2_salience_arrays,
)
from .smoothing import PrunerState, SalienceReport, raw_passthrough_step, smooth_step
from .trace import EpisodeTrace, StepObservation, stack_step

MASKS_FORMAT = "trimask-masks/1"

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RetentionMask:
    """Final keep/drop flags for both token streams at one step."""

    step_index: int
    mask2d: np.ndarray
    mask3d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask2d", np.asarray(self.mask2d, dtype=bool))
        object.__setattr__(self, "mask3d", np.asarray(self.mask3d, dtype=bool))

    @property
    def num_patches(self) -> int:
        return len(self.mask2d)

    @property
    def retained_total(self) -> int:
        return int(self.mask2d.sum()) + int(self.mask3d.sum())


@dataclass(frozen=True)
class StepStats:
    """Achieved pruning rates and rule accounting for one step."""

    step_index: int
    pr2d: float
    pr3d: float
    retained_total: int
    conflicts_resolved: int
    n_obj: int
    n_rob: int
    n_bg: int


def bg_keep_draws(seed: int, step: int, num_patches: int, keep_prob: float) -> np.ndarray:
    """Background keep decisions for one step, keyed by (seed, step, patch)."""
    key = np.array([seed & _SEED_MASK, step & _SEED_MASK], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.random(num_patches) < keep_prob


def measure_step(obs: StepObservation) -> SalienceReport:
    """Raw per-patch indicator values for one observation."""
    arrays = stack_step(obs)
    m1_2d, m1_3d, s1_deg = stage1_salience_arrays(arrays["f2d"], arrays["f3d"])
    m2_2d, m2_3d, s2_deg = stage2_salience_arrays(arrays["a2d"], arrays["a3d"])
    return SalienceReport(
        step_index=obs.step_index,
        m_s1_2d=m1_2d,
        m_s1_3d=m1_3d,
        m_s2_2d=m2_2d,
        m_s2_3d=m2_3d,
        s1_degenerate=s1_deg,
        s2_degenerate=s2_deg,
    )


def _stats_from_mask(mask: RetentionMask, conflicts: int, histogram: dict) -> StepStats:
    p = mask.num_patches
    return StepStats(
        step_index=mask.step_index,
        pr2d=1.0 - int(mask.mask2d.sum()) / p,
        pr3d=1.0 - int(mask.mask3d.sum()) / p,
        retained_total=mask.retained_total,
        conflicts_resolved=conflicts,
        n_obj=histogram.get(SemanticLabel.OBJ, 0),
        n_rob=histogram.get(SemanticLabel.ROB, 0),
        n_bg=histogram.get(SemanticLabel.BG, 0),
    )


def prune_step(state: PrunerState, obs: StepObservation, config: RunConfig):
    """Advance one step; returns (RetentionMask, StepStats, smoothed report)."""
    if obs.step_index != state.t_seen + 1:
        raise StateMismatch(
            f"observation step {obs.step_index} does not continue state at step {state.t_seen}"
        )
    if obs.num_patches != state.num_patches:
        raise StateMismatch(
            f"observation has {obs.num_patches} patches, state has {state.num_patches}"
        )
    raw = measure_step(obs)
    if config.smoothing:
        smoothed = smooth_step(state, raw, config.ema())
    else:
        smoothed = raw_passthrough_step(state, raw)

    p = obs.num_patches
    t = obs.step_index
    if t == 1:
        mask = RetentionMask(t, np.ones(p, dtype=bool), np.ones(p, dtype=bool))
        return mask, _stats_from_mask(mask, 0, {}), smoothed

    arrays = stack_step(obs)
    scores = comprehensive_scores(arrays["a2d"], arrays["a3d"])
    clustering = cluster_semantics(scores, rng_seed=state.seed)
    baselines = compute_baselines([stage2_salience(pp) for pp in obs.patches])
    keep = bg_keep_draws(state.seed, t, p, config.bg_keep_prob)

    thresholds = config.thresholds()
    mask2d = np.zeros(p, dtype=bool)
    mask3d = np.zeros(p, dtype=bool)
    conflicts = 0
    for patch in range(p):
        c1 = stage1_candidates(float(smoothed.m_s1_3d[patch]), thresholds)
        c2 = stage2_candidates(
            SemanticLabel(int(clustering.labels[patch])),
            float(smoothed.m_s2_2d[patch]),
            float(smoothed.m_s2_3d[patch]),
            baselines,
            keep_bg=bool(keep[patch]),
            theta_2dext=config.theta_2dext,
            eps_3d=config.eps_3d,
        )
        if c2.empty:
            final = NONE
        else:
            final = c2.intersect(c1)
            if final.empty:
                final = c2
                conflicts += 1
        mask2d[patch] = final.has2d
        mask3d[patch] = final.has3d

    mask = RetentionMask(t, mask2d, mask3d)
    return mask, _stats_from_mask(mask, conflicts, clustering.histogram()), smoothed


def apply_budget(mask: RetentionMask, scores: np.ndarray, target_rate: float) -> RetentionMask:
    """Enforce a global pruning floor of ceil(target_rate * 2P) tokens.

    scores holds one salience scalar per token, 2D tokens first then 3D.
    Already-pruned tokens are never re-added; extra drops take the retained
    tokens in ascending (score, token index) order, so the result is exact
    and deterministic.
    """
    if not (0.0 <= target_rate < 1.0):
        raise RateOutOfRange(f"target rate must lie in [0,1), got {target_rate}")
    p = mask.num_patches
    total = 2 * p
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size != total:
        raise StateMismatch(f"expected {total} token scores, got {scores.size}")
    target_pruned = math.ceil(target_rate * total)
    flat = np.concatenate([mask.mask2d, mask.mask3d])
    current_pruned = total - int(flat.sum())
    if current_pruned >= target_pruned:
        return mask
    need = target_pruned - current_pruned
    retained_idx = np.flatnonzero(flat)
    order = np.argsort(scores[retained_idx], kind="stable")
    flat = flat.copy()
    flat[retained_idx[order[:need]]] = False
    return RetentionMask(mask.step_index, flat[:p], flat[p:])


def prune_episode(trace: EpisodeTrace, config: RunConfig):
    """Run the full pipeline over an episode.

    Returns a list of (RetentionMask, StepStats) in step order. When the
    config carries a budget, the post-pass is applied to every step's mask
    (including the cold start) with the smoothed feature-share of each
    token's own modality as its salience score, and the stats reflect the
    final masks.
    """
    seed = config.resolved_seed()
    state = PrunerState(num_patches=trace.num_patches, seed=seed)
    results = []
    for obs in trace.steps:
        mask, stats, report = prune_step(state, obs, config)
        if config.budget is not None:
            scores = np.concatenate([report.m_s1_2d, report.m_s1_3d])
            budgeted = apply_budget(mask, scores, config.budget)
            if budgeted is not mask:
                mask = budgeted
                stats = replace(
                    stats,
                    pr2d=1.0 - int(mask.mask2d.sum()) / mask.num_patches,
                    pr3d=1.0 - int(mask.mask3d.sum()) / mask.num_patches,
                    retained_total=mask.retained_total,
                )
        results.append((mask, stats))
    return results


def mask_flip_count(masks) -> int:
    """Total per-(patch, stream) keep/drop changes between consecutive steps."""
    flips = 0
    for prev, cur in zip(masks, masks[1:]):
        flips += int((prev.mask2d != cur.mask2d).sum())
        flips += int((prev.mask3d != cur.mask3d).sum())
    return flips


def mask_flip_rate(masks) -> float:
    """Flips normalized by the (T-1) * 2P flip opportunities; 0 for T < 2."""
    if len(masks) < 2:
        return 0.0
    total = (len(masks) - 1) * 2 * masks[0].num_patches
    return mask_flip_count(masks) / total


def save_masks(episode_id: str, num_patches: int, results, path) -> None:
    """Write masks and per-step stats as JSONL (header line first)."""
    lines = [
        json.dumps({"format": MASKS_FORMAT, "episode_id": episode_id, "num_patches": num_patches})
    ]
    for mask, stats in results:
        lines.append(
            json.dumps(
                {
                    "t": mask.step_index,
                    "mask2d": [int(b) for b in mask.mask2d],
                    "mask3d": [int(b) for b in mask.mask3d],
                    "pr2d": stats.pr2d,
                    "pr3d": stats.pr3d,
                    "conflicts": stats.conflicts_resolved,
                }
            )
        )
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write masks to {path}: {exc}") from exc


@dataclass(frozen=True)
class MasksFile:
    episode_id: str
    num_patches: int
    masks: tuple[RetentionMask, ...]
    pr2d: tuple[float, ...]
    pr3d: tuple[float, ...]
    conflicts: tuple[int, ...]


def load_masks(path) -> MasksFile:
    """Parse a masks JSONL file back into arrays."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read masks from {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MalformedTrace(f"{path}: empty masks file")
    header = json.loads(lines[0])
    if header.get("format") != MASKS_FORMAT:
        raise MalformedTrace(f"{path}:1: unsupported format {header.get('format')!r}")
    num_patches = header["num_patches"]
    masks, pr2d, pr3d, conflicts = [], [], [], []
    for i, line in enumerate(lines[1:], start=2):
        record = json.loads(line)
        for key in ("t", "mask2d", "mask3d", "pr2d", "pr3d", "conflicts"):
            if key not in record:
                raise MalformedTrace(f"{path}:{i}: missing key {key!r}")
        if len(record["mask2d"]) != num_patches or len(record["mask3d"]) != num_patches:
            raise MalformedTrace(f"{path}:{i}: mask length differs from header num_patches")
        masks.append(
            RetentionMask(
                record["t"],
                np.asarray(record["mask2d"], dtype=bool),
                np.asarray(record["mask3d"], dtype=bool),
            )
        )
        pr2d.append(float(record["pr2d"]))
        pr3d.append(float(record["pr3d"]))
        conflicts.append(int(record["conflicts"]))
    return MasksFile(
        episode_id=header["episode_id"],
        num_patches=num_patches,
        masks=tuple(masks),
        pr2d=tuple(pr2d),
        pr3d=tuple(pr3d),
        conflicts=tuple(conflicts),
    )
