"""Synthetic episode generator with planted ground truth.

Scenarios plant three semantic regions (target object, robot body,
background) with ordered comprehensive-attention levels, per-region feature
share and attention-composition targets, optional per-step drift, and
Gaussian noise on the attention levels. Construction is exact: feature
vectors realize the planted 3D feature share, and attention vectors are
built on disjoint coordinate supports so the parallel/orthogonal split and
every share metric come out at their planted values up to float rounding.
Ground truth (region labels plus realized per-step planted values) is
emitted next to every trace so evaluations never re-derive it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import InvalidSpec, IoFailure, MalformedTrace
from .trace import EpisodeTrace, StepObservation, step_from_arrays

GROUND_TRUTH_LABELS = ("obj", "rob", "bg")

_LEVEL_FLOOR = 1e-6
_SHARE_EPS = 1e-3


@dataclass(frozen=True)
class RegionSpec:
    """Planted parameters for one semantic region.

    frac: fraction of patches; attn_level: comprehensive attention mass per
    patch; m_s1_3d: 3D share of the feature mass; ortho_frac: fraction of
    the 3D attention mass orthogonal to the 2D attention; attn_3d_share:
    3D fraction of the attention mass split between the streams.
    """

    frac: float
    attn_level: float
    m_s1_3d: float
    ortho_frac: float
    attn_3d_share: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.frac <= 1.0):
            raise InvalidSpec(f"region frac must lie in [0,1], got {self.frac}")
        if not (self.attn_level > 0.0 and math.isfinite(self.attn_level)):
            raise InvalidSpec(f"attn_level must be finite and > 0, got {self.attn_level}")
        if not (0.0 < self.m_s1_3d < 1.0):
            raise InvalidSpec(f"m_s1_3d must lie in (0,1), got {self.m_s1_3d}")
        if not (0.0 <= self.ortho_frac <= 1.0):
            raise InvalidSpec(f"ortho_frac must lie in [0,1], got {self.ortho_frac}")
        if not (0.0 < self.attn_3d_share < 1.0):
            raise InvalidSpec(f"attn_3d_share must lie in (0,1), got {self.attn_3d_share}")


@dataclass(frozen=True)
class DriftSpec:
    """Per-step modulation of the planted region parameters.

    kind 'linear' ramps from 0 to amplitude across the episode; 'sine'
    oscillates with the given period in steps. The modulation is added to
    the unit-interval quantities (m_s1_3d, ortho_frac, both clipped) and
    applied relatively to the attention levels.
    """

    kind: str = "none"
    amplitude: float = 0.0
    period: float = 8.0

    def __post_init__(self):
        if self.kind not in ("none", "linear", "sine"):
            raise InvalidSpec(f"drift kind must be none|linear|sine, got {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise InvalidSpec(f"drift amplitude must be finite, got {self.amplitude}")
        if self.period <= 0.0:
            raise InvalidSpec(f"drift period must be > 0, got {self.period}")

    def factor(self, t: int, num_steps: int) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "linear":
            return self.amplitude * (t - 1) / max(num_steps - 1, 1)
        return self.amplitude * math.sin(2.0 * math.pi * (t - 1) / self.period)


@dataclass(frozen=True)
class ScenarioSpec:
    """Full description of a synthetic episode."""

    obj: RegionSpec
    rob: RegionSpec
    bg: RegionSpec
    episode_id: str = "synthetic"
    num_patches: int = 256
    num_steps: int = 8
    feat_dim: int = 32
    attn_dim: int = 16
    drift: DriftSpec = field(default_factory=DriftSpec)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        total = self.obj.frac + self.rob.frac + self.bg.frac
        if abs(total - 1.0) > 1e-9:
            raise InvalidSpec(f"region fractions must sum to 1, got {total}")
        if not (self.obj.attn_level > self.rob.attn_level > self.bg.attn_level > 0.0):
            raise InvalidSpec(
                "attention levels must be strictly ordered obj > rob > bg > 0, got "
                f"{self.obj.attn_level}, {self.rob.attn_level}, {self.bg.attn_level}"
            )
        if self.noise_sigma < 0.0:
            raise InvalidSpec(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.num_patches < 3:
            raise InvalidSpec(f"num_patches must be >= 3, got {self.num_patches}")
        if self.num_steps < 0:
            raise InvalidSpec(f"num_steps must be >= 0, got {self.num_steps}")
        if self.feat_dim < 1 or self.attn_dim < 2:
            raise InvalidSpec(
                f"need feat_dim >= 1 and attn_dim >= 2, got {self.feat_dim}, {self.attn_dim}"
            )
        if self.seed < 0:
            raise InvalidSpec(f"seed must be >= 0, got {self.seed}")

    def region_counts(self) -> tuple[int, int, int]:
        n_obj = round(self.obj.frac * self.num_patches)
        n_rob = round(self.rob.frac * self.num_patches)
        n_bg = self.num_patches - n_obj - n_rob
        if n_bg < 0:
            raise InvalidSpec("region fractions round to more patches than available")
        return n_obj, n_rob, n_bg

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown scenario fields: {sorted(unknown)}")
        parsed = dict(data)
        for name in ("obj", "rob", "bg"):
            if name not in parsed:
                raise InvalidSpec(f"scenario is missing the {name!r} region")
            if not isinstance(parsed[name], dict):
                raise InvalidSpec(f"region {name!r} must be an object")
            try:
                parsed[name] = RegionSpec(**parsed[name])
            except TypeError as exc:
                raise InvalidSpec(f"region {name!r}: {exc}") from exc
        if "drift" in parsed:
            if not isinstance(parsed["drift"], dict):
                raise InvalidSpec("drift must be an object")
            try:
                parsed["drift"] = DriftSpec(**parsed["drift"])
            except TypeError as exc:
                raise InvalidSpec(f"drift: {exc}") from exc
        try:
            return cls(**parsed)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ScenarioSpec":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read scenario from {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidSpec(f"{path}: scenario must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (RegionSpec, DriftSpec)):
                value = {g.name: getattr(value, g.name) for g in fields(value)}
            out[f.name] = value
        return out


@dataclass(frozen=True)
class GroundTruth:
    """Planted region labels and realized per-step indicator values."""

    labels: tuple[str, ...]                 # one of obj|rob|bg per patch
    m_s1_3d: np.ndarray                     # (T, P) planted 3D feature share
    ortho_frac: np.ndarray                  # (T, P) planted orthogonal fraction

    def to_json(self) -> str:
        return json.dumps(
            {
                "labels": list(self.labels),
                "planted": {
                    "m_s1_3d": [[float(x) for x in row] for row in self.m_s1_3d],
                    "ortho_frac": [[float(x) for x in row] for row in self.ortho_frac],
                },
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedTrace(f"invalid ground-truth JSON: {exc}") from exc
        return cls(
            labels=tuple(obj["labels"]),
            m_s1_3d=np.asarray(obj["planted"]["m_s1_3d"], dtype=np.float64),
            ortho_frac=np.asarray(obj["planted"]["ortho_frac"], dtype=np.float64),
        )

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.to_json() + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write ground truth to {path}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "GroundTruth":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read ground truth from {path}: {exc}") from exc
        return cls.from_json(text)


def _scaled_l1(rng: np.random.Generator, dim: int, mass: float, signed: bool) -> np.ndarray:
    """Random vector with L1 norm equal to mass (up to float rounding)."""
    if mass <= 0.0:
        return np.zeros(dim)
    weights = rng.random(dim) + 0.1
    vec = weights * (mass / weights.sum())
    if signed:
        vec = vec * rng.choice((-1.0, 1.0), size=dim)
    return vec


def generate_episode(spec: ScenarioSpec):
    """Produce (EpisodeTrace, GroundTruth) for a scenario.

    Deterministic in spec.seed. Attention vectors place 2D mass on the first
    half of the coordinates and the orthogonal 3D remainder on the second
    half, which keeps the planted parallel/orthogonal split exact.
    """
    rng = np.random.default_rng(spec.seed)
    n_obj, n_rob, n_bg = spec.region_counts()
    regions = [spec.obj] * n_obj + [spec.rob] * n_rob + [spec.bg] * n_bg
    labels = tuple(["obj"] * n_obj + ["rob"] * n_rob + ["bg"] * n_bg)

    half = spec.attn_dim // 2
    p_total = spec.num_patches
    planted_m = np.zeros((spec.num_steps, p_total))
    planted_phi = np.zeros((spec.num_steps, p_total))
    steps: list[StepObservation] = []

    for t in range(1, spec.num_steps + 1):
        shift = spec.drift.factor(t, spec.num_steps)
        f2d = np.zeros((p_total, spec.feat_dim))
        f3d = np.zeros((p_total, spec.feat_dim))
        a2d = np.zeros((p_total, spec.attn_dim))
        a3d = np.zeros((p_total, spec.attn_dim))
        for p, region in enumerate(regions):
            m = float(np.clip(region.m_s1_3d + shift, _SHARE_EPS, 1.0 - _SHARE_EPS))
            phi = float(np.clip(region.ortho_frac + shift, 0.0, 1.0))
            level = region.attn_level * (1.0 + shift) + rng.normal(0.0, spec.noise_sigma)
            level = max(level, _LEVEL_FLOOR)
            g = region.attn_3d_share

            f2d[p] = _scaled_l1(rng, spec.feat_dim, 1.0 - m, signed=True)
            f3d[p] = _scaled_l1(rng, spec.feat_dim, m, signed=True)

            base = _scaled_l1(rng, half, (1.0 - g) * level, signed=False)
            a2d[p, :half] = base
            coeff = (1.0 - phi) * g / (1.0 - g)
            a3d[p, :half] = coeff * base
            a3d[p, half:] = _scaled_l1(rng, spec.attn_dim - half, phi * g * level, signed=False)

            planted_m[t - 1, p] = m
            planted_phi[t - 1, p] = phi
        steps.append(step_from_arrays(t, f2d, f3d, a2d, a3d))

    trace = EpisodeTrace(episode_id=spec.episode_id, num_patches=p_total, steps=tuple(steps))
    truth = GroundTruth(labels=labels, m_s1_3d=planted_m, ortho_frac=planted_phi)
    return trace, truth


def default_spec(seed: int = 0, num_patches: int = 256, num_steps: int = 8) -> ScenarioSpec:
    """2D-dominant tabletop-like scenario: low 3D feature share everywhere,
    robot attention mostly parallel to 2D, object attention rich in
    orthogonal 3D structure."""
    return ScenarioSpec(
        episode_id=f"default-{seed}",
        num_patches=num_patches,
        num_steps=num_steps,
        obj=RegionSpec(frac=0.15, attn_level=10.0, m_s1_3d=0.15, ortho_frac=0.6, attn_3d_share=0.5),
        rob=RegionSpec(frac=0.25, attn_level=4.0, m_s1_3d=0.15, ortho_frac=0.1, attn_3d_share=0.4),
        bg=RegionSpec(frac=0.60, attn_level=0.5, m_s1_3d=0.10, ortho_frac=0.4, attn_3d_share=0.5),
        noise_sigma=0.2,
        seed=seed,
    )


def drifting_spec(seed: int = 0, num_patches: int = 64, num_steps: int = 16) -> ScenarioSpec:
    """Oscillating scenario whose 3D feature share sweeps across both
    retention thresholds each period; exercises temporal stabilization."""
    return ScenarioSpec(
        episode_id=f"drifting-{seed}",
        num_patches=num_patches,
        num_steps=num_steps,
        obj=RegionSpec(frac=0.15, attn_level=10.0, m_s1_3d=0.14, ortho_frac=0.5, attn_3d_share=0.5),
        rob=RegionSpec(frac=0.25, attn_level=4.0, m_s1_3d=0.14, ortho_frac=0.1, attn_3d_share=0.4),
        bg=RegionSpec(frac=0.60, attn_level=0.5, m_s1_3d=0.14, ortho_frac=0.3, attn_3d_share=0.5),
        drift=DriftSpec(kind="sine", amplitude=0.15, period=5.0),
        noise_sigma=0.2,
        seed=seed,
    )
