"""Temporal smoothing of the per-patch salience indicators.

Each (patch, indicator) pair owns a one-state recurrence: the first
observation passes through untouched, observations before the window fills
update a running mean, and from the window boundary on a fixed-momentum
exponential moving average takes over. Both phases are one-state, so no
window buffer is kept; the phase is a pure function of the step counter.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    IoFailure,
    MalformedTrace,
    OutOfOrderUpdate,
    PatchCountChanged,
)

INDICATORS = ("m_s1_2d", "m_s1_3d", "m_s2_2d", "m_s2_3d")

STATE_FORMAT = "trimask-state/1"

_TRACK_ID = re.compile(r"^(?P<indicator>[a-z0-9_]+)\[(?P<patch>\d+)\]$")


@dataclass(frozen=True)
class EmaConfig:
    """Momentum and window size for the smoothing recurrences."""

    beta: float = 0.85
    k: int = 7

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ConfigError(f"beta must lie strictly inside (0,1), got {self.beta}")
        if self.k < 2:
            raise ConfigError(f"window size k must be >= 2, got {self.k}")


@dataclass(frozen=True)
class IndicatorTrack:
    """Smoothed state of one indicator at one patch."""

    indicator: str
    patch: int
    x_hat: float | None = None
    t_seen: int = 0

    @property
    def track_id(self) -> str:
        return f"{self.indicator}[{self.patch}]"


def ema_update(track: IndicatorTrack, x_t: float, config: EmaConfig, t: int | None = None) -> IndicatorTrack:
    """Consume one observation and return the advanced track.

    The explicit step index t, when given, must equal the track's next step;
    a regressed or skipped counter raises OutOfOrderUpdate.
    """
    next_t = track.t_seen + 1
    if t is not None and t != next_t:
        raise OutOfOrderUpdate(
            f"track {track.track_id}: expected step {next_t}, got {t}"
        )
    if not np.isfinite(x_t):
        raise ConfigError(f"track {track.track_id}: observation at step {next_t} is not finite")
    # Delta forms of the running mean and the fixed-momentum update: same
    # recurrences, but a constant input is an exact fixed point in floats.
    if next_t == 1:
        x_hat = float(x_t)
    elif next_t < config.k:
        x_hat = track.x_hat + (x_t - track.x_hat) / next_t
    else:
        x_hat = track.x_hat + (1.0 - config.beta) * (x_t - track.x_hat)
    return IndicatorTrack(track.indicator, track.patch, float(x_hat), next_t)


@dataclass
class SalienceReport:
    """Per-patch values of all four indicators at one step.

    Holds either raw measurements (as produced from an observation) or their
    smoothed counterparts (as produced by smooth_step). The degenerate flags
    mark zero-denominator patches for the feature-share and attention-share
    computations respectively.
    """

    step_index: int
    m_s1_2d: np.ndarray
    m_s1_3d: np.ndarray
    m_s2_2d: np.ndarray
    m_s2_3d: np.ndarray
    s1_degenerate: np.ndarray | None = None
    s2_degenerate: np.ndarray | None = None

    def __post_init__(self):
        if self.s1_degenerate is None:
            self.s1_degenerate = np.zeros(self.num_patches, dtype=bool)
        if self.s2_degenerate is None:
            self.s2_degenerate = np.zeros(self.num_patches, dtype=bool)

    @property
    def num_patches(self) -> int:
        return len(self.m_s1_2d)

    def indicator(self, name: str) -> np.ndarray:
        if name not in INDICATORS:
            raise KeyError(name)
        return getattr(self, name)


class PrunerState:
    """Step counter, per-(patch, indicator) smoothed values, and the RNG seed.

    Single-writer: one episode advances one state strictly in step order.
    """

    def __init__(self, num_patches: int, seed: int):
        if num_patches < 1:
            raise ConfigError(f"num_patches must be >= 1, got {num_patches}")
        if seed < 0:
            raise ConfigError(f"seed must be >= 0, got {seed}")
        self.num_patches = num_patches
        self.seed = seed
        self.t_seen = 0
        self.values: dict[str, np.ndarray] = {
            name: np.zeros(num_patches, dtype=np.float64) for name in INDICATORS
        }

    def track(self, indicator: str, patch: int) -> IndicatorTrack:
        x_hat = float(self.values[indicator][patch]) if self.t_seen >= 1 else None
        return IndicatorTrack(indicator, patch, x_hat, self.t_seen)

    def tracks(self):
        for name in INDICATORS:
            for p in range(self.num_patches):
                yield self.track(name, p)

    def _check_report(self, raw: SalienceReport) -> int:
        if raw.num_patches != self.num_patches:
            raise PatchCountChanged(
                f"report has {raw.num_patches} patches, state has {self.num_patches}"
            )
        next_t = self.t_seen + 1
        if raw.step_index != next_t:
            raise OutOfOrderUpdate(f"expected step {next_t}, got step {raw.step_index}")
        return next_t

    def to_json(self) -> str:
        tracks = []
        for name in INDICATORS:
            for p in range(self.num_patches):
                tracks.append(
                    {
                        "id": f"{name}[{p}]",
                        "x_hat": float(self.values[name][p]) if self.t_seen >= 1 else None,
                        "t_seen": self.t_seen,
                    }
                )
        return json.dumps(
            {
                "format": STATE_FORMAT,
                "num_patches": self.num_patches,
                "seed": self.seed,
                "t_seen": self.t_seen,
                "tracks": tracks,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PrunerState":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedTrace(f"invalid state JSON: {exc}") from exc
        if obj.get("format") != STATE_FORMAT:
            raise MalformedTrace(f"unsupported state format {obj.get('format')!r}")
        try:
            state = cls(num_patches=obj["num_patches"], seed=obj["seed"])
            state.t_seen = int(obj["t_seen"])
            tracks = obj["tracks"]
        except (KeyError, TypeError) as exc:
            raise MalformedTrace(f"state JSON is missing a required field: {exc}") from exc
        for entry in tracks:
            match = _TRACK_ID.match(entry.get("id", ""))
            if match is None or match["indicator"] not in INDICATORS:
                raise MalformedTrace(f"unknown track id {entry.get('id')!r}")
            patch = int(match["patch"])
            if patch >= state.num_patches:
                raise MalformedTrace(f"track id {entry['id']!r} exceeds patch count")
            if entry.get("t_seen") != state.t_seen:
                raise MalformedTrace(f"track {entry['id']!r} disagrees with state step counter")
            if state.t_seen >= 1:
                state.values[match["indicator"]][patch] = float(entry["x_hat"])
        return state

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.to_json() + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write state to {path}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "PrunerState":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read state from {path}: {exc}") from exc
        return cls.from_json(text)


def smooth_step(state: PrunerState, raw: SalienceReport, config: EmaConfig) -> SalienceReport:
    """Advance the state by one step and return the smoothed report.

    Applies the same phase rules as ema_update to every (patch, indicator)
    pair at once; the report's degenerate flags pass through untouched.
    """
    t = state._check_report(raw)
    smoothed = {}
    for name in INDICATORS:
        x = np.asarray(raw.indicator(name), dtype=np.float64)
        prev = state.values[name]
        if t == 1:
            new = x.copy()
        elif t < config.k:
            new = prev + (x - prev) / t
        else:
            new = prev + (1.0 - config.beta) * (x - prev)
        state.values[name] = new
        smoothed[name] = new.copy()
    state.t_seen = t
    return SalienceReport(
        step_index=raw.step_index,
        s1_degenerate=raw.s1_degenerate.copy(),
        s2_degenerate=raw.s2_degenerate.copy(),
        **smoothed,
    )


def raw_passthrough_step(state: PrunerState, raw: SalienceReport) -> SalienceReport:
    """Advance the state with smoothing disabled: tracks follow raw values."""
    t = state._check_report(raw)
    for name in INDICATORS:
        state.values[name] = np.asarray(raw.indicator(name), dtype=np.float64).copy()
    state.t_seen = t
    return SalienceReport(
        step_index=raw.step_index,
        m_s1_2d=raw.m_s1_2d.copy(),
        m_s1_3d=raw.m_s1_3d.copy(),
        m_s2_2d=raw.m_s2_2d.copy(),
        m_s2_3d=raw.m_s2_3d.copy(),
        s1_degenerate=raw.s1_degenerate.copy(),
        s2_degenerate=raw.s2_degenerate.copy(),
    )
