"""Episode traces: per-step, per-patch feature and attention vectors.

A trace is the engine's only input: for every step of an episode it carries,
per patch, the 2D/3D feature vectors (whose L1 norms drive the feature-share
metric) and the 2D/3D attention vectors (which drive semantic clustering and
the attention decomposition).

On disk a trace is UTF-8 JSON Lines: a header object followed by one object
per step (see TRACE_FORMAT). Numbers are serialized as shortest round-trip
decimals, so save -> load is the identity on every finite float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    IoFailure,
    MalformedTrace,
    NonConsecutiveSteps,
    NonFiniteValue,
)

TRACE_FORMAT = "trimask-trace/1"

DEFAULT_NUM_PATCHES = 256
DEFAULT_FEAT_DIM = 32
DEFAULT_ATTN_DIM = 16


def _freeze(vec, name: str, *, nonnegative: bool = False) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatch(f"{name} must be a nonempty 1-D vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteValue(f"{name} contains a non-finite entry")
    if nonnegative and (arr < 0).any():
        raise MalformedTrace(f"{name} contains a negative attention score")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PatchObservation:
    """One patch's 2D/3D feature vectors and 2D/3D attention vectors."""

    patch_id: int
    f2d: np.ndarray
    f3d: np.ndarray
    a2d: np.ndarray
    a3d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f2d", _freeze(self.f2d, "f2d"))
        object.__setattr__(self, "f3d", _freeze(self.f3d, "f3d"))
        object.__setattr__(self, "a2d", _freeze(self.a2d, "a2d", nonnegative=True))
        object.__setattr__(self, "a3d", _freeze(self.a3d, "a3d", nonnegative=True))
        if self.patch_id < 0:
            raise MalformedTrace(f"patch_id must be >= 0, got {self.patch_id}")
        if self.f2d.shape != self.f3d.shape:
            raise DimensionMismatch(
                f"patch {self.patch_id}: f2d has dim {self.f2d.size}, f3d has dim {self.f3d.size}"
            )
        if self.a2d.shape != self.a3d.shape:
            raise DimensionMismatch(
                f"patch {self.patch_id}: a2d has dim {self.a2d.size}, a3d has dim {self.a3d.size}"
            )

    @property
    def feat_dim(self) -> int:
        return self.f2d.size

    @property
    def attn_dim(self) -> int:
        return self.a2d.size


@dataclass(frozen=True)
class StepObservation:
    """All patches observed at one step (step indices start at 1)."""

    step_index: int
    patches: tuple[PatchObservation, ...]

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        if self.step_index < 1:
            raise MalformedTrace(f"step_index must be >= 1, got {self.step_index}")
        if not self.patches:
            raise DimensionMismatch(f"step {self.step_index} has no patches")
        ids = [p.patch_id for p in self.patches]
        if ids != list(range(len(ids))):
            raise MalformedTrace(
                f"step {self.step_index}: patch ids must be exactly 0..{len(ids) - 1} in order, got {ids}"
            )
        fd = {p.feat_dim for p in self.patches}
        ad = {p.attn_dim for p in self.patches}
        if len(fd) != 1 or len(ad) != 1:
            raise DimensionMismatch(
                f"step {self.step_index}: ragged vector dims (feat {sorted(fd)}, attn {sorted(ad)})"
            )

    @property
    def num_patches(self) -> int:
        return len(self.patches)


@dataclass(frozen=True)
class EpisodeTrace:
    """An ordered sequence of step observations with a fixed patch count."""

    episode_id: str
    num_patches: int = DEFAULT_NUM_PATCHES
    steps: tuple[StepObservation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.num_patches < 1:
            raise MalformedTrace(f"num_patches must be >= 1, got {self.num_patches}")
        for i, step in enumerate(self.steps):
            if step.step_index != i + 1:
                raise NonConsecutiveSteps(
                    f"expected step {i + 1}, found step {step.step_index}"
                )
            if step.num_patches != self.num_patches:
                raise DimensionMismatch(
                    f"step {step.step_index} has {step.num_patches} patches, episode declares {self.num_patches}"
                )

    @property
    def num_steps(self) -> int:
        return len(self.steps)

    @property
    def feat_dim(self) -> int:
        return self.steps[0].patches[0].feat_dim if self.steps else DEFAULT_FEAT_DIM

    @property
    def attn_dim(self) -> int:
        return self.steps[0].patches[0].attn_dim if self.steps else DEFAULT_ATTN_DIM


def _vector_list(arr: np.ndarray) -> list[float]:
    return [float(x) for x in arr]


def _patch_record(p: PatchObservation) -> dict:
    return {
        "id": p.patch_id,
        "f2d": _vector_list(p.f2d),
        "f3d": _vector_list(p.f3d),
        "a2d": _vector_list(p.a2d),
        "a3d": _vector_list(p.a3d),
    }


def save_trace(trace: EpisodeTrace, path) -> None:
    """Write a validated trace as JSONL; round-trips bit-exactly through load_trace."""
    header = {
        "format": TRACE_FORMAT,
        "episode_id": trace.episode_id,
        "num_patches": trace.num_patches,
        "feat_dim": trace.feat_dim,
        "attn_dim": trace.attn_dim,
    }
    lines = [json.dumps(header)]
    for step in trace.steps:
        lines.append(
            json.dumps({"t": step.step_index, "patches": [_patch_record(p) for p in step.patches]})
        )
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write trace to {path}: {exc}") from exc


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise MalformedTrace(f"{where}: missing key {key!r}")
    return record[key]


def _float_vector(value, where: str) -> np.ndarray:
    ok = isinstance(value, list) and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    )
    if not ok:
        raise MalformedTrace(f"{where}: expected a list of numbers")
    return np.asarray(value, dtype=np.float64)


def load_trace(path) -> EpisodeTrace:
    """Parse and fully validate a JSONL trace file.

    Raises MalformedTrace / DimensionMismatch / NonFiniteValue /
    NonConsecutiveSteps with the offending line in the message; never returns
    a partially valid trace.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read trace from {path}: {exc}") from exc

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MalformedTrace(f"{path}: empty file, expected a header line")

    def parse(line_no: int) -> dict:
        try:
            obj = json.loads(lines[line_no])
        except json.JSONDecodeError as exc:
            raise MalformedTrace(f"{path}:{line_no + 1}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise MalformedTrace(f"{path}:{line_no + 1}: expected a JSON object")
        return obj

    header = parse(0)
    where = f"{path}:1"
    if _require(header, "format", where) != TRACE_FORMAT:
        raise MalformedTrace(f"{where}: unsupported format {header['format']!r}")
    episode_id = _require(header, "episode_id", where)
    num_patches = _require(header, "num_patches", where)
    feat_dim = _require(header, "feat_dim", where)
    attn_dim = _require(header, "attn_dim", where)
    if not isinstance(episode_id, str):
        raise MalformedTrace(f"{where}: episode_id must be a string")
    for name, value in (("num_patches", num_patches), ("feat_dim", feat_dim), ("attn_dim", attn_dim)):
        if not isinstance(value, int) or value < 1:
            raise MalformedTrace(f"{where}: {name} must be a positive integer")

    steps: list[StepObservation] = []
    for line_no in range(1, len(lines)):
        record = parse(line_no)
        where = f"{path}:{line_no + 1}"
        t = _require(record, "t", where)
        if not isinstance(t, int):
            raise MalformedTrace(f"{where}: step index 't' must be an integer")
        if t != line_no:
            raise NonConsecutiveSteps(f"{where}: expected step {line_no}, found step {t}")
        raw_patches = _require(record, "patches", where)
        if not isinstance(raw_patches, list):
            raise MalformedTrace(f"{where}: 'patches' must be a list")
        if len(raw_patches) != num_patches:
            raise DimensionMismatch(
                f"{where}: step {t} has {len(raw_patches)} patches, header declares {num_patches}"
            )
        patches = []
        for entry in raw_patches:
            if not isinstance(entry, dict):
                raise MalformedTrace(f"{where}: patch entries must be objects")
            pid = _require(entry, "id", where)
            vectors = {k: _float_vector(_require(entry, k, where), f"{where} patch {pid} {k}")
                       for k in ("f2d", "f3d", "a2d", "a3d")}
            for k in ("f2d", "f3d"):
                if vectors[k].size != feat_dim:
                    raise DimensionMismatch(
                        f"{where}: patch {pid} {k} has dim {vectors[k].size}, header declares {feat_dim}"
                    )
            for k in ("a2d", "a3d"):
                if vectors[k].size != attn_dim:
                    raise DimensionMismatch(
                        f"{where}: patch {pid} {k} has dim {vectors[k].size}, header declares {attn_dim}"
                    )
            try:
                patches.append(PatchObservation(patch_id=pid, **vectors))
            except (MalformedTrace, DimensionMismatch, NonFiniteValue) as exc:
                raise type(exc)(f"{where}: {exc}") from exc
        try:
            steps.append(StepObservation(step_index=t, patches=patches))
        except (MalformedTrace, DimensionMismatch) as exc:
            raise type(exc)(f"{where}: {exc}") from exc

    return EpisodeTrace(episode_id=episode_id, num_patches=num_patches, steps=tuple(steps))


def step_from_arrays(step_index: int, f2d, f3d, a2d, a3d) -> StepObservation:
    """Build a StepObservation from (P, D) matrices, one row per patch."""
    f2d, f3d, a2d, a3d = (np.asarray(m, dtype=np.float64) for m in (f2d, f3d, a2d, a3d))
    shapes = {m.shape[0] for m in (f2d, f3d, a2d, a3d)}
    if len(shapes) != 1:
        raise DimensionMismatch(f"row counts disagree: {sorted(shapes)}")
    patches = [
        PatchObservation(patch_id=p, f2d=f2d[p], f3d=f3d[p], a2d=a2d[p], a3d=a3d[p])
        for p in range(f2d.shape[0])
    ]
    return StepObservation(step_index=step_index, patches=patches)


def stack_step(obs: StepObservation) -> dict[str, np.ndarray]:
    """Stack one step's patch vectors into (P, D) matrices keyed by field name."""
    return {
        name: np.stack([getattr(p, name) for p in obs.patches])
        for name in ("f2d", "f3d", "a2d", "a3d")
    }
