"""Typed errors raised by the pruning engine.

Every failure mode surfaced by the public API is one of these classes, so
callers (and the CLI) can map failures to diagnostics without string matching.
"""


class TrimaskError(Exception):
    """Base class for all engine errors."""


class MalformedTrace(TrimaskError):
    """Trace file violates the JSONL schema (message carries line/step location)."""


class DimensionMismatch(TrimaskError):
    """Ragged vectors or inconsistent patch counts across steps."""


class NonFiniteValue(TrimaskError):
    """A feature or attention entry is NaN or infinite."""


class NonConsecutiveSteps(TrimaskError):
    """Step indices are not 1, 2, 3, ... without gaps."""


class IoFailure(TrimaskError):
    """Underlying file read/write failed."""


class InvalidThresholds(TrimaskError):
    """Dual-threshold pair violates 0 < tau2d < tau3d < 1."""


class TooFewPatches(TrimaskError):
    """Semantic clustering needs at least 3 patches."""


class AllDegenerate(TrimaskError):
    """Every patch has a zero attention denominator; no baselines exist."""


class OutOfOrderUpdate(TrimaskError):
    """A smoothing update arrived with a regressed or skipped step counter."""


class PatchCountChanged(TrimaskError):
    """A report's patch count differs from the smoothing state's."""


class StateMismatch(TrimaskError):
    """Observation step index does not continue the pruner state."""


class RateOutOfRange(TrimaskError):
    """Budget target rate is outside [0, 1)."""


class InvalidSpec(TrimaskError):
    """Synthetic scenario spec violates its invariants."""


class NonSquarePatchCount(TrimaskError):
    """Mask-grid export requires a perfect-square patch count."""


class ConfigError(TrimaskError):
    """Run configuration failed validation (message names the field)."""
