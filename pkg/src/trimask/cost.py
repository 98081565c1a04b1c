"""Quadratic transformer-step cost model and the speedup estimate it implies.

One step over n retained tokens costs c_fix + c_lin*n + c_attn*n^2, the
square coming from token-pair attention. The pruning machinery itself is
charged a flat c_method per step. Predicted speedup for an episode is the
unpruned cost sum over the pruned cost sum. Default coefficients are scaled
so an unpruned 512-token step costs about 2.5 time units with a 0.061-unit
method charge; they are plausibility numbers, not hardware timings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

DEFAULT_C_FIX = 0.133
DEFAULT_C_LIN = 0.4 / 512
DEFAULT_C_ATTN = 2.0 / (512 * 512)
DEFAULT_C_METHOD = 0.061


@dataclass(frozen=True)
class CostModel:
    """Per-step cost coefficients; the attention exponent is fixed at 2."""

    c_fix: float = DEFAULT_C_FIX
    c_lin: float = DEFAULT_C_LIN
    c_attn: float = DEFAULT_C_ATTN
    c_method: float = DEFAULT_C_METHOD
    attention_exponent: int = 2

    def __post_init__(self):
        for name in ("c_fix", "c_lin", "c_attn", "c_method"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ConfigError(f"{name} must be finite and >= 0, got {value}")
        if self.attention_exponent != 2:
            raise ConfigError("attention_exponent is fixed at 2")

    def step_cost(self, n_tokens: int) -> float:
        """Cost of one model step over n_tokens retained tokens."""
        n = float(n_tokens)
        return self.c_fix + self.c_lin * n + self.c_attn * n * n


def predict_speedup(masks, model: CostModel, baseline_tokens: int) -> float:
    """Unpruned-over-pruned episode cost ratio.

    masks is any iterable with mask2d/mask3d arrays per step; baseline_tokens
    is the full dual-stream token count (2P). An empty episode yields 1.0;
    a zero pruned-cost denominator with nonzero baseline yields inf.
    """
    retained = [int(m.mask2d.sum()) + int(m.mask3d.sum()) for m in masks]
    if not retained:
        return 1.0
    baseline = len(retained) * model.step_cost(baseline_tokens)
    pruned = sum(model.step_cost(n) + model.c_method for n in retained)
    if pruned == 0.0:
        return 1.0 if baseline == 0.0 else math.inf
    return baseline / pruned
