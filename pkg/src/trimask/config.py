"""Run configuration: every tunable knob of the pruning pipeline in one place."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .cost import DEFAULT_C_ATTN, DEFAULT_C_FIX, DEFAULT_C_LIN, DEFAULT_C_METHOD, CostModel
from .errors import ConfigError, IoFailure
from .salience import Stage1Thresholds
from .smoothing import EmaConfig

SEED_ENV_VAR = "TRIMASK_SEED"


@dataclass(frozen=True)
class RunConfig:
    """Validated pipeline configuration with the published defaults."""

    tau2d: float = 0.08
    tau3d: float = 0.20
    beta: float = 0.85
    k: int = 7
    theta_2dext: float = 0.95
    eps_3d: float = 0.02
    bg_keep_prob: float = 0.1
    budget: float | None = None
    seed: int | None = None
    smoothing: bool = True
    c_fix: float = DEFAULT_C_FIX
    c_lin: float = DEFAULT_C_LIN
    c_attn: float = DEFAULT_C_ATTN
    c_method: float = DEFAULT_C_METHOD

    def __post_init__(self):
        if not (0.0 < self.tau2d < 1.0):
            raise ConfigError(f"tau2d must lie in (0,1), got {self.tau2d}")
        if not (0.0 < self.tau3d < 1.0):
            raise ConfigError(f"tau3d must lie in (0,1), got {self.tau3d}")
        if self.tau2d >= self.tau3d:
            raise ConfigError(f"tau2d must be strictly below tau3d, got {self.tau2d} >= {self.tau3d}")
        if not (0.0 < self.beta < 1.0):
            raise ConfigError(f"beta must lie strictly inside (0,1), got {self.beta}")
        if not (isinstance(self.k, int) and self.k >= 2):
            raise ConfigError(f"k must be an integer >= 2, got {self.k}")
        if not (0.0 < self.theta_2dext <= 1.0):
            raise ConfigError(f"theta_2dext must lie in (0,1], got {self.theta_2dext}")
        if not (0.0 <= self.eps_3d <= 1.0):
            raise ConfigError(f"eps_3d must lie in [0,1], got {self.eps_3d}")
        if not (0.0 <= self.bg_keep_prob <= 1.0):
            raise ConfigError(f"bg_keep_prob must lie in [0,1], got {self.bg_keep_prob}")
        if self.budget is not None and not (0.0 <= self.budget < 1.0):
            raise ConfigError(f"budget must lie in [0,1), got {self.budget}")
        if self.seed is not None and (not isinstance(self.seed, int) or self.seed < 0):
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed}")
        for name in ("c_fix", "c_lin", "c_attn", "c_method"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ConfigError(f"{name} must be finite and >= 0, got {value}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read config from {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **overrides) -> "RunConfig":
        """Return a copy with the non-None overrides applied (flags beat file)."""
        effective = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **effective) if effective else self

    def resolved_seed(self) -> int:
        """Explicit seed, else the TRIMASK_SEED environment fallback, else 0."""
        if self.seed is not None:
            return self.seed
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            try:
                value = int(env)
            except ValueError as exc:
                raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
            if value < 0:
                raise ConfigError(f"{SEED_ENV_VAR} must be >= 0, got {value}")
            return value
        return 0

    def thresholds(self) -> Stage1Thresholds:
        return Stage1Thresholds(tau2d=self.tau2d, tau3d=self.tau3d)

    def ema(self) -> EmaConfig:
        return EmaConfig(beta=self.beta, k=self.k)

    def cost_model(self) -> CostModel:
        return CostModel(c_fix=self.c_fix, c_lin=self.c_lin, c_attn=self.c_attn, c_method=self.c_method)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
