"""trimask: deterministic token pruning for dual-stream (2D + 3D) visual token grids.

The engine consumes per-step, per-patch feature and attention vectors,
scores each patch's modality salience, clusters patches into semantic sets,
smooths the indicators over time, and fuses the per-stage retention
candidates into binary keep/drop masks for both token streams.
"""

from .candidates import BOTH, NONE, ONLY_2D, ONLY_3D, CandidateSet
from .config import RunConfig
from .cost import CostModel, predict_speedup
from .errors import (
    AllDegenerate,
    ConfigError,
    DimensionMismatch,
    InvalidSpec,
    InvalidThresholds,
    IoFailure,
    MalformedTrace,
    NonConsecutiveSteps,
    NonFiniteValue,
    NonSquarePatchCount,
    OutOfOrderUpdate,
    PatchCountChanged,
    RateOutOfRange,
    StateMismatch,
    TooFewPatches,
    TrimaskError,
)
from .pipeline import (
    RetentionMask,
    StepStats,
    apply_budget,
    bg_keep_draws,
    load_masks,
    mask_flip_count,
    mask_flip_rate,
    measure_step,
    prune_episode,
    prune_step,
    save_masks,
)
from .salience import (
    Stage1Salience,
    Stage1Thresholds,
    salience_percent,
    stage1_candidates,
    stage1_salience,
)
from .semantic import (
    ClusteringResult,
    SemanticBaselines,
    SemanticLabel,
    Stage2Salience,
    cluster_semantics,
    compute_baselines,
    comprehensive_scores,
    decompose_attention,
    kmeans_1d,
    stage2_candidates,
    stage2_salience,
)
from .simulate import (
    DriftSpec,
    GroundTruth,
    RegionSpec,
    ScenarioSpec,
    default_spec,
    drifting_spec,
    generate_episode,
)
from .smoothing import (
    EmaConfig,
    IndicatorTrack,
    PrunerState,
    SalienceReport,
    ema_update,
    smooth_step,
)
from .trace import (
    EpisodeTrace,
    PatchObservation,
    StepObservation,
    load_trace,
    save_trace,
    step_from_arrays,
)

__version__ = "0.1.0"
