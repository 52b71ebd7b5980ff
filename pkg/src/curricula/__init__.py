"""Automated curriculum learning: difficulty scoring, task partitioning and bandit scheduling."""

from ._validation import ConfigurationError, CurriculaError, InvalidInputError
from .bandit import Exp3S, RewardMapper, SwUcb, detect_mode, make_bandit, map_reward, window_length
from .curriculum import (
    Batch,
    Curriculum,
    CurriculumPartitioner,
    InsufficientDataError,
    Task,
    partition,
    synthetic_curriculum,
)
from .scheduler import (
    CurriculumScheduler,
    RunConfig,
    RunTrace,
    SchedulerError,
    TraceRecord,
    export_policy_per_epoch,
    run_curriculum,
    self_prediction_gain,
)
from .scoring import (
    AudioSample,
    DifficultyScorer,
    EmbeddingTable,
    ScoredUtterance,
    compression_ratio,
    score_manifest,
    sentence_length,
    sentence_norm,
    synth_noisy_mixture,
)
from .simlearner import SimLearner

__version__ = "0.1.0"
