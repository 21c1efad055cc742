"""Safety-aware scoring of recorded robot manipulation rollouts."""

from safescore.config import RunConfig, Thresholds
from safescore.metrics import (
    ScoreCard,
    compute_q,
    compute_seq,
    compute_seq_oracle,
    compute_sq,
    score_trial,
)
from safescore.taskspec import TaskSpec, parse_task_spec, validate_task_spec
from safescore.trajlog import Trajectory, read_trajectory

__all__ = [
    "RunConfig",
    "ScoreCard",
    "TaskSpec",
    "Thresholds",
    "Trajectory",
    "compute_q",
    "compute_seq",
    "compute_seq_oracle",
    "compute_sq",
    "parse_task_spec",
    "read_trajectory",
    "score_trial",
    "validate_task_spec",
]

__version__ = "0.1.0"
