"""coadapt: cooperative multi-agent RL for adaptive user interfaces.

A simulated hierarchical user agent and a goal-agnostic interface agent are
trained together in shared UI environments; trained interface policies can be
evaluated in silico or served to real people through a session service.
"""

__version__ = "0.1.0"

from .behavior import DecisionTimeParams, MotorCommand, MotorOutcome, WhoParams, decision_time, sample_endpoint, who_movement_time
from .core import (
    EnvState,
    GoalVector,
    HistoryStack,
    InputObservation,
    RewardConfig,
    SlotAssignment,
    StepOutcome,
    advance,
    goal_difference,
    ordered_goal_difference,
    reset,
    user_reward,
)
from .curriculum import CurriculumState, curriculum_update, sample_initial_differences
from .config import RunConfig, default_config, load_config
from .tasks import TASK_IDS, get_task

__all__ = [
    "DecisionTimeParams",
    "MotorCommand",
    "MotorOutcome",
    "WhoParams",
    "decision_time",
    "sample_endpoint",
    "who_movement_time",
    "EnvState",
    "GoalVector",
    "HistoryStack",
    "InputObservation",
    "RewardConfig",
    "SlotAssignment",
    "StepOutcome",
    "advance",
    "goal_difference",
    "ordered_goal_difference",
    "reset",
    "user_reward",
    "CurriculumState",
    "curriculum_update",
    "sample_initial_differences",
    "RunConfig",
    "default_config",
    "load_config",
    "TASK_IDS",
    "get_task",
    "__version__",
]
