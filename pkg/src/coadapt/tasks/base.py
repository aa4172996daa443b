"""Task contract shared by the concrete environments.

A task owns its layout geometry, the decoding of raw interface actions into
adaptations, and the semantics of a user click. Everything else (step
ordering, rewards, termination) lives in coadapt.core.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from ..behavior import MotorCommand, MotorOutcome, WhoParams, sample_endpoint, who_movement_time
from ..core import EnvState


@dataclass(frozen=True)
class Box:
    """Axis-aligned square/cube element in normalized coordinates."""

    center: np.ndarray
    width: float

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    def contains(self, point: np.ndarray) -> bool:
        return bool(np.all(np.abs(np.asarray(point) - self.center) <= self.width / 2.0))


class Task(abc.ABC):
    """One concrete environment: geometry, action decoding, click semantics."""

    task_id: str
    n_attr: int
    position_dim: int
    history_length: int = 5
    default_step_limit: int = 30
    # pretty names for clients/traces
    attribute_names: tuple[str, ...] = ()
    item_names: tuple[str, ...] = ()

    # --- episode construction -------------------------------------------------
    @abc.abstractmethod
    def sample_goal(self, rng: np.random.Generator, subset: Optional[Sequence[int]] = None) -> Any: ...

    @abc.abstractmethod
    def initial_input(self, goal: Any, k: int, rng: np.random.Generator) -> Any: ...

    @abc.abstractmethod
    def initial_ui(self, goal: Any, rng: np.random.Generator) -> Any: ...

    @property
    @abc.abstractmethod
    def home(self) -> np.ndarray: ...

    # --- interface side ---------------------------------------------------------
    @property
    @abc.abstractmethod
    def interface_action_dims(self) -> tuple[int, ...]:
        """Sizes of the (multi-)discrete raw interface action."""

    @abc.abstractmethod
    def decode_interface_action(self, raw: Sequence[int], state: EnvState) -> Any: ...

    @abc.abstractmethod
    def apply_adaptation(self, state: EnvState, adaptation: Any) -> EnvState: ...

    @abc.abstractmethod
    def static_adaptation(self, state: EnvState) -> Any:
        """The non-adaptive baseline's adaptation for this step."""

    @abc.abstractmethod
    def oracle_adaptation(self, state: EnvState) -> Any:
        """Goal-aware upper-bound adaptation (evaluation only)."""

    def noop_adaptation(self, state: EnvState) -> Any:
        return None

    # Layout-shaped tasks draw their random baseline once per episode (a
    # random layout held for the whole trial); consumable adaptations
    # (suggestions, object moves) are re-drawn every step.
    random_per_episode: bool = False

    def random_interface_action(self, rng: np.random.Generator) -> tuple[int, ...]:
        return tuple(int(rng.integers(0, d)) for d in self.interface_action_dims)

    def random_adaptation_raw(self, state: EnvState, rng: np.random.Generator) -> Optional[tuple[int, ...]]:
        """Raw action for the random baseline this step; None = keep layout."""
        if self.random_per_episode and state.step_count > 0:
            return None
        return self.random_interface_action(rng)

    # --- user side ----------------------------------------------------------------
    @property
    @abc.abstractmethod
    def n_user_actions(self) -> int: ...

    @abc.abstractmethod
    def n_choices(self, state: EnvState) -> int:
        """Number of selectable targets currently visible (decision time)."""

    @abc.abstractmethod
    def target_box(self, state: EnvState, user_target: int) -> Box:
        """Geometry of the element the user aims at."""

    @abc.abstractmethod
    def resolve_click(self, state: EnvState, user_target: int, motor: MotorOutcome) -> tuple[EnvState, dict]:
        """Apply click semantics; returns the updated state and
        {"element": clicked element id or None, "actions": action count}."""

    @abc.abstractmethod
    def is_success(self, state: EnvState) -> bool: ...

    @abc.abstractmethod
    def goal_difference(self, state: EnvState) -> float: ...

    # --- observation encodings -------------------------------------------------------
    @abc.abstractmethod
    def encode_input(self, state: EnvState) -> np.ndarray: ...

    @abc.abstractmethod
    def encode_goal(self, state: EnvState) -> np.ndarray: ...

    @abc.abstractmethod
    def encode_ui(self, state: EnvState) -> np.ndarray: ...

    @property
    @abc.abstractmethod
    def history_classes(self) -> int: ...

    # --- motor execution ---------------------------------------------------------------
    uses_learned_motor: bool = False

    def plan_motor(
        self,
        state: EnvState,
        user_target: int,
        who: WhoParams,
        rng: np.random.Generator,
        command: Optional[MotorCommand] = None,
    ) -> MotorOutcome:
        """Sample the pointing movement toward the chosen element.

        Without an explicit command, the analytic controller aims at the
        element center with spread = width / 6.
        """
        box = self.target_box(state, user_target)
        if command is None:
            command = MotorCommand(mu=box.center, sigma=box.width / 6.0)
        return sample_endpoint(command, box.center, box.width, state.position, who, rng)

    # --- misc helpers -----------------------------------------------------------------
    def movement_time_between(self, who: WhoParams, a: np.ndarray, b: np.ndarray, width: float) -> float:
        d = float(np.linalg.norm(np.asarray(b, dtype=np.float64) - np.asarray(a, dtype=np.float64)))
        return who_movement_time(who, d, width / 6.0)

    def scene_snapshot(self, state: EnvState) -> dict:
        """JSON-ready scene description for clients and traces."""
        return {"task": self.task_id}

    def click_targets(self, state: EnvState) -> dict[str, tuple[int, np.ndarray]]:
        """Human-clickable elements: id -> (user action index, click point).

        Empty for tasks that are not served to humans.
        """
        return {}

    def optimal_path_length(self, state: EnvState) -> int:
        """Minimum number of user actions to finish from this state."""
        return 1
