"""Shared environment contract for all tasks.

States are immutable values; `apply_interface`, `resolve_user`, `advance` and
`reset` are pure functions of (state, actions, rng), so any number of rollout
workers can run environments concurrently without shared mutable state.

A joint step is ordered: interface adaptation first, then the user's
high-level target choice, then the low-level motor execution; both agents'
rewards are computed after the motor action and are equal by definition.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Optional, Sequence

import numpy as np

from .behavior import DecisionTimeParams, MotorOutcome, decision_time
from .curriculum import CurriculumState, sample_initial_differences

if TYPE_CHECKING:
    from .tasks.base import Task


class ContractError(RuntimeError):
    """A caller violated an operation precondition."""


class ConfigurationError(ValueError):
    """An environment or run configuration is unusable."""


def readonly(arr: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GoalVector:
    """One-hot-per-attribute encoding of a desired task state."""

    bits: np.ndarray
    n_attr: int
    states_per_attr: int

    def __post_init__(self) -> None:
        bits = readonly(self.bits, dtype=np.int8)
        object.__setattr__(self, "bits", bits)
        if bits.shape != (self.n_attr * self.states_per_attr,):
            raise ContractError(
                f"bits shape {bits.shape} does not match "
                f"{self.n_attr} x {self.states_per_attr}"
            )
        blocks = bits.reshape(self.n_attr, self.states_per_attr)
        if not np.all(blocks.sum(axis=1) == 1):
            raise ContractError("exactly one bit must be set per attribute block")

    @classmethod
    def from_states(cls, states: Sequence[int], states_per_attr: int) -> "GoalVector":
        n_attr = len(states)
        bits = np.zeros(n_attr * states_per_attr, dtype=np.int8)
        for a, s in enumerate(states):
            bits[a * states_per_attr + s] = 1
        return cls(bits=bits, n_attr=n_attr, states_per_attr=states_per_attr)

    def states(self) -> tuple[int, ...]:
        cached = getattr(self, "_states", None)
        if cached is None:
            blocks = self.bits.reshape(self.n_attr, self.states_per_attr)
            cached = tuple(int(i) for i in blocks.argmax(axis=1))
            object.__setattr__(self, "_states", cached)
        return cached


@dataclass(frozen=True)
class InputObservation:
    """Current task state, same block layout as the goal vector."""

    bits: np.ndarray
    n_attr: int
    states_per_attr: int

    def __post_init__(self) -> None:
        bits = readonly(self.bits, dtype=np.int8)
        object.__setattr__(self, "bits", bits)
        if bits.shape != (self.n_attr * self.states_per_attr,):
            raise ContractError("input bits do not match the block layout")

    @classmethod
    def from_states(cls, states: Sequence[int], states_per_attr: int) -> "InputObservation":
        g = GoalVector.from_states(states, states_per_attr)
        return cls(bits=g.bits, n_attr=g.n_attr, states_per_attr=g.states_per_attr)

    def states(self) -> tuple[int, ...]:
        cached = getattr(self, "_states", None)
        if cached is None:
            blocks = self.bits.reshape(self.n_attr, self.states_per_attr)
            cached = tuple(int(i) for i in blocks.argmax(axis=1))
            object.__setattr__(self, "_states", cached)
        return cached

    def with_attribute(self, attr: int, state: int) -> "InputObservation":
        states = list(self.states())
        states[attr] = state
        return InputObservation.from_states(states, self.states_per_attr)


@dataclass(frozen=True)
class SlotAssignment:
    """Binary item-by-slot matrix; which item occupies which UI slot."""

    matrix: np.ndarray  # (n_items, n_slots)

    def __post_init__(self) -> None:
        m = readonly(self.matrix, dtype=np.int8)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2:
            raise ContractError("assignment matrix must be 2-D")
        if np.any(m.sum(axis=0) > 1):
            raise ContractError("a slot holds more than one item")
        if np.any(m.sum(axis=1) > 1):
            raise ContractError("an item appears in more than one slot")

    @property
    def n_items(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_slots(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_items(cls, items: Sequence[int], n_items: int) -> "SlotAssignment":
        m = np.zeros((n_items, len(items)), dtype=np.int8)
        for slot, item in enumerate(items):
            if item >= 0:
                m[item, slot] = 1
        return cls(matrix=m)

    def item_in_slot(self, slot: int) -> Optional[int]:
        col = self.matrix[:, slot]
        idx = int(col.argmax())
        return idx if col[idx] == 1 else None

    def items(self) -> tuple[Optional[int], ...]:
        return tuple(self.item_in_slot(s) for s in range(self.n_slots))


@dataclass(frozen=True)
class HistoryStack:
    """Fixed-length record of the last interacted interface elements.

    Most recent first; -1 marks an unused (zero) entry. Element ids are
    task-specific; id == n_classes - 1 conventionally means "non-item".
    """

    entries: tuple[int, ...]

    @classmethod
    def empty(cls, length: int) -> "HistoryStack":
        return cls(entries=(-1,) * length)

    def push(self, element: int) -> "HistoryStack":
        return HistoryStack(entries=(element,) + self.entries[:-1])

    def encode(self, n_classes: int) -> np.ndarray:
        out = np.zeros((len(self.entries), n_classes), dtype=np.float32)
        for i, e in enumerate(self.entries):
            if e >= 0:
                out[i, e] = 1.0
        return out.reshape(-1)


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.5
    success_bonus: float = 1.0
    gamma: float = 0.99
    step_limit: int = 30

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.step_limit < 1:
            raise ConfigurationError(f"step_limit must be >= 1, got {self.step_limit}")


@dataclass(frozen=True)
class EnvState:
    """Complete episode state; immutable, evolved with dataclasses.replace."""

    position: np.ndarray
    prev_position: np.ndarray
    goal: Any
    input: Any
    ui: Any
    history: HistoryStack
    page: int
    step_count: int
    elapsed_time: float
    done: bool
    success: bool
    episode_actions: int

    def replace(self, **changes) -> "EnvState":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class StepOutcome:
    reward_user: float
    reward_interface: float
    decision_time: float
    movement_time: float
    success: bool
    next_state: EnvState
    actions: int
    element: Optional[int]


def goal_difference(x: InputObservation, g: GoalVector) -> float:
    """Fraction of mismatched attribute blocks, negated (in [-1, 0])."""
    if (x.n_attr, x.states_per_attr) != (g.n_attr, g.states_per_attr):
        raise ContractError("input and goal layouts differ")
    mismatched = sum(a != b for a, b in zip(x.states(), g.states()))
    return -mismatched / g.n_attr


def ordered_goal_difference(entered: Sequence[int], target: Sequence[int]) -> float:
    """Negated count of positional mismatches over the entered prefix."""
    if len(entered) > len(target):
        raise ContractError("entry longer than target")
    return -float(sum(1 for e, t in zip(entered, target) if e != t))


def user_reward(cfg: RewardConfig, e_gd: float, t_d: float, t_m: float, success: bool) -> float:
    """Accuracy/time trade-off plus the success indicator."""
    if t_d < 0 or t_m < 0:
        raise ContractError("time terms must be >= 0")
    r = cfg.alpha * e_gd - (1.0 - cfg.alpha) * (t_d + t_m)
    if success:
        r += cfg.success_bonus
    return r


def apply_interface(state: EnvState, adaptation: Any, task: "Task") -> EnvState:
    """First phase of a joint step: the interface reshapes the UI."""
    if state.done:
        raise ContractError("cannot act on a terminated episode")
    return task.apply_adaptation(state, adaptation)


def resolve_user(
    state: EnvState,
    user_target: int,
    motor: MotorOutcome,
    task: "Task",
    reward_cfg: RewardConfig,
    decision_params: DecisionTimeParams,
) -> StepOutcome:
    """Second phase: resolve the user's click and emit both rewards."""
    if state.done:
        raise ContractError("cannot act on a terminated episode")
    t_d = decision_time(decision_params, task.n_choices(state))
    state2, info = task.resolve_click(state, user_target, motor)
    success = task.is_success(state2)
    step_count = state2.step_count + 1
    done = success or info.get("terminate", False) or step_count >= reward_cfg.step_limit
    state2 = state2.replace(
        step_count=step_count,
        elapsed_time=state2.elapsed_time + t_d + motor.movement_time,
        done=done,
        success=success,
        episode_actions=state2.episode_actions + info["actions"],
    )
    e_gd = task.goal_difference(state2)
    r = user_reward(reward_cfg, e_gd, t_d, motor.movement_time, success)
    return StepOutcome(
        reward_user=r,
        reward_interface=r,
        decision_time=t_d,
        movement_time=motor.movement_time,
        success=success,
        next_state=state2,
        actions=info["actions"],
        element=info["element"],
    )


def advance(
    state: EnvState,
    adaptation: Any,
    user_target: int,
    motor: MotorOutcome,
    task: "Task",
    reward_cfg: RewardConfig,
    decision_params: DecisionTimeParams,
) -> StepOutcome:
    """One full joint step with a precomputed motor outcome.

    The motor outcome must have been planned against the adapted state
    (see Task.plan_motor); adaptation is applied before the click resolves.
    """
    adapted = apply_interface(state, adaptation, task)
    return resolve_user(adapted, user_target, motor, task, reward_cfg, decision_params)


def reset(
    task: "Task",
    rng: np.random.Generator,
    *,
    curriculum: Optional[CurriculumState] = None,
    n_differences: Optional[int] = None,
    goal_subset: Optional[Sequence[int]] = None,
) -> EnvState:
    """Fresh episode: sampled goal, curriculum-controlled initial distance."""
    if goal_subset is not None and len(goal_subset) == 0:
        raise ConfigurationError("goal subset is empty")
    goal = task.sample_goal(rng, goal_subset)
    if n_differences is not None:
        k = n_differences
    elif curriculum is not None:
        k = sample_initial_differences(curriculum, max(task.n_attr, 1), rng)
    else:
        k = int(rng.integers(1, max(task.n_attr, 1) + 1))
    inp = task.initial_input(goal, k, rng)
    ui = task.initial_ui(goal, rng)
    home = readonly(task.home)
    return EnvState(
        position=home,
        prev_position=home,
        goal=goal,
        input=inp,
        ui=ui,
        history=HistoryStack.empty(task.history_length),
        page=0,
        step_count=0,
        elapsed_time=0.0,
        done=False,
        success=False,
        episode_actions=0,
    )
