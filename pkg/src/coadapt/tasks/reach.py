"""Grabbing an out-of-reach object in a 3D scene.

All objects spawn outside the user's reach sphere; the hand is confined to
that sphere, so without interface help no episode can succeed. The interface
may teleport one object per step to a fixed within-reach point along the
user-to-object ray. This task uses the learned low-level motor policy.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..behavior import MotorCommand, MotorOutcome, WhoParams, sample_endpoint
from ..core import EnvState
from .base import Box, Task

N_OBJECTS = 6
ORIGIN = np.array([0.5, 0.5, 0.1])
REACH_RADIUS = 0.35
GRAB_TOL = 0.05
PULL_IN_DISTANCE = 0.25
SPAWN_MIN, SPAWN_MAX = 0.45, 0.62
NON_OBJECT = N_OBJECTS  # history id when nothing was touched


def _project_into_reach(point: np.ndarray) -> np.ndarray:
    v = point - ORIGIN
    norm = float(np.linalg.norm(v))
    if norm <= REACH_RADIUS:
        return point
    return ORIGIN + v * (REACH_RADIUS / norm)


class ReachTask(Task):
    task_id = "reach"
    n_attr = 1
    position_dim = 3
    default_step_limit = 10
    uses_learned_motor = True

    @property
    def home(self) -> np.ndarray:
        return ORIGIN.copy()

    # --- episode construction ------------------------------------------------
    def sample_goal(self, rng: np.random.Generator, subset: Optional[Sequence[int]] = None) -> int:
        if subset is None:
            return int(rng.integers(0, N_OBJECTS))
        return int(subset[int(rng.integers(0, len(subset)))])

    def initial_input(self, goal: int, k: int, rng: np.random.Generator) -> int:
        return -1  # nothing grabbed

    def initial_ui(self, goal: int, rng: np.random.Generator) -> np.ndarray:
        positions = np.empty((N_OBJECTS, 3))
        for i in range(N_OBJECTS):
            while True:
                p = rng.uniform(0.0, 1.0, size=3)
                if SPAWN_MIN <= np.linalg.norm(p - ORIGIN) <= SPAWN_MAX:
                    positions[i] = p
                    break
        positions.setflags(write=False)
        return positions

    # --- interface ---------------------------------------------------------------
    @property
    def interface_action_dims(self) -> tuple[int, ...]:
        return (N_OBJECTS + 1,)  # no-op + move object i

    def decode_interface_action(self, raw: Sequence[int], state: EnvState) -> int:
        return int(raw[0]) - 1  # -1 = no-op

    def apply_adaptation(self, state: EnvState, adaptation: Optional[int]) -> EnvState:
        if adaptation is None or adaptation < 0:
            return state
        positions = np.array(state.ui)
        v = positions[adaptation] - ORIGIN
        norm = float(np.linalg.norm(v))
        if norm > 0:
            positions[adaptation] = ORIGIN + v * (PULL_IN_DISTANCE / norm)
        positions.setflags(write=False)
        return state.replace(ui=positions)

    def static_adaptation(self, state: EnvState) -> int:
        return -1

    def oracle_adaptation(self, state: EnvState) -> int:
        goal_pos = state.ui[state.goal]
        if np.linalg.norm(goal_pos - ORIGIN) <= REACH_RADIUS:
            return -1
        return state.goal

    # --- user -----------------------------------------------------------------------
    @property
    def n_user_actions(self) -> int:
        return N_OBJECTS

    def n_choices(self, state: EnvState) -> int:
        return N_OBJECTS

    def target_box(self, state: EnvState, user_target: int) -> Box:
        return Box(center=np.array(state.ui[user_target]), width=2 * GRAB_TOL)

    def plan_motor(self, state, user_target, who: WhoParams, rng, command: Optional[MotorCommand] = None) -> MotorOutcome:
        box = self.target_box(state, user_target)
        if command is None:
            mu = np.clip(box.center, 0.0, 1.0)
            command = MotorCommand(mu=mu, sigma=box.width / 6.0)
        out = sample_endpoint(command, box.center, box.width, state.position, who, rng)
        hand = _project_into_reach(out.endpoint)
        hit = bool(np.all(np.abs(hand - box.center) <= box.width / 2.0))
        return MotorOutcome(endpoint=hand, movement_time=out.movement_time, hit=hit)

    def resolve_click(self, state: EnvState, user_target: int, motor: MotorOutcome) -> tuple[EnvState, dict]:
        hand = np.asarray(motor.endpoint)
        positions = state.ui
        dists = np.max(np.abs(positions - hand), axis=1)
        touched = int(dists.argmin()) if float(dists.min()) <= GRAB_TOL else -1
        grabbed = state.input
        goal_pos = positions[state.goal]
        goal_touched = bool(np.all(np.abs(hand - goal_pos) <= GRAB_TOL))
        goal_in_reach = bool(np.linalg.norm(goal_pos - ORIGIN) <= REACH_RADIUS)
        if goal_touched and goal_in_reach:
            grabbed = state.goal
        state2 = state.replace(
            input=grabbed,
            history=state.history.push(touched if touched >= 0 else NON_OBJECT),
            prev_position=state.position,
            position=hand,
        )
        return state2, {"element": touched if touched >= 0 else None, "actions": 1}

    def is_success(self, state: EnvState) -> bool:
        return state.input == state.goal

    def goal_difference(self, state: EnvState) -> float:
        return 0.0 if state.input == state.goal else -1.0

    # --- encodings ---------------------------------------------------------------------
    def encode_input(self, state: EnvState) -> np.ndarray:
        out = np.zeros(N_OBJECTS + 1, dtype=np.float32)
        out[0 if state.input < 0 else state.input + 1] = 1.0
        return out

    def encode_goal(self, state: EnvState) -> np.ndarray:
        out = np.zeros(N_OBJECTS, dtype=np.float32)
        out[state.goal] = 1.0
        return out

    def encode_ui(self, state: EnvState) -> np.ndarray:
        positions = np.asarray(state.ui, dtype=np.float32)
        in_reach = (np.linalg.norm(positions - ORIGIN, axis=1) <= REACH_RADIUS).astype(np.float32)
        prev = np.asarray(state.prev_position, dtype=np.float32)
        return np.concatenate([positions.reshape(-1), in_reach, prev])

    @property
    def history_classes(self) -> int:
        return N_OBJECTS + 1

    def scene_snapshot(self, state: EnvState) -> dict:
        return {
            "task": self.task_id,
            "objects": np.asarray(state.ui).tolist(),
            "hand": np.asarray(state.position).tolist(),
            "reach_radius": REACH_RADIUS,
            "grabbed": state.input,
        }
