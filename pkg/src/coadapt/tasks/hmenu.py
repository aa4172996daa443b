"""2D photo-editing task behind a hierarchical menu.

Five attribute menus with three leaf items each; at most one submenu is open
at any time. The interface pre-expands a submenu before each click, turning
the two-click path (open menu, pick item) into a single click when it guesses
right.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..behavior import MotorOutcome
from ..core import EnvState, GoalVector, InputObservation, goal_difference
from .base import Box, Task

N_ATTR = 5
STATES = 3
N_ITEMS = N_ATTR * STATES
NO_MENU = -1
NON_ITEM = N_ITEMS

MENU_W = 0.15
_MENU_XS = (0.1, 0.3, 0.5, 0.7, 0.9)
MENU_Y = 0.85
_LEAF_YS = (0.65, 0.48, 0.31)

ATTRIBUTES = ("filter", "text", "sticker", "size", "orientation")
ITEM_STATES = (
    ("color", "sepia", "gray"),
    ("none", "lorem", "ipsum"),
    ("none", "unicorn", "cactus"),
    ("small", "medium", "large"),
    ("original", "flip_h", "flip_v"),
)


class HierarchicalMenuTask(Task):
    task_id = "hmenu"
    n_attr = N_ATTR
    states_per_attr = STATES
    position_dim = 2
    default_step_limit = 30
    random_per_episode = True
    attribute_names = ATTRIBUTES

    @property
    def home(self) -> np.ndarray:
        return np.array([0.5, 0.1])

    # --- goals (same structure as the character task) --------------------------
    def goal_space_size(self) -> int:
        return STATES**N_ATTR

    def goal_from_id(self, gid: int) -> GoalVector:
        states = []
        for _ in range(N_ATTR):
            states.append(gid % STATES)
            gid //= STATES
        return GoalVector.from_states(states, STATES)

    def sample_goal(self, rng: np.random.Generator, subset: Optional[Sequence[int]] = None) -> GoalVector:
        if subset is None:
            gid = int(rng.integers(0, self.goal_space_size()))
        else:
            gid = int(subset[int(rng.integers(0, len(subset)))])
        return self.goal_from_id(gid)

    def initial_input(self, goal: GoalVector, k: int, rng: np.random.Generator) -> InputObservation:
        k = int(np.clip(k, 0, N_ATTR))
        states = list(goal.states())
        for a in rng.choice(N_ATTR, size=k, replace=False):
            others = [s for s in range(STATES) if s != states[a]]
            states[a] = int(others[int(rng.integers(0, len(others)))])
        return InputObservation.from_states(states, STATES)

    def initial_ui(self, goal: GoalVector, rng: np.random.Generator) -> int:
        return NO_MENU

    # --- interface ----------------------------------------------------------------
    @property
    def interface_action_dims(self) -> tuple[int, ...]:
        return (N_ATTR,)

    def decode_interface_action(self, raw: Sequence[int], state: EnvState) -> int:
        return int(raw[0])

    def apply_adaptation(self, state: EnvState, adaptation: Optional[int]) -> EnvState:
        if adaptation is None:
            return state
        return state.replace(ui=int(adaptation))

    def static_adaptation(self, state: EnvState) -> None:
        return None  # expansion only changes through user clicks

    def oracle_adaptation(self, state: EnvState) -> int:
        x, g = state.input.states(), state.goal.states()
        for a in range(N_ATTR):
            if x[a] != g[a]:
                return a
        return 0

    # --- user --------------------------------------------------------------------------
    @property
    def n_user_actions(self) -> int:
        return N_ATTR + STATES

    _TOPS = tuple(("menu", m, Box(center=np.array([x, MENU_Y]), width=MENU_W)) for m, x in enumerate(_MENU_XS))
    _LEAVES = tuple(
        tuple(("leaf", j, Box(center=np.array([x, y]), width=MENU_W)) for j, y in enumerate(_LEAF_YS))
        for x in _MENU_XS
    )

    def visible_elements(self, state: EnvState) -> tuple[tuple[str, int, Box], ...]:
        """(kind, index, box) for every clickable element; tops then leaves."""
        if state.ui == NO_MENU:
            return self._TOPS
        return self._TOPS + self._LEAVES[state.ui]

    def n_choices(self, state: EnvState) -> int:
        return len(self.visible_elements(state))

    def target_box(self, state: EnvState, user_target: int) -> Box:
        elements = self.visible_elements(state)
        return elements[user_target % len(elements)][2]

    def resolve_click(self, state: EnvState, user_target: int, motor: MotorOutcome) -> tuple[EnvState, dict]:
        clicked = None
        for kind, idx, box in self.visible_elements(state):
            if box.contains(motor.endpoint):
                clicked = (kind, idx)
                break
        new_input = state.input
        expansion = state.ui
        element = NON_ITEM
        if clicked is not None and clicked[0] == "menu":
            expansion = clicked[1]
        elif clicked is not None:
            item = expansion * STATES + clicked[1]
            new_input = state.input.with_attribute(expansion, clicked[1])
            element = item
        state2 = state.replace(
            input=new_input,
            ui=expansion,
            history=state.history.push(element),
            prev_position=state.position,
            position=np.asarray(motor.endpoint),
        )
        return state2, {"element": element if clicked is not None else None, "actions": 1}

    def is_success(self, state: EnvState) -> bool:
        return state.input.states() == state.goal.states()

    def goal_difference(self, state: EnvState) -> float:
        return goal_difference(state.input, state.goal)

    # --- encodings ------------------------------------------------------------------------
    def encode_input(self, state: EnvState) -> np.ndarray:
        return state.input.bits.astype(np.float32)

    def encode_goal(self, state: EnvState) -> np.ndarray:
        return state.goal.bits.astype(np.float32)

    def encode_ui(self, state: EnvState) -> np.ndarray:
        out = np.zeros(N_ATTR + 1, dtype=np.float32)
        out[0 if state.ui == NO_MENU else state.ui + 1] = 1.0
        return out

    @property
    def history_classes(self) -> int:
        return N_ITEMS + 1

    def click_targets(self, state: EnvState) -> dict:
        out = {}
        for i, (kind, idx, box) in enumerate(self.visible_elements(state)):
            name = f"menu_{idx}" if kind == "menu" else f"leaf_{idx}"
            out[name] = (i, box.center.copy())
        return out

    def optimal_path_length(self, state: EnvState) -> int:
        mismatches = sum(a != b for a, b in zip(state.input.states(), state.goal.states()))
        return max(2 * mismatches, 1)

    def scene_snapshot(self, state: EnvState) -> dict:
        return {
            "task": self.task_id,
            "expanded": state.ui,
            "current": list(state.input.states()),
            "attributes": list(ATTRIBUTES),
            "item_states": [list(s) for s in ITEM_STATES],
        }
