"""Character-creation toolbar task.

Five appearance attributes with three items each (15 items, 243 goal
configurations). The user changes the character through a 4-slot toolbar:
three assignable item slots plus a fixed "Next" slot that cycles pages in the
static baseline and is a no-op under adaptive assignment.
"""

from __future__ import annotations

from typing import Any, Optional, Sequence

import numpy as np

from ..behavior import MotorOutcome
from ..core import EnvState, GoalVector, InputObservation, SlotAssignment, goal_difference
from .base import Box, Task

N_ATTR = 5
STATES = 3
N_ITEMS = N_ATTR * STATES
SLOT_WIDTH = 0.22
SLOT_Y = 0.9
SLOT_XS = (0.125, 0.375, 0.625, 0.875)  # slots 0..2 assignable, slot 3 = Next
NEXT_SLOT = 3
NON_ITEM = N_ITEMS  # history id for Next / empty / miss

SLOT_BOXES = tuple(Box(center=np.array([x, SLOT_Y]), width=SLOT_WIDTH) for x in SLOT_XS)

ATTRIBUTES = ("shoes", "shirt", "glasses", "backpack", "dance")
ITEM_STATES = (
    ("red", "blue", "white"),
    ("orange", "red", "blue"),
    ("reading", "goggles", "diving"),
    ("pink", "blue", "red"),
    ("hiphop", "break", "silly"),
)


def repair_items(raw: Sequence[int]) -> tuple[int, ...]:
    """Make a slot triple duplicate-free.

    Later duplicates are replaced with the lowest-index item not yet assigned.
    """
    out: list[int] = []
    for item in raw:
        if item in out:
            item = next(i for i in range(N_ITEMS) if i not in out)
        out.append(int(item))
    return tuple(out)


class CharacterTask(Task):
    task_id = "character"
    n_attr = N_ATTR
    states_per_attr = STATES
    n_items = N_ITEMS
    n_slots = 3
    random_per_episode = True
    position_dim = 2
    default_step_limit = 30
    attribute_names = ATTRIBUTES
    item_names = tuple(
        f"{ATTRIBUTES[i // STATES]}:{ITEM_STATES[i // STATES][i % STATES]}" for i in range(N_ITEMS)
    )

    @property
    def home(self) -> np.ndarray:
        return np.array([0.5, 0.1])

    # --- goals ---------------------------------------------------------------
    def goal_space_size(self) -> int:
        return STATES**N_ATTR

    def goal_from_id(self, gid: int) -> GoalVector:
        states = []
        for _ in range(N_ATTR):
            states.append(gid % STATES)
            gid //= STATES
        return GoalVector.from_states(states, STATES)

    def goal_id(self, goal: GoalVector) -> int:
        gid = 0
        for s in reversed(goal.states()):
            gid = gid * STATES + s
        return gid

    def sample_goal(self, rng: np.random.Generator, subset: Optional[Sequence[int]] = None) -> GoalVector:
        if subset is None:
            gid = int(rng.integers(0, self.goal_space_size()))
        else:
            gid = int(subset[int(rng.integers(0, len(subset)))])
        return self.goal_from_id(gid)

    def initial_input(self, goal: GoalVector, k: int, rng: np.random.Generator) -> InputObservation:
        k = int(np.clip(k, 0, N_ATTR))
        states = list(goal.states())
        flip = rng.choice(N_ATTR, size=k, replace=False)
        for a in flip:
            others = [s for s in range(STATES) if s != states[a]]
            states[a] = int(others[int(rng.integers(0, len(others)))])
        return InputObservation.from_states(states, STATES)

    def initial_ui(self, goal: GoalVector, rng: np.random.Generator) -> SlotAssignment:
        return self.assignment_for_page(0)

    # --- interface ---------------------------------------------------------------
    @property
    def interface_action_dims(self) -> tuple[int, ...]:
        return (N_ITEMS, N_ITEMS, N_ITEMS)

    def decode_interface_action(self, raw: Sequence[int], state: EnvState) -> SlotAssignment:
        return SlotAssignment.from_items(repair_items(raw), N_ITEMS)

    def apply_adaptation(self, state: EnvState, adaptation: Optional[SlotAssignment]) -> EnvState:
        if adaptation is None:
            return state
        return state.replace(ui=adaptation)

    def assignment_for_page(self, page: int) -> SlotAssignment:
        items = [page * STATES + s for s in range(STATES)]
        return SlotAssignment.from_items(items, N_ITEMS)

    def static_adaptation(self, state: EnvState) -> SlotAssignment:
        return self.assignment_for_page(state.page)

    def oracle_adaptation(self, state: EnvState) -> SlotAssignment:
        """Assign the goal items of mismatched attributes (best possible help)."""
        x, g = state.input.states(), state.goal.states()
        needed = [a * STATES + g[a] for a in range(N_ATTR) if x[a] != g[a]]
        items = needed[:3]
        fill = (i for i in range(N_ITEMS) if i not in items)
        while len(items) < 3:
            items.append(next(fill))
        return SlotAssignment.from_items(items, N_ITEMS)

    # --- user ------------------------------------------------------------------------
    @property
    def n_user_actions(self) -> int:
        return 4

    def n_choices(self, state: EnvState) -> int:
        return 4

    def target_box(self, state: EnvState, user_target: int) -> Box:
        return SLOT_BOXES[user_target]

    def element_at(self, point: np.ndarray) -> Optional[int]:
        for s, box in enumerate(SLOT_BOXES):
            if box.contains(point):
                return s
        return None

    def resolve_click(self, state: EnvState, user_target: int, motor: MotorOutcome) -> tuple[EnvState, dict]:
        slot = self.element_at(motor.endpoint)
        new_input = state.input
        page = state.page
        element = NON_ITEM
        if slot is not None and slot != NEXT_SLOT:
            item = state.ui.item_in_slot(slot)
            if item is not None:
                new_input = state.input.with_attribute(item // STATES, item % STATES)
                element = item
        elif slot == NEXT_SLOT:
            page = (page + 1) % N_ATTR
        state2 = state.replace(
            input=new_input,
            page=page,
            history=state.history.push(element),
            prev_position=state.position,
            position=np.asarray(motor.endpoint),
        )
        return state2, {"element": element if slot is not None else None, "actions": 1}

    def is_success(self, state: EnvState) -> bool:
        return state.input.states() == state.goal.states()

    def goal_difference(self, state: EnvState) -> float:
        return goal_difference(state.input, state.goal)

    # --- encodings --------------------------------------------------------------------
    def encode_input(self, state: EnvState) -> np.ndarray:
        return state.input.bits.astype(np.float32)

    def encode_goal(self, state: EnvState) -> np.ndarray:
        return state.goal.bits.astype(np.float32)

    def encode_ui(self, state: EnvState) -> np.ndarray:
        return state.ui.matrix.astype(np.float32).reshape(-1)

    @property
    def history_classes(self) -> int:
        return N_ITEMS + 1

    def click_targets(self, state: EnvState) -> dict:
        out = {}
        for s in range(3):
            out[f"slot_{s}"] = (s, np.array([SLOT_XS[s], SLOT_Y]))
        out["next"] = (NEXT_SLOT, np.array([SLOT_XS[NEXT_SLOT], SLOT_Y]))
        return out

    def optimal_path_length(self, state: EnvState) -> int:
        mismatches = sum(a != b for a, b in zip(state.input.states(), state.goal.states()))
        return max(mismatches, 1)

    def scene_snapshot(self, state: EnvState) -> dict:
        slots = []
        for s in range(3):
            item = state.ui.item_in_slot(s)
            slots.append(
                {
                    "slot": s,
                    "item": item,
                    "label": self.item_names[item] if item is not None else None,
                    "center": [SLOT_XS[s], SLOT_Y],
                    "width": SLOT_WIDTH,
                }
            )
        slots.append({"slot": NEXT_SLOT, "item": None, "label": "Next", "center": [SLOT_XS[3], SLOT_Y], "width": SLOT_WIDTH})
        return {
            "task": self.task_id,
            "slots": slots,
            "current": list(state.input.states()),
            "attributes": list(ATTRIBUTES),
            "item_states": [list(s) for s in ITEM_STATES],
        }
