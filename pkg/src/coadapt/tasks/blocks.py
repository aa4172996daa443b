"""Castle building from typed blocks on a supported grid.

The interface stages a suggested block after every placement; the user either
places the staged block directly (one action) or discards it and fetches the
correct type from the palette (two actions). Placements snap to the chosen
cell, so action counts are exact: the no-suggestion baseline costs exactly two
actions per block.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..behavior import MotorOutcome, WhoParams
from ..core import EnvState
from .base import Box, Task

WALL, GATE, TOWER, ROOF = 0, 1, 2, 3
NO_BLOCK = -1
TYPE_NAMES = ("wall", "gate", "tower", "roof")

N_COLS, N_ROWS = 4, 3
N_CELLS = N_COLS * N_ROWS

CELL_W = 0.12
_CELL_XS = (0.47, 0.60, 0.73, 0.86)
_CELL_YS = (0.18, 0.31, 0.44)  # row 0 is the floor row

PALETTE_W = 0.1
_PALETTE_POS = ((0.08, 0.18), (0.08, 0.36), (0.08, 0.54), (0.08, 0.72))
STAGING = np.array([0.26, 0.5])
STAGING_W = 0.1

# cell id = row * N_COLS + col; every template shares the gatehouse floor row
_FLOOR = {0: WALL, 1: GATE, 2: GATE, 3: WALL}
TEMPLATES: tuple[dict[int, int], ...] = (
    {**_FLOOR, 4: TOWER, 7: TOWER, 8: ROOF, 11: ROOF},
    {**_FLOOR, 4: TOWER, 7: TOWER, 8: ROOF},
    {**_FLOOR, 4: TOWER, 7: TOWER, 11: ROOF},
    {**_FLOOR, 4: TOWER, 7: TOWER},
    {**_FLOOR, 4: WALL, 7: WALL, 8: ROOF, 11: ROOF},
    {**_FLOOR, 4: WALL, 5: WALL, 6: WALL, 7: WALL, 8: ROOF, 9: ROOF, 10: ROOF, 11: ROOF},
    {**_FLOOR, 4: TOWER, 5: WALL, 6: WALL, 7: TOWER, 8: ROOF, 11: ROOF},
    {**_FLOOR, 4: WALL, 7: WALL},
)


_CELL_BOXES = tuple(
    Box(center=np.array([_CELL_XS[c % N_COLS], _CELL_YS[c // N_COLS]]), width=CELL_W)
    for c in range(N_CELLS)
)


def cell_box(cell: int) -> Box:
    return _CELL_BOXES[cell]


class BlocksTask(Task):
    task_id = "blocks"
    n_attr = 1
    position_dim = 2
    default_step_limit = 2 * max(len(t) for t in TEMPLATES) + 4

    @property
    def home(self) -> np.ndarray:
        return np.array([0.26, 0.8])

    # --- episode construction ------------------------------------------------
    def sample_goal(self, rng: np.random.Generator, subset: Optional[Sequence[int]] = None) -> int:
        if subset is None:
            return int(rng.integers(0, len(TEMPLATES)))
        return int(subset[int(rng.integers(0, len(subset)))])

    def initial_input(self, goal: int, k: int, rng: np.random.Generator) -> tuple[int, ...]:
        return (NO_BLOCK,) * N_CELLS

    def initial_ui(self, goal: int, rng: np.random.Generator) -> int:
        return NO_BLOCK  # nothing staged

    # --- support rule and valid placements ---------------------------------------
    def valid_cells(self, state: EnvState) -> tuple[int, ...]:
        """Target cells that are empty and supported, in row-major floor-up order."""
        template = TEMPLATES[state.goal]
        grid = state.input
        out = []
        for cell, _needed in sorted(template.items()):
            if grid[cell] != NO_BLOCK:
                continue
            row = cell // N_COLS
            if row == 0 or grid[cell - N_COLS] != NO_BLOCK:
                out.append(cell)
        return tuple(out)

    # --- interface ---------------------------------------------------------------
    @property
    def interface_action_dims(self) -> tuple[int, ...]:
        return (5,)  # no suggestion + 4 block types

    def decode_interface_action(self, raw: Sequence[int], state: EnvState) -> int:
        return int(raw[0]) - 1  # -1 = no suggestion

    def apply_adaptation(self, state: EnvState, adaptation: Optional[int]) -> EnvState:
        if adaptation is None:
            return state
        return state.replace(ui=int(adaptation))

    def static_adaptation(self, state: EnvState) -> int:
        return NO_BLOCK

    def oracle_adaptation(self, state: EnvState) -> int:
        cells = self.valid_cells(state)
        if not cells:
            return NO_BLOCK
        return TEMPLATES[state.goal][cells[0]]

    # --- user -----------------------------------------------------------------------
    @property
    def n_user_actions(self) -> int:
        return N_CELLS

    def n_choices(self, state: EnvState) -> int:
        return max(len(self.valid_cells(state)), 1)

    def chosen_cell(self, state: EnvState, user_target: int) -> int:
        cells = self.valid_cells(state)
        return cells[user_target % len(cells)]

    def target_box(self, state: EnvState, user_target: int) -> Box:
        return cell_box(self.chosen_cell(state, user_target))

    def plan_motor(self, state, user_target, who: WhoParams, rng, command=None) -> MotorOutcome:
        """Deterministic snapped placement; time covers the hand path.

        Staged match: current -> staging -> cell. Otherwise the user fetches
        the needed type: current -> palette -> cell.
        """
        cell = self.chosen_cell(state, user_target)
        box = cell_box(cell)
        needed = TEMPLATES[state.goal][cell]
        if state.ui == needed:
            t = self.movement_time_between(who, state.position, STAGING, STAGING_W)
            t += self.movement_time_between(who, STAGING, box.center, CELL_W)
        else:
            palette = np.array(_PALETTE_POS[needed])
            t = self.movement_time_between(who, state.position, palette, PALETTE_W)
            t += self.movement_time_between(who, palette, box.center, CELL_W)
        return MotorOutcome(endpoint=box.center.copy(), movement_time=t, hit=True)

    def resolve_click(self, state: EnvState, user_target: int, motor: MotorOutcome) -> tuple[EnvState, dict]:
        cell = self.chosen_cell(state, user_target)
        needed = TEMPLATES[state.goal][cell]
        actions = 1 if state.ui == needed else 2
        grid = list(state.input)
        grid[cell] = needed
        state2 = state.replace(
            input=tuple(grid),
            ui=NO_BLOCK,  # staged block is consumed or discarded
            history=state.history.push(cell),
            prev_position=state.position,
            position=np.asarray(motor.endpoint),
        )
        return state2, {"element": cell, "actions": actions}

    def is_success(self, state: EnvState) -> bool:
        template = TEMPLATES[state.goal]
        return all(state.input[c] == t for c, t in template.items())

    def goal_difference(self, state: EnvState) -> float:
        template = TEMPLATES[state.goal]
        missing = sum(1 for c, t in template.items() if state.input[c] != t)
        return -missing / len(template)

    # --- encodings ---------------------------------------------------------------------
    def _encode_grid(self, grid: Sequence[int]) -> np.ndarray:
        out = np.zeros((N_CELLS, 5), dtype=np.float32)
        for c, t in enumerate(grid):
            out[c, 0 if t == NO_BLOCK else t + 1] = 1.0
        return out.reshape(-1)

    def encode_input(self, state: EnvState) -> np.ndarray:
        return self._encode_grid(state.input)

    def encode_goal(self, state: EnvState) -> np.ndarray:
        template = TEMPLATES[state.goal]
        grid = [template.get(c, NO_BLOCK) for c in range(N_CELLS)]
        return self._encode_grid(grid)

    def encode_ui(self, state: EnvState) -> np.ndarray:
        out = np.zeros(5, dtype=np.float32)
        out[0 if state.ui == NO_BLOCK else state.ui + 1] = 1.0
        return out

    @property
    def history_classes(self) -> int:
        return N_CELLS + 1

    def scene_snapshot(self, state: EnvState) -> dict:
        return {
            "task": self.task_id,
            "grid": list(state.input),
            "staged": state.ui,
            "template": {str(c): t for c, t in TEMPLATES[state.goal].items()},
            "type_names": list(TYPE_NAMES),
        }
