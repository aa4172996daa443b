"""Price entry on an adaptive keypad.

The user enters a price dd.dd followed by enter (six key presses on the
optimal path). The interface picks one of three layouts before every click:
the standard 12-key pad, a digits-only pad with larger keys, or a two-key
point/enter widget. Reduced layouts trade fewer choices and bigger targets
for the risk of not containing the needed key.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..behavior import MotorOutcome
from ..core import EnvState, ordered_goal_difference
from .base import Box, Task

# symbol ids: 0..9 digits, 10 = '.', 11 = enter, 12 = empty padding
POINT = 10
ENTER = 11
EMPTY = 12
N_SYMBOLS = 12
SEQ_LEN = 6  # d d . d d enter

STANDARD = 0
DIGITS_ONLY = 1
POINT_ENTER = 2

_COLS = (0.25, 0.5, 0.75)


def _grid(symbols: Sequence[int], rows: Sequence[float], width: float) -> tuple[tuple[int, Box], ...]:
    keys = []
    for i, sym in enumerate(symbols):
        r, c = divmod(i, 3)
        keys.append((sym, Box(center=np.array([_COLS[c], rows[r]]), width=width)))
    return tuple(keys)


# layout -> tuple of (symbol, Box)
LAYOUTS: dict[int, tuple[tuple[int, Box], ...]] = {
    STANDARD: _grid((7, 8, 9, 4, 5, 6, 1, 2, 3, POINT, 0, ENTER), rows=(0.78, 0.58, 0.38, 0.18), width=0.16),
    DIGITS_ONLY: _grid((7, 8, 9, 4, 5, 6, 1, 2, 3), rows=(0.86, 0.61, 0.36), width=0.24)
    + ((0, Box(center=np.array([0.5, 0.11]), width=0.24)),),
    POINT_ENTER: (
        (POINT, Box(center=np.array([0.35, 0.5]), width=0.24)),
        (ENTER, Box(center=np.array([0.65, 0.5]), width=0.24)),
    ),
}

SYMBOL_LABELS = tuple("0123456789") + (".", "enter")


def price_to_sequence(price: str) -> tuple[int, ...]:
    """\"12.34\" -> (1, 2, point, 3, 4, enter)."""
    seq = []
    for ch in price:
        seq.append(POINT if ch == "." else int(ch))
    seq.append(ENTER)
    if len(seq) != SEQ_LEN or seq[2] != POINT:
        raise ValueError(f"not a dd.dd price: {price!r}")
    return tuple(seq)


class KeypadTask(Task):
    task_id = "keypad"
    n_attr = 1
    position_dim = 2
    default_step_limit = 12
    random_per_episode = True

    @property
    def home(self) -> np.ndarray:
        return np.array([0.5, 0.97])

    # --- episode construction ------------------------------------------------
    def sample_goal(self, rng: np.random.Generator, subset: Optional[Sequence[int]] = None) -> tuple[int, ...]:
        # prices between 10.00 and 99.99
        cents = int(rng.integers(1000, 10000))
        price = f"{cents // 100}.{cents % 100:02d}"
        return price_to_sequence(price)

    def initial_input(self, goal, k: int, rng: np.random.Generator) -> tuple[int, ...]:
        return ()

    def initial_ui(self, goal, rng: np.random.Generator) -> int:
        return STANDARD

    # --- interface --------------------------------------------------------------
    @property
    def interface_action_dims(self) -> tuple[int, ...]:
        return (3,)

    def decode_interface_action(self, raw: Sequence[int], state: EnvState) -> int:
        return int(raw[0])

    def apply_adaptation(self, state: EnvState, adaptation: Optional[int]) -> EnvState:
        if adaptation is None:
            return state
        return state.replace(ui=int(adaptation))

    def static_adaptation(self, state: EnvState) -> int:
        return STANDARD

    def oracle_adaptation(self, state: EnvState) -> int:
        needed = state.goal[len(state.input)] if len(state.input) < SEQ_LEN else ENTER
        return DIGITS_ONLY if needed <= 9 else POINT_ENTER

    # --- user ---------------------------------------------------------------------
    @property
    def n_user_actions(self) -> int:
        return 12

    def visible_keys(self, state: EnvState) -> tuple[tuple[int, Box], ...]:
        return LAYOUTS[state.ui]

    def n_choices(self, state: EnvState) -> int:
        return len(self.visible_keys(state))

    def target_box(self, state: EnvState, user_target: int) -> Box:
        keys = self.visible_keys(state)
        return keys[user_target % len(keys)][1]

    def element_at(self, state: EnvState, point: np.ndarray) -> Optional[int]:
        for sym, box in self.visible_keys(state):
            if box.contains(point):
                return sym
        return None

    def resolve_click(self, state: EnvState, user_target: int, motor: MotorOutcome) -> tuple[EnvState, dict]:
        sym = self.element_at(state, motor.endpoint)
        entry = state.input
        terminate = False
        element = sym if sym is not None else None
        if sym == ENTER:
            entry = entry + (ENTER,)
            terminate = True
        elif sym is not None and len(entry) < SEQ_LEN - 1:
            entry = entry + (sym,)
        state2 = state.replace(
            input=entry,
            history=state.history.push(sym if sym is not None else N_SYMBOLS),
            prev_position=state.position,
            position=np.asarray(motor.endpoint),
        )
        return state2, {"element": element, "actions": 1, "terminate": terminate}

    def is_success(self, state: EnvState) -> bool:
        return state.input == state.goal

    def goal_difference(self, state: EnvState) -> float:
        return ordered_goal_difference(state.input, state.goal)

    # --- encodings -----------------------------------------------------------------
    def _encode_sequence(self, seq: Sequence[int]) -> np.ndarray:
        out = np.zeros((SEQ_LEN, N_SYMBOLS + 1), dtype=np.float32)
        for i in range(SEQ_LEN):
            out[i, seq[i] if i < len(seq) else EMPTY] = 1.0
        return out.reshape(-1)

    def encode_input(self, state: EnvState) -> np.ndarray:
        return self._encode_sequence(state.input)

    def encode_goal(self, state: EnvState) -> np.ndarray:
        return self._encode_sequence(state.goal)

    def encode_ui(self, state: EnvState) -> np.ndarray:
        out = np.zeros(3, dtype=np.float32)
        out[state.ui] = 1.0
        return out

    @property
    def history_classes(self) -> int:
        return N_SYMBOLS + 1

    def click_targets(self, state: EnvState) -> dict:
        return {
            f"key_{sym}": (i, box.center.copy())
            for i, (sym, box) in enumerate(self.visible_keys(state))
        }

    def optimal_path_length(self, state: EnvState) -> int:
        return SEQ_LEN

    def scene_snapshot(self, state: EnvState) -> dict:
        keys = [
            {"symbol": sym, "label": SYMBOL_LABELS[sym], "center": box.center.tolist(), "width": box.width}
            for sym, box in self.visible_keys(state)
        ]
        return {
            "task": self.task_id,
            "layout": state.ui,
            "keys": keys,
            "entry": [SYMBOL_LABELS[s] for s in state.input],
        }
