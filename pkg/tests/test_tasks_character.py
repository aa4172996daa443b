import itertools

import numpy as np
import pytest

from coadapt import core
from coadapt.behavior import DecisionTimeParams, MotorOutcome, WhoParams
from coadapt.core import RewardConfig, SlotAssignment
from coadapt.tasks import get_task
from coadapt.tasks.character import NEXT_SLOT, NON_ITEM, SLOT_XS, SLOT_Y, repair_items

WHO = WhoParams()
DEC = DecisionTimeParams()
REWARD = RewardConfig()


@pytest.fixture
def task():
    return get_task("character")


def click_slot(task, state, slot):
    box = task.target_box(state, slot)
    return MotorOutcome(endpoint=box.center.copy(), movement_time=0.2, hit=True)


class TestInterfaceActionDecode:
    def test_direct_decode(self, task, rng):
        state = core.reset(task, rng, n_differences=1)
        assignment = task.decode_interface_action((2, 7, 14), state)
        assert assignment.items() == (2, 7, 14)

    def test_duplicate_repair_rule(self, task, rng):
        state = core.reset(task, rng, n_differences=1)
        assignment = task.decode_interface_action((2, 2, 5), state)
        assert assignment.items() == (2, 0, 5)  # later duplicate -> lowest unassigned

    def test_repair_is_exhaustively_valid(self):
        for triple in itertools.product(range(15), repeat=3):
            items = repair_items(triple)
            assert len(set(items)) == 3
            # decoding always yields a valid assignment
            SlotAssignment.from_items(items, 15)

    def test_repair_of_all_same(self):
        assert repair_items((0, 0, 0)) == (0, 1, 2)
        assert repair_items((14, 14, 14)) == (14, 0, 1)


class TestClickSemantics:
    def test_item_click_replaces_attribute_state(self, task, rng):
        state = core.reset(task, rng, n_differences=1)
        # find an attribute and force a known assignment: put shirt:blue (item 5) in slot 1
        assignment = task.decode_interface_action((0, 5, 9), state)
        adapted = core.apply_interface(state, assignment, task)
        out = core.resolve_user(adapted, 1, click_slot(task, adapted, 1), task, REWARD, DEC)
        assert out.next_state.input.states()[1] == 2  # shirt attribute now state 2 (blue)
        assert out.element == 5
        assert out.next_state.history.entries[0] == 5

    def test_next_click_advances_page_and_static_layout(self, task, rng):
        state = core.reset(task, rng, n_differences=2)
        assert state.page == 0
        assert task.static_adaptation(state).items() == (0, 1, 2)
        out = core.resolve_user(state, NEXT_SLOT, click_slot(task, state, NEXT_SLOT), task, REWARD, DEC)
        state = out.next_state
        assert state.page == 1
        assert task.static_adaptation(state).items() == (3, 4, 5)
        assert state.history.entries[0] == NON_ITEM

    def test_clicking_worn_item_changes_nothing_but_costs_time(self, task, rng):
        state = core.reset(task, rng, n_differences=1)
        worn_item = 0 * 3 + state.input.states()[0]  # attribute 0's current state
        assignment = task.decode_interface_action((worn_item, (worn_item + 1) % 15, (worn_item + 2) % 15), state)
        adapted = core.apply_interface(state, assignment, task)
        out = core.resolve_user(adapted, 0, click_slot(task, adapted, 0), task, REWARD, DEC)
        assert out.next_state.input.states() == state.input.states()
        assert out.decision_time > 0 and out.movement_time > 0

    def test_next_is_noop_for_assignment_under_adaptive(self, task, rng):
        state = core.reset(task, rng, n_differences=1)
        assignment = task.decode_interface_action((6, 7, 8), state)
        adapted = core.apply_interface(state, assignment, task)
        out = core.resolve_user(adapted, NEXT_SLOT, click_slot(task, adapted, NEXT_SLOT), task, REWARD, DEC)
        assert out.next_state.ui.items() == (6, 7, 8)  # assignment untouched
        assert out.next_state.input.states() == state.input.states()


class TestGeometry:
    def test_slot_geometry_matches_layout_constants(self, task, rng):
        state = core.reset(task, rng, n_differences=1)
        for s in range(4):
            box = task.target_box(state, s)
            assert box.width == 0.22
            assert np.allclose(box.center, [SLOT_XS[s], SLOT_Y])

    def test_slots_do_not_overlap(self):
        for a, b in itertools.combinations(range(4), 2):
            assert abs(SLOT_XS[a] - SLOT_XS[b]) >= 0.22

    def test_endpoint_between_slots_clicks_nothing(self, task, rng):
        state = core.reset(task, rng, n_differences=1)
        gap_x = (SLOT_XS[0] + SLOT_XS[1]) / 2  # dead zone between slots
        miss = MotorOutcome(endpoint=np.array([gap_x, SLOT_Y]), movement_time=0.2, hit=False)
        out = core.resolve_user(state, 0, miss, task, REWARD, DEC)
        assert out.element is None
        assert out.next_state.input.states() == state.input.states()


class TestOracleAndOptimalPlay:
    def test_oracle_assigns_needed_items_first(self, task, rng):
        state = core.reset(task, rng, n_differences=3)
        x, g = state.input.states(), state.goal.states()
        needed = {a * 3 + g[a] for a in range(5) if x[a] != g[a]}
        items = set(task.oracle_adaptation(state).items())
        assert needed <= items

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_oracle_interface_optimal_user_finishes_in_k_clicks(self, task, k):
        rng = np.random.default_rng(k)
        state = core.reset(task, rng, n_differences=k)
        clicks = 0
        while not state.done:
            adaptation = task.oracle_adaptation(state)
            state2 = core.apply_interface(state, adaptation, task)
            # optimal user: click the slot holding a needed item
            x, g = state2.input.states(), state2.goal.states()
            needed = next(a * 3 + g[a] for a in range(5) if x[a] != g[a])
            slot = state2.ui.items().index(needed)
            motor = MotorOutcome(
                endpoint=task.target_box(state2, slot).center.copy(), movement_time=0.2, hit=True
            )
            out = core.resolve_user(state2, slot, motor, task, REWARD, DEC)
            state = out.next_state
            clicks += 1
        assert state.success
        assert clicks == k

    def test_static_paging_scripted_user_always_succeeds(self, task):
        """Every goal is reachable from every start on the static interface."""
        rng = np.random.default_rng(0)
        for trial in range(30):
            state = core.reset(task, rng, n_differences=int(rng.integers(1, 6)))
            while not state.done:
                adaptation = task.static_adaptation(state)
                s2 = core.apply_interface(state, adaptation, task)
                x, g = s2.input.states(), s2.goal.states()
                page_attr = s2.page
                if x[page_attr] != g[page_attr]:
                    slot = s2.ui.items().index(page_attr * 3 + g[page_attr])
                else:
                    slot = NEXT_SLOT
                motor = MotorOutcome(
                    endpoint=task.target_box(s2, slot).center.copy(), movement_time=0.2, hit=True
                )
                state = core.resolve_user(s2, slot, motor, task, REWARD, DEC).next_state
            assert state.success
            assert state.step_count <= 9  # <= 4 next presses + 5 item clicks
