import math

import numpy as np
import pytest
import torch

from coadapt import core
from coadapt.agents import (
    HeadSpec,
    MlpPolicy,
    MotorRewardParams,
    PIXEL_WIDTH,
    PolicyNetworkSpec,
    SIGMA_MAX,
    analytic_motor,
    decode_motor_action,
    encode_interface_obs,
    encode_motor_obs,
    encode_user_obs,
    interface_network_spec,
    learned_motor_reward,
    observation_dims,
    policy_act,
    user_network_spec,
)
from coadapt.behavior import DecisionTimeParams, MotorOutcome
from coadapt.core import ContractError
from coadapt.tasks import get_task
from coadapt.tasks.base import Box

EXPECTED_DIMS = {
    "character": {"user": 77, "interface": 142},
    "keypad": {"user": 161, "interface": 148},
    "blocks": {"user": 127, "interface": 132},
    "reach": {"user": 43, "interface": 72, "motor": 6},
    "hmenu": {"user": 38, "interface": 103},
}


class TestEncodings:
    @pytest.mark.parametrize("task_id", list(EXPECTED_DIMS))
    def test_documented_dimensionality(self, task_id):
        task = get_task(task_id)
        state = core.reset(task, np.random.default_rng(0), n_differences=2)
        assert observation_dims(task, state) == EXPECTED_DIMS[task_id]

    def test_user_obs_layout_is_position_ui_input_goal(self):
        task = get_task("character")
        state = core.reset(task, np.random.default_rng(1), n_differences=2)
        obs = encode_user_obs(state, task)
        assert np.array_equal(obs[:2], state.position.astype(np.float32))
        assert np.array_equal(obs[2:47], state.ui.matrix.astype(np.float32).reshape(-1))
        assert np.array_equal(obs[47:62], state.input.bits.astype(np.float32))
        assert np.array_equal(obs[62:77], state.goal.bits.astype(np.float32))

    def test_goal_agnosticism_by_construction(self):
        task = get_task("character")
        rng = np.random.default_rng(2)
        state = core.reset(task, rng, n_differences=2)
        # same state except for a different goal
        other_goal = task.goal_from_id((task.goal_id(state.goal) + 17) % 243)
        perturbed = state.replace(goal=other_goal)
        a = encode_interface_obs(state, task)
        b = encode_interface_obs(perturbed, task)
        assert a.tobytes() == b.tobytes()
        # while the user observation must change
        assert encode_user_obs(state, task).tobytes() != encode_user_obs(perturbed, task).tobytes()

    def test_identical_input_and_goal_blocks_when_matched(self):
        task = get_task("character")
        state = core.reset(task, np.random.default_rng(3), n_differences=1)
        matched = state.replace(input=core.InputObservation(bits=state.goal.bits, n_attr=5, states_per_attr=3))
        obs = encode_user_obs(matched, task)
        assert np.array_equal(obs[47:62], obs[62:77])

    def test_fresh_reset_history_block_is_zero(self):
        task = get_task("character")
        state = core.reset(task, np.random.default_rng(4), n_differences=1)
        obs = encode_interface_obs(state, task)
        assert obs[62:].sum() == 0  # 2 + 15 + 45 = 62 bits before the history block

    def test_history_push_is_visible_to_interface(self):
        task = get_task("character")
        rng = np.random.default_rng(5)
        state = core.reset(task, rng, n_differences=1)
        item = state.ui.item_in_slot(0)
        motor = MotorOutcome(endpoint=task.target_box(state, 0).center.copy(), movement_time=0.2, hit=True)
        out = core.resolve_user(state, 0, motor, task, core.RewardConfig(), DecisionTimeParams())
        obs = encode_interface_obs(out.next_state, task)
        history = obs[62:].reshape(5, 16)
        assert history[0, item] == 1.0

    def test_determinism(self):
        task = get_task("blocks")
        state = core.reset(task, np.random.default_rng(6))
        assert np.array_equal(encode_user_obs(state, task), encode_user_obs(state, task))

    def test_motor_obs_menu_tasks_use_one_hot(self):
        task = get_task("character")
        state = core.reset(task, np.random.default_rng(7), n_differences=1)
        obs = encode_motor_obs(state, task, 2)
        assert obs.shape == (2 + 4,)
        assert obs[2 + 2] == 1.0 and obs[2:].sum() == 1.0


class TestAnalyticMotor:
    def test_aims_at_center_with_sixth_width_spread(self):
        box = Box(center=np.array([0.5, 0.9]), width=0.22)
        cmd = analytic_motor(np.array([0.1, 0.1]), box)
        assert np.allclose(cmd.mu, [0.5, 0.9])
        assert cmd.sigma == pytest.approx(0.22 / 6.0)
        assert cmd.sigma == pytest.approx(0.03667, abs=1e-4)

    def test_degenerate_zero_width_slot(self):
        box = Box(center=np.array([0.5, 0.5]), width=0.0)
        cmd = analytic_motor(np.array([0.1, 0.1]), box)
        assert cmd.sigma == 0.0

    def test_six_sigma_equals_width_for_all_character_slots(self):
        task = get_task("character")
        state = core.reset(task, np.random.default_rng(0), n_differences=1)
        for s in range(4):
            box = task.target_box(state, s)
            cmd = analytic_motor(state.position, box)
            assert 6.0 * cmd.sigma == pytest.approx(box.width)


class TestLearnedMotorReward:
    def test_hit_at_center(self):
        params = MotorRewardParams(trade_off=0.5, position_penalty=0.1)
        target = np.array([0.3, 0.3])
        assert learned_motor_reward(params, True, 0.4, target, target) == pytest.approx(-0.2)

    def test_miss_term_isolated(self):
        params = MotorRewardParams(trade_off=0.7, position_penalty=0.1)
        target = np.array([0.3, 0.3])
        assert learned_motor_reward(params, False, 0.0, target, target) == pytest.approx(-0.7)

    def test_zero_beta_ignores_offset(self):
        params = MotorRewardParams(trade_off=0.5, position_penalty=0.0)
        target = np.array([0.3, 0.3])
        r1 = learned_motor_reward(params, True, 0.2, target, target)
        r2 = learned_motor_reward(params, True, 0.2, np.array([0.9, 0.9]), target)
        assert r1 == r2

    def test_monotone_in_time_and_offset(self):
        params = MotorRewardParams()
        target = np.zeros(2)
        assert learned_motor_reward(params, True, 0.1, target, target) >= learned_motor_reward(
            params, True, 0.5, target, target
        )
        near, far = np.array([0.1, 0.0]), np.array([0.5, 0.0])
        assert learned_motor_reward(params, True, 0.1, near, target) >= learned_motor_reward(
            params, True, 0.1, far, target
        )


class TestMotorDecode:
    def test_squashing_ranges(self):
        raw = np.array([0.0, 0.0, 0.0])
        cmd = decode_motor_action(raw, 2)
        assert np.allclose(cmd.mu, 0.5)
        assert cmd.sigma == pytest.approx(PIXEL_WIDTH + 0.5 * (SIGMA_MAX - PIXEL_WIDTH))
        lo = decode_motor_action(np.array([-50.0, -50.0, -50.0]), 2)
        hi = decode_motor_action(np.array([50.0, 50.0, 50.0]), 2)
        assert lo.sigma == pytest.approx(PIXEL_WIDTH, abs=1e-9)
        assert hi.sigma == pytest.approx(SIGMA_MAX, abs=1e-9)
        assert np.all(lo.mu >= 0.0) and np.all(hi.mu <= 1.0)


class TestPolicyAct:
    def _uniform_policy(self, n_actions=4, input_dim=8):
        spec = PolicyNetworkSpec(input_dim, (16, 16), (HeadSpec("categorical", n_actions),))
        policy = MlpPolicy(spec, np.random.default_rng(0))
        with torch.no_grad():
            policy.heads[0].weight.zero_()
            policy.heads[0].bias.zero_()
        return policy

    def test_uniform_logits_sample_uniformly(self):
        policy = self._uniform_policy()
        n = 100_000
        obs = np.ones((n, 8), dtype=np.float32)
        actions, _, _ = policy_act(policy, obs, "stochastic", np.random.default_rng(123))
        counts = np.bincount(actions[:, 0], minlength=4)
        expected = n / 4
        sigma = math.sqrt(n * 0.25 * 0.75)
        assert np.all(np.abs(counts - expected) < 3 * sigma)

    def test_greedy_takes_unique_argmax(self):
        spec = PolicyNetworkSpec(4, (8,), (HeadSpec("categorical", 3),))
        policy = MlpPolicy(spec, np.random.default_rng(1))
        with torch.no_grad():
            policy.heads[0].weight.zero_()
            policy.heads[0].bias.copy_(torch.tensor([0.0, 2.0, -1.0]))
        actions, logp, _ = policy_act(policy, np.zeros((5, 4), dtype=np.float32), "greedy")
        assert np.all(actions[:, 0] == 1)
        assert np.allclose(logp, logp[0])

    def test_same_seed_same_action_sequence(self):
        policy = self._uniform_policy()
        obs = np.random.default_rng(0).random((64, 8)).astype(np.float32)
        a1, l1, v1 = policy_act(policy, obs, "stochastic", np.random.default_rng(9))
        a2, l2, v2 = policy_act(policy, obs, "stochastic", np.random.default_rng(9))
        assert np.array_equal(a1, a2) and np.array_equal(l1, l2) and np.array_equal(v1, v2)

    def test_dimension_mismatch_rejected(self):
        policy = self._uniform_policy(input_dim=8)
        with pytest.raises(ContractError):
            policy_act(policy, np.zeros((1, 5), dtype=np.float32), "greedy")

    def test_stochastic_requires_rng(self):
        policy = self._uniform_policy()
        with pytest.raises(ContractError):
            policy_act(policy, np.zeros((1, 8), dtype=np.float32), "stochastic")

    def test_finite_outputs_for_random_inputs(self):
        rng = np.random.default_rng(3)
        for spec in (
            user_network_spec(10, 4),
            interface_network_spec(12, (5, 5)),
            PolicyNetworkSpec(6, (16,), (HeadSpec("gaussian", 3),)),
        ):
            policy = MlpPolicy(spec, np.random.default_rng(0))
            obs = (rng.random((32, spec.input_dim)) * 100 - 50).astype(np.float32)
            actions, logp, values = policy_act(policy, obs, "stochastic", rng)
            assert np.all(np.isfinite(logp)) and np.all(np.isfinite(values))
            assert np.all(np.isfinite(actions.astype(np.float64)))
            assert values.shape == (32,)

    def test_gaussian_greedy_returns_mean(self):
        spec = PolicyNetworkSpec(4, (8,), (HeadSpec("gaussian", 3),))
        policy = MlpPolicy(spec, np.random.default_rng(2))
        obs = np.zeros((1, 4), dtype=np.float32)
        a1, _, _ = policy_act(policy, obs, "greedy")
        a2, _, _ = policy_act(policy, obs, "greedy")
        assert np.array_equal(a1, a2)

    def test_multi_head_logprob_is_sum_of_heads(self):
        spec = interface_network_spec(6, (3, 4))
        policy = MlpPolicy(spec, np.random.default_rng(4))
        obs = np.random.default_rng(1).random((16, 6)).astype(np.float32)
        actions, logp, _ = policy_act(policy, obs, "stochastic", np.random.default_rng(5))
        obs_t = torch.from_numpy(obs)
        lp, _, _ = policy.distribution_stats(obs_t, torch.from_numpy(actions))
        assert np.allclose(lp.detach().numpy(), logp, atol=1e-5)


class TestNetworkSpecs:
    def test_paper_architecture_sizes(self):
        assert user_network_spec(77, 4).hidden == (512, 512, 512)
        assert interface_network_spec(142, (15, 15, 15)).hidden == (256, 256)

    def test_spec_round_trip(self):
        spec = interface_network_spec(10, (3, 5))
        assert PolicyNetworkSpec.from_dict(spec.to_dict()) == spec

    def test_deterministic_initialization(self):
        spec = user_network_spec(10, 4)
        p1 = MlpPolicy(spec, np.random.default_rng(7))
        p2 = MlpPolicy(spec, np.random.default_rng(7))
        for a, b in zip(p1.state_dict().values(), p2.state_dict().values()):
            assert torch.equal(a, b)
