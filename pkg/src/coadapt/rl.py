"""Multi-agent PPO trainer.

Both learned policies (and, for the out-of-reach task, the learned motor
policy) are updated every epoch from the same joint rollouts. A joint step
always executes interface adaptation, then the user's high-level choice, then
the motor action; rewards are computed after the motor action, and the
interface reward equals the user reward on every transition.

One epoch = one rollout + one PPO update per trained policy.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import core
from .agents import (
    MlpPolicy,
    PolicyNetworkSpec,
    decode_motor_action,
    encode_interface_obs,
    encode_motor_obs,
    encode_user_obs,
    interface_network_spec,
    learned_motor_reward,
    motor_network_spec,
    observation_dims,
    policy_act,
    user_network_spec,
)
from .config import RunConfig
from .curriculum import CurriculumState, curriculum_update, sample_initial_differences  # noqa: F401  (re-exported)
from .persist import Checkpoint, EpisodeLog, canonical_json, make_record, save_checkpoint, tensor_to_blob
from .tasks import get_task


@dataclass(frozen=True)
class Transition:
    """One joint step as recorded for logs and traces."""

    episode: int
    step: int
    obs_user: np.ndarray
    obs_interface: np.ndarray
    action_interface: Optional[tuple[int, ...]]
    action_user: int
    action_motor: Optional[tuple[float, ...]]
    reward_user: float
    reward_interface: float
    t_d: float
    t_m: float
    success: bool
    done: bool

    def __post_init__(self) -> None:
        if self.reward_interface != self.reward_user:
            raise core.ContractError("interface reward must equal user reward")


# ---------------------------------------------------------------------------
# advantage estimation
# ---------------------------------------------------------------------------

def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap: np.ndarray | float,
    gamma: float,
    gae_lambda: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Exponentially weighted TD-residual advantages and value targets.

    Arrays are time-major, either (T,) or (T, n_envs). `dones[t]` marks a
    terminal at step t (no bootstrapping across it); `bootstrap` is the value
    estimate for the state after the last step.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    squeeze = rewards.ndim == 1
    if squeeze:
        rewards = rewards[:, None]
        values = np.asarray(values, dtype=np.float64)[:, None]
        dones = np.asarray(dones, dtype=bool)[:, None]
        bootstrap = np.asarray([bootstrap], dtype=np.float64)
    else:
        values = np.asarray(values, dtype=np.float64)
        dones = np.asarray(dones, dtype=bool)
        bootstrap = np.asarray(bootstrap, dtype=np.float64)
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    next_value = bootstrap
    carry = np.zeros(rewards.shape[1], dtype=np.float64)
    for t in range(T - 1, -1, -1):
        not_done = ~dones[t]
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        carry = delta + gamma * gae_lambda * carry * not_done
        adv[t] = carry
        next_value = values[t]
    returns = adv + values
    if squeeze:
        return adv[:, 0], returns[:, 0]
    return adv, returns


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    flat = adv.reshape(-1)
    return ((adv - flat.mean()) / (flat.std() + 1e-8)).astype(np.float64)


# ---------------------------------------------------------------------------
# PPO loss and update
# ---------------------------------------------------------------------------

def ppo_loss(policy: MlpPolicy, obs, actions, old_logp, advantages, returns, cfg) -> tuple[torch.Tensor, dict]:
    """Clipped-surrogate policy loss + value loss - entropy bonus."""
    logp, entropy, value = policy.distribution_stats(obs, actions)
    ratio = torch.exp(logp - old_logp)
    surrogate = torch.min(
        ratio * advantages,
        torch.clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio) * advantages,
    )
    policy_loss = -surrogate.mean()
    value_loss = ((value - returns) ** 2).mean()
    entropy_mean = entropy.mean()
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy_mean
    info = {
        "policy_loss": float(policy_loss.detach()),
        "value_loss": float(value_loss.detach()),
        "entropy": float(entropy_mean.detach()),
        "mean_ratio": float(ratio.detach().mean()),
        "clip_fraction": float(
            ((ratio.detach() - 1.0).abs() > cfg.clip_ratio).float().mean()
        ),
    }
    return loss, info


def ppo_update(
    policy: MlpPolicy,
    optimizer: torch.optim.Optimizer,
    obs: np.ndarray,
    actions: np.ndarray,
    old_logp: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    cfg,
    rng: np.random.Generator,
) -> dict:
    """Several epochs of minibatch clipped-surrogate steps over one buffer."""
    n = obs.shape[0]
    obs_t = torch.from_numpy(np.ascontiguousarray(obs, dtype=np.float32))
    if actions.dtype.kind == "f":
        act_t = torch.from_numpy(np.ascontiguousarray(actions, dtype=np.float32))
    else:
        act_t = torch.from_numpy(np.ascontiguousarray(actions, dtype=np.int64))
    logp_t = torch.from_numpy(np.ascontiguousarray(old_logp, dtype=np.float32))
    adv_t = torch.from_numpy(np.ascontiguousarray(advantages, dtype=np.float32))
    ret_t = torch.from_numpy(np.ascontiguousarray(returns, dtype=np.float32))
    agg: dict[str, float] = {}
    batches = 0
    for _ in range(cfg.update_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            mb = torch.from_numpy(order[start : start + cfg.minibatch_size].copy())
            loss, info = ppo_loss(
                policy, obs_t[mb], act_t[mb], logp_t[mb], adv_t[mb], ret_t[mb], cfg
            )
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite PPO loss: {info}; minibatch adv range "
                    f"[{float(adv_t[mb].min())}, {float(adv_t[mb].max())}]"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            batches += 1
            for k, v in info.items():
                agg[k] = agg.get(k, 0.0) + v
            agg["max_abs_mean_ratio_dev"] = max(
                agg.get("max_abs_mean_ratio_dev", 0.0), abs(info["mean_ratio"] - 1.0)
            )
    stats = {k: v / batches for k, v in agg.items() if k != "max_abs_mean_ratio_dev"}
    stats["max_abs_mean_ratio_dev"] = agg["max_abs_mean_ratio_dev"]
    return stats


def policy_values(policy: MlpPolicy, obs: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        _, value = policy.forward(torch.from_numpy(np.atleast_2d(np.asarray(obs, dtype=np.float32))))
    return value.numpy().astype(np.float64)


# ---------------------------------------------------------------------------
# rollout buffers
# ---------------------------------------------------------------------------

class RolloutBuffer:
    def __init__(self, n_steps: int, n_envs: int, obs_dim: int, action_dim: int, action_dtype):
        self.obs = np.zeros((n_steps, n_envs, obs_dim), dtype=np.float32)
        self.actions = np.zeros((n_steps, n_envs, action_dim), dtype=action_dtype)
        self.logp = np.zeros((n_steps, n_envs), dtype=np.float64)
        self.value = np.zeros((n_steps, n_envs), dtype=np.float64)
        self.reward = np.zeros((n_steps, n_envs), dtype=np.float64)
        self.done = np.zeros((n_steps, n_envs), dtype=bool)
        self.bootstrap = np.zeros(n_envs, dtype=np.float64)

    def flat(self, gamma: float, gae_lambda: float) -> dict[str, np.ndarray]:
        adv, ret = gae_advantages(self.reward, self.value, self.done, self.bootstrap, gamma, gae_lambda)
        adv = normalize_advantages(adv)
        n = self.obs.shape[0] * self.obs.shape[1]
        return {
            "obs": self.obs.reshape(n, -1),
            "actions": self.actions.reshape(n, -1),
            "old_logp": self.logp.reshape(n),
            "advantages": adv.reshape(n),
            "returns": ret.reshape(n),
        }


# ---------------------------------------------------------------------------
# training report
# ---------------------------------------------------------------------------

@dataclass
class TrainReport:
    task: str
    condition: str
    seed: int
    per_epoch: list[dict] = field(default_factory=list)
    checkpoints: list[str] = field(default_factory=list)
    final_checkpoint: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TrainReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def success_curve(self) -> list[float]:
        return [row["success_rate"] for row in self.per_epoch]

    def final_success(self, window: int = 10) -> float:
        tail = self.success_curve()[-window:]
        return float(np.mean(tail)) if tail else 0.0


# ---------------------------------------------------------------------------
# trainer
# ---------------------------------------------------------------------------

class _EnvSlot:
    __slots__ = ("state", "episode_index", "rng", "returns", "reset_curriculum_mean")

    def __init__(self):
        self.state = None
        self.episode_index = -1
        self.rng = None
        self.returns = {}
        self.reset_curriculum_mean = None


class Trainer:
    """Owns environments, policies, optimizers, curriculum, and the loop."""

    def __init__(self, config: RunConfig, log: Optional[EpisodeLog] = None, quiet: bool = False):
        torch.set_num_threads(1)  # run-to-run determinism; nets are tiny anyway
        self.cfg = config
        self.task = get_task(config.task)
        self.log = log
        self.quiet = quiet
        self.n_envs = config.train.num_envs
        if config.ppo.rollout_length % self.n_envs != 0:
            raise core.ConfigurationError("rollout_length must be divisible by num_envs")
        self.steps_per_env = config.ppo.rollout_length // self.n_envs

        root = np.random.SeedSequence(config.seed)
        ss = root.spawn(6)
        self.sample_rng = np.random.default_rng(ss[0])
        self.shuffle_rng = np.random.default_rng(ss[1])
        subset_rng = np.random.default_rng(ss[2])
        init_rngs = [np.random.default_rng(s) for s in ss[3:6]]

        self.goal_subset = None
        if config.goal_fraction < 1.0:
            n_goals = self.task.goal_space_size()
            n_keep = max(1, int(round(config.goal_fraction * n_goals)))
            self.goal_subset = [int(g) for g in subset_rng.permutation(n_goals)[:n_keep]]

        probe = core.reset(self.task, np.random.default_rng(0), n_differences=1, goal_subset=self.goal_subset)
        dims = observation_dims(self.task, probe)

        self.policies: dict[str, MlpPolicy] = {}
        self.optimizers: dict[str, torch.optim.Optimizer] = {}
        specs: dict[str, PolicyNetworkSpec] = {
            "user": user_network_spec(dims["user"], self.task.n_user_actions)
        }
        if config.condition == "adaptive":
            specs["interface"] = interface_network_spec(dims["interface"], self.task.interface_action_dims)
        if self.task.uses_learned_motor:
            specs["motor"] = motor_network_spec(dims["motor"], self.task.position_dim)
        for (name, spec), rng in zip(specs.items(), init_rngs):
            self.policies[name] = MlpPolicy(spec, rng)
            self.optimizers[name] = torch.optim.Adam(
                self.policies[name].parameters(), lr=config.ppo.learning_rate
            )

        self.curriculum = CurriculumState(
            mean_differences=config.curriculum.start_mean,
            step=config.curriculum.step,
            success_threshold=config.curriculum.success_threshold,
            patience_epochs=config.curriculum.patience_epochs,
            max_mean=float(self.task.n_attr) if config.curriculum.cap_at_n_attr else None,
        )

        self.slots = [_EnvSlot() for _ in range(self.n_envs)]
        for e, slot in enumerate(self.slots):
            self._reset_slot(e, slot)
        self.epoch = 0

    # --- environment plumbing ------------------------------------------------
    def _reset_slot(self, env_index: int, slot: _EnvSlot) -> None:
        slot.episode_index += 1
        slot.rng = np.random.default_rng(
            np.random.SeedSequence([self.cfg.seed, env_index, slot.episode_index])
        )
        slot.state = core.reset(
            self.task, slot.rng, curriculum=self.curriculum, goal_subset=self.goal_subset
        )
        slot.returns = {name: 0.0 for name in ("user", "interface", "motor")}
        slot.reset_curriculum_mean = self.curriculum.mean_differences

    def _interface_adaptations(self, states) -> tuple[list, Optional[np.ndarray], Optional[np.ndarray], Optional[np.ndarray], np.ndarray]:
        """Per-env decoded adaptations plus raw actions/logp/values when learned."""
        obs = np.stack([encode_interface_obs(s, self.task) for s in states])
        raw = logp = value = None
        if self.cfg.condition == "adaptive":
            raw, logp, value = policy_act(self.policies["interface"], obs, "stochastic", self.sample_rng)
            adaptations = [
                self.task.decode_interface_action(tuple(int(a) for a in raw[e]), states[e])
                for e in range(len(states))
            ]
        elif self.cfg.condition == "random":
            raw = [self.task.random_adaptation_raw(s, self.sample_rng) for s in states]
            adaptations = [
                None if raw[e] is None else self.task.decode_interface_action(raw[e], states[e])
                for e in range(len(states))
            ]
        else:  # static
            adaptations = [self.task.static_adaptation(s) for s in states]
        return adaptations, raw, logp, value, obs

    # --- rollout collection ---------------------------------------------------
    def collect_rollouts(self) -> tuple[dict[str, RolloutBuffer], dict]:
        T, E = self.steps_per_env, self.n_envs
        task, cfg = self.task, self.cfg
        buffers: dict[str, RolloutBuffer] = {}
        dims = observation_dims(task, self.slots[0].state)
        buffers["user"] = RolloutBuffer(T, E, dims["user"], 1, np.int64)
        if "interface" in self.policies:
            buffers["interface"] = RolloutBuffer(
                T, E, dims["interface"], len(task.interface_action_dims), np.int64
            )
        if "motor" in self.policies:
            buffers["motor"] = RolloutBuffer(T, E, dims["motor"], task.position_dim + 1, np.float32)

        finished: list[dict] = []
        for t in range(T):
            states = [slot.state for slot in self.slots]
            adaptations, raw_i, logp_i, value_i, obs_i = self._interface_adaptations(states)
            adapted = [core.apply_interface(states[e], adaptations[e], task) for e in range(E)]
            obs_u = np.stack([encode_user_obs(s, task) for s in adapted])
            act_u, logp_u, value_u = policy_act(self.policies["user"], obs_u, "stochastic", self.sample_rng)

            commands = [None] * E
            if "motor" in self.policies:
                obs_m = np.stack(
                    [encode_motor_obs(adapted[e], task, int(act_u[e, 0])) for e in range(E)]
                )
                act_m, logp_m, value_m = policy_act(self.policies["motor"], obs_m, "stochastic", self.sample_rng)
                commands = [decode_motor_action(act_m[e], task.position_dim) for e in range(E)]

            for e, slot in enumerate(self.slots):
                target = int(act_u[e, 0])
                motor = task.plan_motor(adapted[e], target, cfg.who, slot.rng, command=commands[e])
                outcome = core.resolve_user(adapted[e], target, motor, task, cfg.reward, cfg.decision)

                buffers["user"].obs[t, e] = obs_u[e]
                buffers["user"].actions[t, e, 0] = target
                buffers["user"].logp[t, e] = logp_u[e]
                buffers["user"].value[t, e] = value_u[e]
                buffers["user"].reward[t, e] = outcome.reward_user
                buffers["user"].done[t, e] = outcome.next_state.done
                slot.returns["user"] += outcome.reward_user

                if "interface" in buffers:
                    buffers["interface"].obs[t, e] = obs_i[e]
                    buffers["interface"].actions[t, e] = raw_i[e]
                    buffers["interface"].logp[t, e] = logp_i[e]
                    buffers["interface"].value[t, e] = value_i[e]
                    buffers["interface"].reward[t, e] = outcome.reward_interface
                    buffers["interface"].done[t, e] = outcome.next_state.done
                    slot.returns["interface"] += outcome.reward_interface

                if "motor" in buffers:
                    box = task.target_box(adapted[e], target)
                    r_m = learned_motor_reward(
                        cfg.motor_reward, motor.hit, motor.movement_time, commands[e].mu, box.center
                    )
                    buffers["motor"].obs[t, e] = obs_m[e]
                    buffers["motor"].actions[t, e] = act_m[e]
                    buffers["motor"].logp[t, e] = logp_m[e]
                    buffers["motor"].value[t, e] = value_m[e]
                    buffers["motor"].reward[t, e] = r_m
                    buffers["motor"].done[t, e] = outcome.next_state.done
                    slot.returns["motor"] += r_m

                if self.log is not None:
                    raw_e = None if raw_i is None else raw_i[e]
                    self.log.append(
                        make_record(
                            task=task.task_id,
                            condition=cfg.condition,
                            episode=slot.episode_index,
                            step=slot.state.step_count,
                            seed={
                                "root": cfg.seed,
                                "env": e,
                                "episode": slot.episode_index,
                                "curriculum_mean": slot.reset_curriculum_mean,
                            },
                            obs_user=obs_u[e],
                            obs_interface=obs_i[e],
                            actions={
                                "interface": None if raw_e is None else [int(a) for a in raw_e],
                                "user": target,
                                "motor": None if commands[e] is None else [float(v) for v in act_m[e]],
                            },
                            reward=outcome.reward_user,
                            t_d=outcome.decision_time,
                            t_m=outcome.movement_time,
                            success=outcome.success,
                        )
                    )

                next_state = outcome.next_state
                if next_state.done:
                    finished.append(
                        {
                            "success": next_state.success,
                            "actions": next_state.episode_actions,
                            "steps": next_state.step_count,
                            "elapsed": next_state.elapsed_time,
                            "returns": dict(slot.returns),
                        }
                    )
                    self._reset_slot(e, slot)
                else:
                    slot.state = next_state

        # bootstrap values for truncated episodes
        states = [slot.state for slot in self.slots]
        buffers["user"].bootstrap = policy_values(
            self.policies["user"], np.stack([encode_user_obs(s, task) for s in states])
        )
        if "interface" in buffers:
            buffers["interface"].bootstrap = policy_values(
                self.policies["interface"], np.stack([encode_interface_obs(s, task) for s in states])
            )
        if "motor" in buffers:
            buffers["motor"].bootstrap = policy_values(
                self.policies["motor"], np.stack([encode_motor_obs(s, task, 0) for s in states])
            )

        stats = self._episode_stats(finished)
        return buffers, stats

    def _episode_stats(self, finished: list[dict]) -> dict:
        n = len(finished)
        successes = [f for f in finished if f["success"]]
        stats = {
            "episodes": n,
            "success_rate": (len(successes) / n) if n else 0.0,
            "mean_actions": (float(np.mean([f["actions"] for f in successes])) if successes else None),
            "mean_elapsed": (float(np.mean([f["elapsed"] for f in successes])) if successes else None),
        }
        for name in ("user", "interface", "motor"):
            if name in self.policies and n:
                stats[f"mean_return_{name}"] = float(np.mean([f["returns"][name] for f in finished]))
            else:
                stats[f"mean_return_{name}"] = None
        return stats

    # --- main loop ------------------------------------------------------------------
    def run_epoch(self) -> dict:
        buffers, stats = self.collect_rollouts()
        update_stats = {}
        for name, policy in self.policies.items():
            flat = buffers[name].flat(self.cfg.reward.gamma, self.cfg.ppo.gae_lambda)
            update_stats[name] = ppo_update(
                policy,
                self.optimizers[name],
                flat["obs"],
                flat["actions"],
                flat["old_logp"],
                flat["advantages"],
                flat["returns"],
                self.cfg.ppo,
                self.shuffle_rng,
            )
        self.curriculum = curriculum_update(self.curriculum, stats["success_rate"])
        self.epoch += 1
        row = {
            "epoch": self.epoch,
            "curriculum_mean": self.curriculum.mean_differences,
            **stats,
            "updates": update_stats,
        }
        return row

    def train(self) -> TrainReport:
        out_dir = Path(self.cfg.out_dir)
        report = TrainReport(task=self.cfg.task, condition=self.cfg.condition, seed=self.cfg.seed)
        for _ in range(self.cfg.train.epochs):
            row = self.run_epoch()
            report.per_epoch.append(row)
            if not self.quiet:
                print(canonical_json({k: v for k, v in row.items() if k != "updates"}), flush=True)
            every = self.cfg.train.checkpoint_every
            if every and self.epoch % every == 0 and self.epoch < self.cfg.train.epochs:
                path = out_dir / f"checkpoint-{self.epoch:05d}.ckpt"
                save_checkpoint(path, self.make_checkpoint())
                report.checkpoints.append(str(path))
        final = out_dir / "checkpoint-final.ckpt"
        save_checkpoint(final, self.make_checkpoint())
        report.checkpoints.append(str(final))
        report.final_checkpoint = str(final)
        report.save(out_dir / "train_report.json")
        return report

    def make_checkpoint(self) -> Checkpoint:
        specs = {name: p.spec.to_dict() for name, p in self.policies.items()}
        tensors = {}
        for name, policy in self.policies.items():
            for pname, tensor in policy.state_dict().items():
                tensors[f"{name}/{pname}"] = tensor_to_blob(tensor.detach().numpy())
        return Checkpoint(
            task=self.cfg.task,
            condition=self.cfg.condition,
            epoch=self.epoch,
            config=self.cfg.to_dict(),
            specs=specs,
            tensors=tensors,
            curriculum=self.curriculum.to_dict(),
            rng_state=self.sample_rng.bit_generator.state,
        )


def policies_from_checkpoint(ckpt: Checkpoint) -> dict[str, MlpPolicy]:
    """Rebuild policies with checkpoint weights (init rng is irrelevant)."""
    policies = {}
    for name, spec_dict in ckpt.specs.items():
        spec = PolicyNetworkSpec.from_dict(spec_dict)
        policy = MlpPolicy(spec, np.random.default_rng(0))
        arrays = ckpt.parameter_arrays(name)
        state = {k: torch.from_numpy(v.copy()) for k, v in arrays.items()}
        policy.load_state_dict(state)
        policies[name] = policy
    return policies


def train(config: RunConfig, quiet: bool = False) -> TrainReport:
    """Train per the config; writes checkpoints and the report to out_dir."""
    log = None
    if config.train.log_episodes:
        log = EpisodeLog(Path(config.out_dir) / "train_episodes.jsonl")
    try:
        trainer = Trainer(config, log=log, quiet=quiet)
        return trainer.train()
    finally:
        if log is not None:
            log.close()
