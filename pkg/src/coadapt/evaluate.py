"""In-silico experiments: baseline comparisons, goal-holdout ablation, traces.

Evaluation always runs greedy (argmax) policies against a conditioned
interface: the learned policy (adaptive), the paged/static layout, uniform
random adaptations, a goal-aware oracle, or no adaptation at all.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import core
from .agents import (
    decode_motor_action,
    encode_interface_obs,
    encode_motor_obs,
    encode_user_obs,
    policy_act,
)
from .behavior import DecisionTimeParams, WhoParams, decision_time, who_movement_time
from .config import EVAL_CONDITIONS, RunConfig, config_from_dict
from .curriculum import CurriculumState
from .persist import Checkpoint, CheckpointError, EpisodeLog, make_record
from .rl import policies_from_checkpoint
from .tasks import Task, get_task
from .tasks.keypad import LAYOUTS, STANDARD, SEQ_LEN


class EvalError(ValueError):
    pass


@dataclass
class EvalMetrics:
    condition: str
    task: str
    n_episodes: int
    success_rate: float
    mean_actions: Optional[float]  # successful episodes only
    mean_predicted_time: Optional[float]  # sum of T_D + T_M, successful episodes
    mean_steps: Optional[float]
    mean_actions_per_step: Optional[float]
    interface_policy_calls: int
    episodes: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def csv_row(self) -> str:
        def fmt(v):
            return "" if v is None else f"{v:.6f}" if isinstance(v, float) else str(v)

        return ",".join(
            fmt(v)
            for v in (
                self.task,
                self.condition,
                self.n_episodes,
                self.success_rate,
                self.mean_actions,
                self.mean_predicted_time,
                self.mean_steps,
                self.mean_actions_per_step,
            )
        )

    CSV_HEADER = "task,condition,n_episodes,success_rate,mean_actions,mean_predicted_time,mean_steps,mean_actions_per_step"


@dataclass
class AblationCurve:
    points: list[dict] = field(default_factory=list)  # {"fraction": f, "success_rate": s, ...}

    def __post_init__(self) -> None:
        fractions = [p["fraction"] for p in self.points]
        if any(b <= a for a, b in zip(fractions, fractions[1:])):
            raise EvalError("ablation fractions must be strictly increasing")
        if any(not 0.0 < f <= 1.0 for f in fractions):
            raise EvalError("ablation fractions must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {"points": self.points}

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")


class InterfaceDriver:
    """Produces per-step adaptations for a named evaluation condition."""

    def __init__(self, task: Task, condition: str, policies: dict, rng: np.random.Generator):
        if condition not in EVAL_CONDITIONS:
            raise EvalError(f"unknown condition {condition!r}; known: {', '.join(EVAL_CONDITIONS)}")
        if condition == "adaptive" and "interface" not in policies:
            raise EvalError("adaptive condition needs an interface policy in the checkpoint")
        self.task = task
        self.condition = condition
        self.policies = policies
        self.rng = rng
        self.policy_calls = 0

    def adapt(self, state: core.EnvState) -> tuple[object, Optional[tuple[int, ...]]]:
        if self.condition == "adaptive":
            obs = encode_interface_obs(state, self.task)
            raw, _, _ = policy_act(self.policies["interface"], obs, "greedy")
            self.policy_calls += 1
            raw_t = tuple(int(a) for a in raw[0])
            return self.task.decode_interface_action(raw_t, state), raw_t
        if self.condition == "static":
            return self.task.static_adaptation(state), None
        if self.condition == "random":
            raw_t = self.task.random_adaptation_raw(state, self.rng)
            if raw_t is None:
                return None, None
            return self.task.decode_interface_action(raw_t, state), raw_t
        if self.condition == "oracle":
            return self.task.oracle_adaptation(state), None
        return self.task.noop_adaptation(state), None


def _user_and_motor_step(task, policies, state, who: WhoParams, env_rng):
    """Greedy high-level choice plus motor planning on an adapted state."""
    obs_u = encode_user_obs(state, task)
    act, _, _ = policy_act(policies["user"], obs_u, "greedy")
    target = int(act[0, 0])
    command = None
    raw_motor = None
    if task.uses_learned_motor and "motor" in policies:
        obs_m = encode_motor_obs(state, task, target)
        raw, _, _ = policy_act(policies["motor"], obs_m, "greedy")
        raw_motor = tuple(float(v) for v in raw[0])
        command = decode_motor_action(raw[0], task.position_dim)
    motor = task.plan_motor(state, target, who, env_rng, command=command)
    return target, motor, raw_motor, obs_u


def evaluate(
    checkpoint: Checkpoint,
    task_id: str,
    condition: str,
    n_episodes: int,
    seed: int = 0,
    log: Optional[EpisodeLog] = None,
    keep_episodes: bool = False,
) -> EvalMetrics:
    """Greedy rollouts of a trained checkpoint under one interface condition."""
    if checkpoint.task != task_id:
        raise CheckpointError(
            f"checkpoint was trained on task {checkpoint.task!r}, cannot evaluate on {task_id!r}"
        )
    if n_episodes < 1:
        raise EvalError("n_episodes must be >= 1")
    task = get_task(task_id)
    cfg = config_from_dict(checkpoint.config)
    policies = policies_from_checkpoint(checkpoint)
    driver_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    driver = InterfaceDriver(task, condition, policies, driver_rng)

    episodes = []
    for ep in range(n_episodes):
        env_rng = np.random.default_rng(np.random.SeedSequence([seed, 0, ep]))
        state = core.reset(task, env_rng)
        predicted_time = 0.0
        while not state.done:
            adaptation, raw_iface = driver.adapt(state)
            adapted = core.apply_interface(state, adaptation, task)
            target, motor, raw_motor, obs_u = _user_and_motor_step(task, policies, adapted, cfg.who, env_rng)
            outcome = core.resolve_user(adapted, target, motor, task, cfg.reward, cfg.decision)
            predicted_time += outcome.decision_time + outcome.movement_time
            if log is not None:
                log.append(
                    make_record(
                        task=task_id,
                        condition=condition,
                        episode=ep,
                        step=state.step_count,
                        seed={"root": seed, "env": 0, "episode": ep, "curriculum_mean": None},
                        obs_user=obs_u,
                        obs_interface=encode_interface_obs(state, task),
                        actions={
                            "interface": list(raw_iface) if raw_iface is not None else None,
                            "user": target,
                            "motor": list(raw_motor) if raw_motor is not None else None,
                        },
                        reward=outcome.reward_user,
                        t_d=outcome.decision_time,
                        t_m=outcome.movement_time,
                        success=outcome.success,
                    )
                )
            state = outcome.next_state
        episodes.append(
            {
                "success": state.success,
                "actions": state.episode_actions,
                "steps": state.step_count,
                "predicted_time": predicted_time,
            }
        )

    successes = [e for e in episodes if e["success"]]
    metrics = EvalMetrics(
        condition=condition,
        task=task_id,
        n_episodes=n_episodes,
        success_rate=len(successes) / n_episodes,
        mean_actions=float(np.mean([e["actions"] for e in successes])) if successes else None,
        mean_predicted_time=float(np.mean([e["predicted_time"] for e in successes])) if successes else None,
        mean_steps=float(np.mean([e["steps"] for e in successes])) if successes else None,
        mean_actions_per_step=float(np.mean([e["actions"] / e["steps"] for e in successes]))
        if successes
        else None,
        interface_policy_calls=driver.policy_calls,
        episodes=episodes if keep_episodes else [],
    )
    return metrics


def goal_holdout_ablation(
    base_config: RunConfig,
    fractions: Sequence[float],
    eval_episodes: int = 500,
    eval_seed: int = 1000,
    quiet: bool = True,
) -> AblationCurve:
    """Train on goal subsets, evaluate each on the full goal set."""
    from .persist import load_checkpoint
    from .rl import train as rl_train

    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise EvalError("fractions must lie in (0, 1]")
    points = []
    for fraction in fractions:
        cfg = base_config.replace(
            goal_fraction=float(fraction),
            out_dir=str(Path(base_config.out_dir) / f"ablate-{fraction:g}"),
        )
        report = rl_train(cfg, quiet=quiet)
        ckpt = load_checkpoint(report.final_checkpoint)
        metrics = evaluate(ckpt, cfg.task, cfg.condition, eval_episodes, seed=eval_seed)
        points.append(
            {
                "fraction": float(fraction),
                "success_rate": metrics.success_rate,
                "mean_actions": metrics.mean_actions,
                "checkpoint": report.final_checkpoint,
            }
        )
    return AblationCurve(points=points)


def trace_episode(
    checkpoint: Checkpoint,
    task_id: str,
    seed: int,
    condition: str = "adaptive",
) -> list[dict]:
    """Deterministic greedy replay emitting one JSON-ready entry per step."""
    if checkpoint.task != task_id:
        raise CheckpointError(
            f"checkpoint was trained on task {checkpoint.task!r}, cannot trace {task_id!r}"
        )
    task = get_task(task_id)
    cfg = config_from_dict(checkpoint.config)
    policies = policies_from_checkpoint(checkpoint)
    driver = InterfaceDriver(task, condition, policies, np.random.default_rng(np.random.SeedSequence([seed, 1])))
    env_rng = np.random.default_rng(np.random.SeedSequence([seed, 0, 0]))
    state = core.reset(task, env_rng)
    trace = [{"step": 0, "scene": task.scene_snapshot(state), "kind": "reset"}]
    while not state.done:
        adaptation, raw_iface = driver.adapt(state)
        adapted = core.apply_interface(state, adaptation, task)
        target, motor, raw_motor, _ = _user_and_motor_step(task, policies, adapted, cfg.who, env_rng)
        outcome = core.resolve_user(adapted, target, motor, task, cfg.reward, cfg.decision)
        trace.append(
            {
                "step": outcome.next_state.step_count,
                "kind": "joint_step",
                "scene": task.scene_snapshot(adapted),
                "interface_action": list(raw_iface) if raw_iface is not None else None,
                "user_action": target,
                "element": outcome.element,
                "reward_user": outcome.reward_user,
                "reward_interface": outcome.reward_interface,
                "t_d": outcome.decision_time,
                "t_m": outcome.movement_time,
                "success": outcome.success,
                "done": outcome.next_state.done,
            }
        )
        state = outcome.next_state
    return trace


def replay_episode(records: list[dict], config: RunConfig) -> list[dict]:
    """Re-run a logged episode from its seed and raw actions.

    Returns one dict per step with the recomputed rewards and times, which
    must match the log bit-for-bit for a faithful environment.
    """
    if not records:
        raise EvalError("no records to replay")
    head = records[0]
    task = get_task(head["task"])
    seed = head["seed"]
    env_rng = np.random.default_rng(
        np.random.SeedSequence([seed["root"], seed["env"], seed["episode"]])
    )
    curriculum_mean = seed.get("curriculum_mean")
    curriculum = None
    if curriculum_mean is not None:
        curriculum = CurriculumState(mean_differences=curriculum_mean)
    state = core.reset(task, env_rng, curriculum=curriculum)
    out = []
    condition = head["condition"]
    for rec in records:
        raw_iface = rec["actions"]["interface"]
        if raw_iface is not None:
            adaptation = task.decode_interface_action(tuple(raw_iface), state)
        elif condition == "static":
            adaptation = task.static_adaptation(state)
        elif condition == "oracle":
            adaptation = task.oracle_adaptation(state)
        else:
            adaptation = task.noop_adaptation(state)
        adapted = core.apply_interface(state, adaptation, task)
        raw_motor = rec["actions"]["motor"]
        command = decode_motor_action(np.asarray(raw_motor), task.position_dim) if raw_motor else None
        motor = task.plan_motor(adapted, rec["actions"]["user"], config.who, env_rng, command=command)
        outcome = core.resolve_user(adapted, rec["actions"]["user"], motor, task, config.reward, config.decision)
        out.append(
            {
                "reward_user": outcome.reward_user,
                "reward_interface": outcome.reward_interface,
                "t_d": outcome.decision_time,
                "t_m": outcome.movement_time,
                "success": outcome.success,
            }
        )
        state = outcome.next_state
    return out


# ---------------------------------------------------------------------------
# keypad layout-schedule oracle
# ---------------------------------------------------------------------------

def keypad_optimal_schedule(
    goal_seq: Sequence[int],
    who: WhoParams,
    decision_params: DecisionTimeParams,
    home: np.ndarray,
) -> dict:
    """Brute-force optimal per-click layout sequence for one price.

    Exact dynamic program over (step, layout): the position after a correct
    click is that key's center, so the state space is tiny. Also returns the
    all-standard (static) schedule time for comparison.
    """
    key_boxes = {lid: {sym: box for sym, box in keys} for lid, keys in LAYOUTS.items()}

    def click_cost(layout: int, symbol: int, from_pos: np.ndarray) -> Optional[float]:
        boxes = key_boxes[layout]
        if symbol not in boxes:
            return None
        box = boxes[symbol]
        t_d = decision_time(decision_params, len(boxes))
        dist = float(np.linalg.norm(box.center - from_pos))
        t_m = who_movement_time(who, dist, box.width / 6.0)
        return t_d + t_m

    n = len(goal_seq)
    best: dict[int, tuple[float, list[int]]] = {}
    for lid in LAYOUTS:
        cost = click_cost(lid, goal_seq[0], np.asarray(home, dtype=np.float64))
        if cost is not None:
            best[lid] = (cost, [lid])
    for t in range(1, n):
        nxt: dict[int, tuple[float, list[int]]] = {}
        for lid in LAYOUTS:
            for prev_lid, (prev_cost, path) in best.items():
                from_pos = key_boxes[prev_lid][goal_seq[t - 1]].center
                cost = click_cost(lid, goal_seq[t], from_pos)
                if cost is None:
                    continue
                total = prev_cost + cost
                if lid not in nxt or total < nxt[lid][0]:
                    nxt[lid] = (total, path + [lid])
        best = nxt
    adaptive_time, layouts = min(best.values(), key=lambda v: v[0])

    static_time = 0.0
    pos = np.asarray(home, dtype=np.float64)
    for sym in goal_seq:
        static_time += click_cost(STANDARD, sym, pos)
        pos = key_boxes[STANDARD][sym].center
    return {
        "clicks": n,
        "adaptive_time": adaptive_time,
        "static_time": static_time,
        "layouts": layouts,
    }
