"""Observation encoders and policy networks for both agents.

The user agent is hierarchical: a high-level decision policy picks a target
element and a low-level motor controller (analytic by default, learned for
the out-of-reach task) executes the pointing movement. The interface agent is
a flat policy over UI adaptations; its observation is built purely from
(position, input state, UI state, interaction history) and never reads the
goal.

Network parameters are initialized from a caller-supplied numpy generator, so
a seed fully determines the weights independent of torch's global RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import torch
from torch import nn

from .behavior import MotorCommand
from .core import ContractError, EnvState
from .tasks.base import Box, Task

SIGMA_MAX = 0.15  # learned motor spread ceiling: 15% of the screen
PIXEL_WIDTH = 1.0 / 1000.0  # one normalized pixel on a 1000-px screen


# ---------------------------------------------------------------------------
# observation encoders
# ---------------------------------------------------------------------------

def encode_user_obs(state: EnvState, task: Task) -> np.ndarray:
    """High-level user observation: position ++ UI state ++ input ++ goal."""
    return np.concatenate(
        [
            np.asarray(state.position, dtype=np.float32),
            task.encode_ui(state),
            task.encode_input(state),
            task.encode_goal(state),
        ]
    )


def encode_interface_obs(state: EnvState, task: Task) -> np.ndarray:
    """Interface observation: position ++ input ++ UI state ++ history.

    Goal-agnostic by construction: nothing here reads state.goal.
    """
    return np.concatenate(
        [
            np.asarray(state.position, dtype=np.float32),
            task.encode_input(state),
            task.encode_ui(state),
            state.history.encode(task.history_classes),
        ]
    )


def encode_motor_obs(state: EnvState, task: Task, user_target: int) -> np.ndarray:
    """Low-level motor observation, limited to what the movement needs.

    Menu-shaped tasks: position ++ one-hot target slot. The out-of-reach task
    substitutes the target's coordinates since its objects move.
    """
    pos = np.asarray(state.position, dtype=np.float32)
    if task.task_id == "reach":
        target = np.asarray(task.target_box(state, user_target).center, dtype=np.float32)
        return np.concatenate([pos, target])
    onehot = np.zeros(task.n_user_actions, dtype=np.float32)
    onehot[user_target] = 1.0
    return np.concatenate([pos, onehot])


# dims are resolved by encoding a fresh state once; cheaper than bookkeeping
def observation_dims(task: Task, state: EnvState) -> dict[str, int]:
    dims = {
        "user": encode_user_obs(state, task).shape[0],
        "interface": encode_interface_obs(state, task).shape[0],
    }
    if task.uses_learned_motor:
        dims["motor"] = encode_motor_obs(state, task, 0).shape[0]
    return dims


# ---------------------------------------------------------------------------
# motor controller pieces
# ---------------------------------------------------------------------------

def analytic_motor(position: np.ndarray, target: Box) -> MotorCommand:
    """Aim at the element center with spread equal to one sixth of its width."""
    return MotorCommand(mu=np.asarray(target.center, dtype=np.float64), sigma=target.width / 6.0)


@dataclass(frozen=True)
class MotorRewardParams:
    """Speed-accuracy trade-off weights for the learned motor policy."""

    trade_off: float = 0.5  # lambda
    position_penalty: float = 0.1  # beta: squared-distance scale

    def __post_init__(self) -> None:
        if not 0.0 <= self.trade_off <= 1.0:
            raise ContractError("trade_off must be in [0, 1]")
        if self.position_penalty < 0:
            raise ContractError("position_penalty must be >= 0")


def learned_motor_reward(
    params: MotorRewardParams,
    hit: bool,
    t_m: float,
    mu: np.ndarray,
    target_center: np.ndarray,
) -> float:
    """lambda * (0 on hit, -1 on miss) - (1 - lambda) * T_M - beta * ||mu - target||^2."""
    if t_m < 0:
        raise ContractError("t_m must be >= 0")
    miss = 0.0 if hit else -1.0
    offset = np.asarray(mu, dtype=np.float64) - np.asarray(target_center, dtype=np.float64)
    return (
        params.trade_off * miss
        - (1.0 - params.trade_off) * t_m
        - params.position_penalty * float(offset @ offset)
    )


def decode_motor_action(raw: np.ndarray, n_dims: int) -> MotorCommand:
    """Squash a raw motor action into a valid endpoint command.

    mu: logistic to [0, 1]^n; sigma: logistic then scaled into
    [pixel width, SIGMA_MAX].
    """
    raw = np.asarray(raw, dtype=np.float64)
    mu = 1.0 / (1.0 + np.exp(-raw[:n_dims]))
    s = 1.0 / (1.0 + np.exp(-raw[n_dims]))
    sigma = PIXEL_WIDTH + s * (SIGMA_MAX - PIXEL_WIDTH)
    return MotorCommand(mu=mu, sigma=float(sigma))


# ---------------------------------------------------------------------------
# policy networks
# ---------------------------------------------------------------------------

HeadKind = Literal["categorical", "gaussian"]


@dataclass(frozen=True)
class HeadSpec:
    kind: HeadKind
    size: int  # number of classes, or action dimensionality


@dataclass(frozen=True)
class PolicyNetworkSpec:
    """Architecture description; also serialized into checkpoints."""

    input_dim: int
    hidden: tuple[int, ...]
    heads: tuple[HeadSpec, ...]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "heads": [{"kind": h.kind, "size": h.size} for h in self.heads],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyNetworkSpec":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden=tuple(int(x) for x in d["hidden"]),
            heads=tuple(HeadSpec(kind=h["kind"], size=int(h["size"])) for h in d["heads"]),
        )


def user_network_spec(input_dim: int, n_actions: int) -> PolicyNetworkSpec:
    return PolicyNetworkSpec(input_dim, (512, 512, 512), (HeadSpec("categorical", n_actions),))


def interface_network_spec(input_dim: int, action_dims: Sequence[int]) -> PolicyNetworkSpec:
    return PolicyNetworkSpec(input_dim, (256, 256), tuple(HeadSpec("categorical", d) for d in action_dims))


def motor_network_spec(input_dim: int, n_dims: int) -> PolicyNetworkSpec:
    # mu (n_dims) + sigma (1), emitted as one gaussian head
    return PolicyNetworkSpec(input_dim, (256, 256), (HeadSpec("gaussian", n_dims + 1),))


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return (gain * q[:rows, :cols]).astype(np.float32)


class MlpPolicy(nn.Module):
    """MLP policy with one or more action heads plus a value estimate.

    The value function gets its own trunk of the same width: episodic returns
    here are an order of magnitude larger than per-step policy losses, and a
    shared trunk lets value regression swamp the policy gradient.
    """

    def __init__(self, spec: PolicyNetworkSpec, rng: np.random.Generator):
        super().__init__()
        self.spec = spec

        def make_trunk() -> nn.Sequential:
            layers: list[nn.Module] = []
            prev = spec.input_dim
            for width in spec.hidden:
                layers += [nn.Linear(prev, width), nn.ReLU()]
                prev = width
            return nn.Sequential(*layers)

        self.trunk = make_trunk()
        self.heads = nn.ModuleList(nn.Linear(spec.hidden[-1], h.size) for h in spec.heads)
        self.value_trunk = make_trunk()
        self.value_head = nn.Linear(spec.hidden[-1], 1)
        if any(h.kind == "gaussian" for h in spec.heads):
            self.log_std = nn.Parameter(torch.full((spec.heads[0].size,), -0.5))
        else:
            self.log_std = None
        self._init_weights(rng)

    def _init_weights(self, rng: np.random.Generator) -> None:
        with torch.no_grad():
            for trunk in (self.trunk, self.value_trunk):
                for module in trunk:
                    if isinstance(module, nn.Linear):
                        w = _orthogonal(rng, module.out_features, module.in_features, math.sqrt(2.0))
                        module.weight.copy_(torch.from_numpy(w))
                        module.bias.zero_()
            for head in self.heads:
                w = _orthogonal(rng, head.out_features, head.in_features, 0.01)
                head.weight.copy_(torch.from_numpy(w))
                head.bias.zero_()
            w = _orthogonal(rng, 1, self.value_head.in_features, 1.0)
            self.value_head.weight.copy_(torch.from_numpy(w))
            self.value_head.bias.zero_()

    def forward(self, obs: torch.Tensor) -> tuple[list[torch.Tensor], torch.Tensor]:
        z = self.trunk(obs)
        outs = [head(z) for head in self.heads]
        value = self.value_head(self.value_trunk(obs)).squeeze(-1)
        return outs, value

    # --- log-probabilities and entropy -------------------------------------
    def distribution_stats(self, obs: torch.Tensor, actions: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(log_prob, entropy, value) for given observations and actions.

        Categorical heads expect integer actions of shape (batch, n_heads);
        the gaussian head expects raw float actions of shape (batch, dim).
        """
        outs, value = self.forward(obs)
        if self.log_std is None:
            logp = torch.zeros(obs.shape[0], dtype=obs.dtype)
            ent = torch.zeros(obs.shape[0], dtype=obs.dtype)
            for i, logits in enumerate(outs):
                logits = torch.log_softmax(logits, dim=-1)
                logp = logp + logits.gather(1, actions[:, i : i + 1].long()).squeeze(1)
                probs = torch.exp(logits)
                ent = ent - (probs * logits).sum(dim=-1)
            return logp, ent, value
        mean = outs[0]
        std = torch.exp(self.log_std).to(obs.dtype)
        var = std * std
        logp = (
            -0.5 * ((actions - mean) ** 2 / var).sum(dim=-1)
            - self.log_std.to(obs.dtype).sum()
            - 0.5 * mean.shape[-1] * math.log(2.0 * math.pi)
        )
        ent_per_dim = 0.5 * (1.0 + math.log(2.0 * math.pi)) + self.log_std.to(obs.dtype)
        ent = ent_per_dim.sum().expand(obs.shape[0])
        return logp, ent, value


def policy_act(
    policy: MlpPolicy,
    obs: np.ndarray,
    mode: Literal["stochastic", "greedy"],
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Act on a batch of observations.

    Returns (actions, log_probs, values); actions have shape (batch, n_heads)
    for categorical policies and (batch, dim) raw floats for gaussian ones.
    Stochastic mode needs a generator; sampling uses it, not torch's RNG.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float32))
    if obs.shape[1] != policy.spec.input_dim:
        raise ContractError(
            f"observation dim {obs.shape[1]} does not match network input {policy.spec.input_dim}"
        )
    if mode == "stochastic" and rng is None:
        raise ContractError("stochastic mode requires a random generator")
    with torch.no_grad():
        outs, value = policy.forward(torch.from_numpy(obs))
        if policy.log_std is None:
            batch = obs.shape[0]
            actions = np.zeros((batch, len(outs)), dtype=np.int64)
            logp = np.zeros(batch, dtype=np.float64)
            for i, logits in enumerate(outs):
                log_probs = torch.log_softmax(logits, dim=-1).double().numpy()
                if mode == "greedy":
                    acts = log_probs.argmax(axis=1)
                else:
                    probs = np.exp(log_probs)
                    probs /= probs.sum(axis=1, keepdims=True)
                    u = rng.random(batch)
                    acts = (probs.cumsum(axis=1) > u[:, None]).argmax(axis=1)
                actions[:, i] = acts
                logp += log_probs[np.arange(batch), acts]
            return actions, logp, value.numpy().astype(np.float64)
        mean = outs[0].double().numpy()
        std = np.exp(policy.log_std.detach().double().numpy())
        if mode == "greedy":
            acts = mean
        else:
            acts = mean + std * rng.standard_normal(mean.shape)
        var = std * std
        logp = (
            -0.5 * (((acts - mean) ** 2) / var).sum(axis=1)
            - np.log(std).sum()
            - 0.5 * mean.shape[1] * math.log(2.0 * math.pi)
        )
        return acts, logp, value.numpy().astype(np.float64)
