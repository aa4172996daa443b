"""Human-in-the-loop session service.

A trained interface policy is exposed over a persistent WebSocket: the human
replaces the simulated user agent, one session per connection, strictly
lock-step (every click is answered by exactly one ui_update or trial_end).
Adaptation always precedes the next human action, mirroring the training
step ordering. Simulated decision/movement times are not applied to humans;
wall-clock times are logged instead.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import core
from .agents import encode_interface_obs, encode_user_obs
from .behavior import DecisionTimeParams, MotorOutcome
from .config import config_from_dict
from .evaluate import InterfaceDriver
from .persist import Checkpoint, EpisodeLog, make_record
from .rl import policies_from_checkpoint
from .tasks import Task, get_task

SERVABLE_TASKS = ("character", "keypad", "hmenu")
DEFAULT_CONDITIONS = ("adaptive", "static", "random")

# humans bring their own decision/movement time
_ZERO_TIME = DecisionTimeParams(0.0, 0.0, 0.0, 0.0, 0.0)


class ErrorCode:
    CONDITION_UNSUPPORTED = "CONDITION_UNSUPPORTED"
    TASK_MISMATCH = "TASK_MISMATCH"
    LAYOUT_STALE = "LAYOUT_STALE"
    UNKNOWN_ELEMENT = "UNKNOWN_ELEMENT"
    PROTOCOL_ERROR = "PROTOCOL_ERROR"


class SessionError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# JSON Schemas for the wire protocol (also documented in docs/wire_protocol.md)
CLIENT_SCHEMAS = {
    "open_session": {
        "type": "object",
        "properties": {
            "type": {"const": "open_session"},
            "task": {"type": "string"},
            "condition": {"type": "string"},
            "trials": {"type": "integer", "minimum": 1},
            "client": {"type": "string"},
            "seed": {"type": "integer"},
        },
        "required": ["type", "task", "condition", "trials"],
        "additionalProperties": False,
    },
    "user_click": {
        "type": "object",
        "properties": {
            "type": {"const": "user_click"},
            "element": {"type": "string"},
            "revision": {"type": "integer", "minimum": 1},
            "client_ts": {"type": "number"},
        },
        "required": ["type", "element", "revision"],
        "additionalProperties": False,
    },
}

SERVER_SCHEMAS = {
    "session_start": {
        "type": "object",
        "properties": {
            "type": {"const": "session_start"},
            "session_id": {"type": "string"},
            "task": {"type": "string"},
            "condition": {"type": "string"},
            "trials": {"type": "integer"},
        },
        "required": ["type", "session_id", "task", "condition", "trials"],
        "additionalProperties": False,
    },
    "trial_begin": {
        "type": "object",
        "properties": {
            "type": {"const": "trial_begin"},
            "trial": {"type": "integer"},
            "revision": {"type": "integer"},
            "goal": {"type": "object"},
            "scene": {"type": "object"},
            "step_limit": {"type": "integer"},
        },
        "required": ["type", "trial", "revision", "goal", "scene", "step_limit"],
        "additionalProperties": False,
    },
    "ui_update": {
        "type": "object",
        "properties": {
            "type": {"const": "ui_update"},
            "trial": {"type": "integer"},
            "revision": {"type": "integer"},
            "scene": {"type": "object"},
        },
        "required": ["type", "trial", "revision", "scene"],
        "additionalProperties": False,
    },
    "trial_end": {
        "type": "object",
        "properties": {
            "type": {"const": "trial_end"},
            "trial": {"type": "integer"},
            "success": {"type": "boolean"},
            "actions": {"type": "integer"},
            "wall_time_s": {"type": "number"},
        },
        "required": ["type", "trial", "success", "actions", "wall_time_s"],
        "additionalProperties": False,
    },
    "session_end": {
        "type": "object",
        "properties": {
            "type": {"const": "session_end"},
            "trials_completed": {"type": "integer"},
            "successes": {"type": "integer"},
        },
        "required": ["type", "trials_completed", "successes"],
        "additionalProperties": False,
    },
    "error": {
        "type": "object",
        "properties": {
            "type": {"const": "error"},
            "code": {"type": "string"},
            "message": {"type": "string"},
        },
        "required": ["type", "code", "message"],
        "additionalProperties": False,
    },
}


@dataclass
class SessionState:
    session_id: str
    task_id: str
    condition: str
    trial_count: int
    seed: int
    trial_index: int = 0
    revision: int = 0
    env: Optional[core.EnvState] = None
    env_rng: Optional[np.random.Generator] = None
    driver: Optional[InterfaceDriver] = None
    step_limit: int = 0
    n_differences: int = 0
    clicks_this_trial: int = 0
    trial_started: float = 0.0
    successes: int = 0
    trials_completed: int = 0
    closed: bool = False
    k_schedule: list[int] = field(default_factory=list)
    pending_raw: Optional[tuple[int, ...]] = None  # interface action behind the current layout


class SessionService:
    """Transport-agnostic session logic; the WebSocket layer is a thin shell."""

    def __init__(
        self,
        checkpoint: Checkpoint,
        condition_allowlist: tuple[str, ...] = DEFAULT_CONDITIONS,
        log_path: Optional[str | Path] = None,
    ):
        if checkpoint.task not in SERVABLE_TASKS:
            raise SessionError(
                ErrorCode.TASK_MISMATCH,
                f"task {checkpoint.task!r} has no human-clickable layout; servable: {SERVABLE_TASKS}",
            )
        self.checkpoint = checkpoint
        self.task: Task = get_task(checkpoint.task)
        self.config = config_from_dict(checkpoint.config)
        self.policies = policies_from_checkpoint(checkpoint)
        self.allowlist = tuple(condition_allowlist)
        self.log = EpisodeLog(log_path) if log_path else None
        self.latencies_ms: list[float] = []
        self.sessions: dict[str, SessionState] = {}

    # --- lifecycle -------------------------------------------------------------
    def open_session(self, request: dict) -> tuple[SessionState, list[dict]]:
        task_id = request.get("task")
        condition = request.get("condition")
        trials = int(request.get("trials", 0))
        if task_id != self.task.task_id:
            raise SessionError(
                ErrorCode.TASK_MISMATCH,
                f"service hosts task {self.task.task_id!r}, session requested {task_id!r}",
            )
        if condition not in self.allowlist or condition not in DEFAULT_CONDITIONS:
            raise SessionError(
                ErrorCode.CONDITION_UNSUPPORTED,
                f"condition {condition!r} not served; allowed: {self.allowlist}",
            )
        if trials < 1:
            raise SessionError(ErrorCode.PROTOCOL_ERROR, "trials must be >= 1")
        seed = int(request.get("seed", uuid.uuid4().int % 2**31))
        session = SessionState(
            session_id=uuid.uuid4().hex,
            task_id=task_id,
            condition=condition,
            trial_count=trials,
            seed=seed,
        )
        # initial attribute differences balanced across trials (uniform 1..n)
        schedule_rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
        n = max(self.task.n_attr, 1)
        blocks = []
        while len(blocks) < trials:
            blocks.extend(schedule_rng.permutation(np.arange(1, n + 1)).tolist())
        session.k_schedule = [int(k) for k in blocks[:trials]]
        session.driver = InterfaceDriver(
            self.task, condition, self.policies, np.random.default_rng(np.random.SeedSequence([seed, 1]))
        )
        self.sessions[session.session_id] = session
        messages = [
            {
                "type": "session_start",
                "session_id": session.session_id,
                "task": task_id,
                "condition": condition,
                "trials": trials,
            },
            self._begin_trial(session),
        ]
        return session, messages

    def _goal_payload(self, state: core.EnvState) -> dict:
        if self.task.task_id in ("character", "hmenu"):
            return {"states": list(state.goal.states())}
        if self.task.task_id == "keypad":
            return {"sequence": list(state.goal)}
        return {}

    def _begin_trial(self, session: SessionState) -> dict:
        k = session.k_schedule[session.trial_index]
        session.env_rng = np.random.default_rng(
            np.random.SeedSequence([session.seed, 0, session.trial_index])
        )
        state = core.reset(self.task, session.env_rng, n_differences=k)
        session.n_differences = k
        # adaptation precedes the human's first action
        adaptation, raw = session.driver.adapt(state)
        state = core.apply_interface(state, adaptation, self.task)
        session.env = state
        session.revision = 1
        session.clicks_this_trial = 0
        session.trial_started = time.monotonic()
        session.step_limit = 3 * self.task.optimal_path_length(state)
        session.pending_raw = raw
        return {
            "type": "trial_begin",
            "trial": session.trial_index,
            "revision": session.revision,
            "goal": self._goal_payload(state),
            "scene": self.task.scene_snapshot(state),
            "step_limit": session.step_limit,
        }

    # --- click handling ----------------------------------------------------------
    def handle_click(self, session: SessionState, message: dict) -> list[dict]:
        if session.closed or session.env is None:
            raise SessionError(ErrorCode.PROTOCOL_ERROR, "session is not active")
        if int(message.get("revision", -1)) != session.revision:
            return [
                {
                    "type": "error",
                    "code": ErrorCode.LAYOUT_STALE,
                    "message": f"click was for revision {message.get('revision')}, "
                    f"layout is at {session.revision}",
                },
                {
                    "type": "ui_update",
                    "trial": session.trial_index,
                    "revision": session.revision,
                    "scene": self.task.scene_snapshot(session.env),
                },
            ]
        targets = self.task.click_targets(session.env)
        element = message.get("element")
        if element not in targets:
            raise SessionError(
                ErrorCode.UNKNOWN_ELEMENT,
                f"element {element!r} is not clickable; valid: {sorted(targets)}",
            )
        target_index, point = targets[element]
        state_before = session.env
        started = time.perf_counter()
        motor = MotorOutcome(endpoint=np.asarray(point, dtype=np.float64), movement_time=0.0, hit=True)
        outcome = core.resolve_user(
            state_before, target_index, motor, self.task, self.config.reward, _ZERO_TIME
        )
        state = outcome.next_state
        session.clicks_this_trial += 1

        messages: list[dict] = []
        raw_next = None
        trial_failed = (not state.done) and session.clicks_this_trial >= session.step_limit
        if not state.done and not trial_failed:
            adaptation, raw_next = session.driver.adapt(state)
            state = core.apply_interface(state, adaptation, self.task)
            session.env = state
            session.revision += 1
            messages.append(
                {
                    "type": "ui_update",
                    "trial": session.trial_index,
                    "revision": session.revision,
                    "scene": self.task.scene_snapshot(state),
                }
            )
        latency_ms = (time.perf_counter() - started) * 1000.0
        self.latencies_ms.append(latency_ms)

        if self.log is not None:
            self.log.append(
                make_record(
                    task=session.task_id,
                    condition=session.condition,
                    episode=session.trial_index,
                    step=state_before.step_count,
                    seed={
                        "root": session.seed,
                        "env": 0,
                        "episode": session.trial_index,
                        "n_differences": session.n_differences,
                    },
                    obs_user=encode_user_obs(state_before, self.task),
                    obs_interface=encode_interface_obs(state_before, self.task),
                    actions={
                        "interface": list(session.pending_raw) if session.pending_raw is not None else None,
                        "user": target_index,
                        "motor": None,
                    },
                    reward=outcome.reward_user,
                    t_d=0.0,
                    t_m=0.0,
                    success=outcome.success,
                    session=session.session_id,
                    element=element,
                    endpoint=[float(v) for v in point],
                    wall_ms=latency_ms,
                    revision=int(message["revision"]),
                )
            )
        session.pending_raw = raw_next

        if state.done or trial_failed:
            wall = time.monotonic() - session.trial_started
            success = bool(state.success)
            session.successes += int(success)
            session.trials_completed += 1
            messages.append(
                {
                    "type": "trial_end",
                    "trial": session.trial_index,
                    "success": success,
                    "actions": state.episode_actions,
                    "wall_time_s": wall,
                }
            )
            session.trial_index += 1
            if session.trial_index < session.trial_count:
                messages.append(self._begin_trial(session))
            else:
                session.closed = True
                session.env = None
                messages.append(
                    {
                        "type": "session_end",
                        "trials_completed": session.trials_completed,
                        "successes": session.successes,
                    }
                )
        return messages

    def close(self) -> None:
        if self.log is not None:
            self.log.close()


def replay_session_log(records: list[dict], checkpoint: Checkpoint) -> list[dict]:
    """Recompute a logged human trial through the environment core.

    Returns per-step dicts with the recomputed user/interface observation
    encodings and rewards; a faithful service log matches them exactly.
    """
    if not records:
        return []
    task = get_task(records[0]["task"])
    cfg = config_from_dict(checkpoint.config)
    seed = records[0]["seed"]
    env_rng = np.random.default_rng(np.random.SeedSequence([seed["root"], 0, seed["episode"]]))
    state = core.reset(task, env_rng, n_differences=seed["n_differences"])
    condition = records[0]["condition"]
    out = []
    pending_raws = [r["actions"]["interface"] for r in records]
    for i, rec in enumerate(records):
        raw = pending_raws[i]
        if raw is not None:
            adaptation = task.decode_interface_action(tuple(raw), state)
        elif condition == "static":
            adaptation = task.static_adaptation(state)
        else:
            adaptation = task.noop_adaptation(state)
        state = core.apply_interface(state, adaptation, task)
        motor = MotorOutcome(
            endpoint=np.asarray(rec["endpoint"], dtype=np.float64), movement_time=0.0, hit=True
        )
        outcome = core.resolve_user(state, rec["actions"]["user"], motor, task, cfg.reward, _ZERO_TIME)
        out.append(
            {
                "obs_user": encode_user_obs(state, task).tolist(),
                "obs_interface": encode_interface_obs(state, task).tolist(),
                "reward_user": outcome.reward_user,
                "success": outcome.success,
            }
        )
        state = outcome.next_state
    return out


# ---------------------------------------------------------------------------
# WebSocket application
# ---------------------------------------------------------------------------

def create_app(service: SessionService) -> FastAPI:
    """FastAPI app: GET /healthz readiness plus the /session WebSocket."""
    app = FastAPI(title="coadapt session service")
    app.state.service = service

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "task": service.task.task_id,
            "conditions": list(service.allowlist),
        }

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        session = None
        try:
            request = await ws.receive_json()
            try:
                jsonschema.validate(request, CLIENT_SCHEMAS["open_session"])
                session, messages = service.open_session(request)
            except jsonschema.ValidationError as e:
                await ws.send_json({"type": "error", "code": ErrorCode.PROTOCOL_ERROR, "message": e.message})
                await ws.close()
                return
            except SessionError as e:
                await ws.send_json({"type": "error", "code": e.code, "message": str(e)})
                await ws.close()
                return
            for m in messages:
                await ws.send_json(m)
            while not session.closed:
                message = await ws.receive_json()
                try:
                    jsonschema.validate(message, CLIENT_SCHEMAS["user_click"])
                    replies = service.handle_click(session, message)
                except jsonschema.ValidationError as e:
                    replies = [{"type": "error", "code": ErrorCode.PROTOCOL_ERROR, "message": e.message}]
                except SessionError as e:
                    replies = [{"type": "error", "code": e.code, "message": str(e)}]
                for m in replies:
                    await ws.send_json(m)
            await ws.close()
        except WebSocketDisconnect:
            pass
        finally:
            if session is not None:
                service.sessions.pop(session.session_id, None)

    return app


def run_server(service: SessionService, port: int, host: str = "127.0.0.1") -> None:
    import uvicorn

    app = create_app(service)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        service.close()
