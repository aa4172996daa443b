"""Deterministic serialization: checkpoints, episode logs, canonical JSON.

Checkpoints are a canonical-JSON envelope (sorted keys, fixed separators)
whose parameter tensors are length-prefixed little-endian float32 blocks,
base64-encoded. Loading and re-saving a checkpoint is byte-identical.

Episode logs are line-delimited JSON; each line is written with a single
append call so concurrent writers interleave at line granularity.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

SCHEMA_VERSION = 1
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


class CorruptCheckpointError(CheckpointError):
    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message if offset is None else f"{message} (at byte offset {offset})")
        self.offset = offset


class RecordError(ValueError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


# ---------------------------------------------------------------------------
# tensor blocks
# ---------------------------------------------------------------------------

def tensor_to_blob(arr: np.ndarray) -> dict:
    """Length-prefixed little-endian float32 block wrapped for JSON."""
    flat = np.ascontiguousarray(arr, dtype="<f4")
    payload = struct.pack("<Q", flat.nbytes) + flat.tobytes()
    return {"shape": list(arr.shape), "dtype": "<f4", "data": base64.b64encode(payload).decode("ascii")}


def blob_to_tensor(blob: dict) -> np.ndarray:
    payload = base64.b64decode(blob["data"])
    (nbytes,) = struct.unpack("<Q", payload[:8])
    body = payload[8:]
    if len(body) != nbytes:
        raise CorruptCheckpointError(
            f"tensor block length mismatch: prefix says {nbytes}, found {len(body)}"
        )
    arr = np.frombuffer(body, dtype="<f4").reshape(blob["shape"])
    return arr.copy()


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    task: str
    condition: str
    epoch: int
    config: dict
    specs: dict[str, dict]  # policy name -> network spec
    tensors: dict[str, dict]  # "policy/param" -> blob
    curriculum: dict
    rng_state: Optional[dict] = None
    format_version: int = CHECKPOINT_VERSION
    config_hash: str = ""

    def __post_init__(self) -> None:
        if not self.config_hash:
            self.config_hash = config_hash(self.config)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "task": self.task,
            "condition": self.condition,
            "epoch": self.epoch,
            "config": self.config,
            "config_hash": self.config_hash,
            "specs": self.specs,
            "tensors": self.tensors,
            "curriculum": self.curriculum,
            "rng_state": self.rng_state,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Checkpoint":
        return cls(
            task=d["task"],
            condition=d["condition"],
            epoch=d["epoch"],
            config=d["config"],
            specs=d["specs"],
            tensors=d["tensors"],
            curriculum=d["curriculum"],
            rng_state=d.get("rng_state"),
            format_version=d["format_version"],
            config_hash=d["config_hash"],
        )

    def parameter_arrays(self, policy: str) -> dict[str, np.ndarray]:
        prefix = policy + "/"
        return {
            name[len(prefix):]: blob_to_tensor(blob)
            for name, blob in self.tensors.items()
            if name.startswith(prefix)
        }


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    payload = canonical_json(ckpt.to_dict()) + "\n"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload)


def load_checkpoint(path: str | Path, expected_config: Optional[dict] = None, force: bool = False) -> Checkpoint:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise CorruptCheckpointError(f"checkpoint is not valid JSON: {e.msg}", offset=e.pos) from e
    if not isinstance(data, dict) or "format_version" not in data:
        raise CorruptCheckpointError("checkpoint envelope is missing format_version")
    if data["format_version"] != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unknown checkpoint format version {data['format_version']} (supported: {CHECKPOINT_VERSION})"
        )
    try:
        ckpt = Checkpoint.from_dict(data)
    except KeyError as e:
        raise CorruptCheckpointError(f"checkpoint envelope is missing field {e}") from e
    if expected_config is not None and not force:
        expected = config_hash(expected_config)
        if expected != ckpt.config_hash:
            raise CheckpointError(
                f"config hash mismatch: checkpoint {ckpt.config_hash[:12]}…, "
                f"current config {expected[:12]}… (pass force=True to override)"
            )
    return ckpt


# ---------------------------------------------------------------------------
# episode logs
# ---------------------------------------------------------------------------

_REQUIRED_RECORD_FIELDS = (
    "schema_version",
    "task",
    "condition",
    "episode",
    "step",
    "rewards",
    "t_d",
    "t_m",
    "success",
)


def validate_record(record: dict) -> None:
    missing = [f for f in _REQUIRED_RECORD_FIELDS if f not in record]
    if missing:
        raise RecordError(f"episode record missing field(s): {missing}")
    rewards = record["rewards"]
    if rewards["interface"] != rewards["user"]:
        raise RecordError(
            f"interface reward {rewards['interface']!r} must equal user reward {rewards['user']!r}"
        )


def make_record(
    *,
    task: str,
    condition: str,
    episode: int,
    step: int,
    seed: dict,
    obs_user,
    obs_interface,
    actions: dict,
    reward: float,
    t_d: float,
    t_m: float,
    success: bool,
    **extra,
) -> dict:
    record = {
        "schema_version": SCHEMA_VERSION,
        "task": task,
        "condition": condition,
        "episode": episode,
        "step": step,
        "seed": seed,
        "obs": {
            "user": np.asarray(obs_user, dtype=np.float32).tolist(),
            "interface": np.asarray(obs_interface, dtype=np.float32).tolist(),
        },
        "actions": actions,
        "rewards": {"user": reward, "interface": reward},
        "t_d": t_d,
        "t_m": t_m,
        "success": success,
        "timestamp": time.time(),
    }
    record.update(extra)
    return record


class EpisodeLog:
    """Append-only line-delimited JSON log with write-time invariant checks."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fd = os.open(str(self.path), os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)

    def append(self, record: dict) -> None:
        validate_record(record)
        line = canonical_json(record) + "\n"
        os.write(self._fd, line.encode())

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self) -> "EpisodeLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_episode_log(path: str | Path) -> Iterator[dict]:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
