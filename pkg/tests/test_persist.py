import json
import multiprocessing as mp
from pathlib import Path

import numpy as np
import pytest

from coadapt.persist import (
    Checkpoint,
    CheckpointError,
    CorruptCheckpointError,
    EpisodeLog,
    RecordError,
    blob_to_tensor,
    canonical_json,
    config_hash,
    load_checkpoint,
    read_episode_log,
    save_checkpoint,
    tensor_to_blob,
    validate_record,
)


def random_checkpoint(rng: np.random.Generator) -> Checkpoint:
    tensors = {}
    for name in ("user/w1", "user/b1", "interface/w1"):
        shape = tuple(int(s) for s in rng.integers(1, 8, size=int(rng.integers(1, 3))))
        tensors[name] = tensor_to_blob(rng.normal(size=shape).astype(np.float32))
    return Checkpoint(
        task="character",
        condition="adaptive",
        epoch=int(rng.integers(0, 500)),
        config={"task": "character", "seed": int(rng.integers(0, 10))},
        specs={"user": {"input_dim": 77, "hidden": [512], "heads": [{"kind": "categorical", "size": 4}]}},
        tensors=tensors,
        curriculum={"mean_differences": float(rng.uniform(1, 5))},
        rng_state={"bit_generator": "PCG64", "state": {"state": int(rng.integers(0, 2**62)), "inc": 3}},
    )


class TestTensorBlobs:
    def test_round_trip_exact(self, rng):
        arr = rng.normal(size=(7, 3)).astype(np.float32)
        assert np.array_equal(blob_to_tensor(tensor_to_blob(arr)), arr)

    def test_length_prefix_guard(self, rng):
        blob = tensor_to_blob(rng.normal(size=4).astype(np.float32))
        import base64

        payload = bytearray(base64.b64decode(blob["data"]))
        truncated = dict(blob, data=base64.b64encode(bytes(payload[:-4])).decode())
        with pytest.raises(CorruptCheckpointError):
            blob_to_tensor(truncated)


class TestCheckpointRoundTrip:
    def test_structural_equality(self, tmp_path, rng):
        ckpt = random_checkpoint(rng)
        path = tmp_path / "a.ckpt"
        save_checkpoint(path, ckpt)
        loaded = load_checkpoint(path)
        assert loaded.to_dict() == ckpt.to_dict()

    def test_load_save_is_byte_identical(self, tmp_path, rng):
        path = tmp_path / "a.ckpt"
        save_checkpoint(path, random_checkpoint(rng))
        original = path.read_bytes()
        save_checkpoint(tmp_path / "b.ckpt", load_checkpoint(path))
        assert (tmp_path / "b.ckpt").read_bytes() == original

    def test_many_random_instances(self, tmp_path):
        rng = np.random.default_rng(123)
        for i in range(50):
            ckpt = random_checkpoint(rng)
            path = tmp_path / f"c{i}.ckpt"
            save_checkpoint(path, ckpt)
            assert load_checkpoint(path).to_dict() == ckpt.to_dict()

    def test_truncated_file_is_structured_error(self, tmp_path, rng):
        path = tmp_path / "a.ckpt"
        save_checkpoint(path, random_checkpoint(rng))
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_unknown_version_rejected_explicitly(self, tmp_path, rng):
        ckpt = random_checkpoint(rng)
        d = ckpt.to_dict()
        d["format_version"] = 99
        path = tmp_path / "v99.ckpt"
        path.write_text(canonical_json(d))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_config_hash_mismatch_rejected_unless_forced(self, tmp_path, rng):
        ckpt = random_checkpoint(rng)
        path = tmp_path / "a.ckpt"
        save_checkpoint(path, ckpt)
        other = {"task": "character", "seed": 9999}
        with pytest.raises(CheckpointError, match="hash"):
            load_checkpoint(path, expected_config=other)
        assert load_checkpoint(path, expected_config=other, force=True).epoch == ckpt.epoch
        assert load_checkpoint(path, expected_config=ckpt.config).epoch == ckpt.epoch


def _record(i=0, reward=0.5):
    return {
        "schema_version": 1,
        "task": "character",
        "condition": "adaptive",
        "episode": i,
        "step": 0,
        "rewards": {"user": reward, "interface": reward},
        "t_d": 0.5,
        "t_m": 0.3,
        "success": False,
    }


def _writer_process(path, offset):
    with EpisodeLog(path) as log:
        for i in range(200):
            log.append(_record(offset + i))


class TestEpisodeLog:
    def test_three_records_three_lines(self, tmp_path):
        path = tmp_path / "log.jsonl"
        with EpisodeLog(path) as log:
            for i in range(3):
                log.append(_record(i))
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 3
        assert all(json.loads(line)["episode"] == i for i, line in enumerate(lines))

    def test_reward_invariant_gate(self, tmp_path):
        rec = _record()
        rec["rewards"]["interface"] = 0.4999
        with EpisodeLog(tmp_path / "log.jsonl") as log:
            with pytest.raises(RecordError, match="equal"):
                log.append(rec)

    def test_missing_field_rejected(self):
        rec = _record()
        del rec["t_d"]
        with pytest.raises(RecordError, match="t_d"):
            validate_record(rec)

    def test_concurrent_appends_are_line_atomic(self, tmp_path):
        path = tmp_path / "log.jsonl"
        procs = [mp.Process(target=_writer_process, args=(str(path), k * 1000)) for k in range(2)]
        for p in procs:
            p.start()
        for p in procs:
            p.join()
        records = list(read_episode_log(path))
        assert len(records) == 400
        episodes = sorted(r["episode"] for r in records)
        assert episodes == sorted(list(range(0, 200)) + list(range(1000, 1200)))

    def test_round_trip_parse(self, tmp_path):
        path = tmp_path / "log.jsonl"
        rng = np.random.default_rng(0)
        written = []
        with EpisodeLog(path) as log:
            for i in range(20):
                rec = _record(i, reward=float(rng.normal()))
                written.append(rec)
                log.append(rec)
        assert list(read_episode_log(path)) == written


class TestCanonicalJson:
    def test_sorted_and_compact(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'

    def test_hash_is_stable_under_key_order(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("nan")})
