import json

import numpy as np
import pytest

from coadapt.config import config_from_dict
from coadapt.evaluate import (
    AblationCurve,
    EvalError,
    EvalMetrics,
    evaluate,
    keypad_optimal_schedule,
    replay_episode,
    trace_episode,
)
from coadapt.persist import CheckpointError, EpisodeLog, read_episode_log


class TestEvaluate:
    def test_static_condition_never_calls_the_policy(self, tiny_character_checkpoint):
        metrics = evaluate(tiny_character_checkpoint, "character", "static", 5, seed=3)
        assert metrics.interface_policy_calls == 0

    def test_adaptive_condition_calls_policy_every_step(self, tiny_character_checkpoint):
        metrics = evaluate(tiny_character_checkpoint, "character", "adaptive", 5, seed=3, keep_episodes=True)
        total_steps = sum(e["steps"] for e in metrics.episodes)
        assert metrics.interface_policy_calls == total_steps

    def test_task_mismatch_names_both_tasks(self, tiny_character_checkpoint):
        with pytest.raises(CheckpointError) as err:
            evaluate(tiny_character_checkpoint, "keypad", "static", 5)
        assert "character" in str(err.value) and "keypad" in str(err.value)

    def test_zero_episodes_rejected(self, tiny_character_checkpoint):
        with pytest.raises(EvalError):
            evaluate(tiny_character_checkpoint, "character", "static", 0)

    def test_unknown_condition_rejected(self, tiny_character_checkpoint):
        with pytest.raises(EvalError):
            evaluate(tiny_character_checkpoint, "character", "clairvoyant", 5)

    def test_deterministic_given_seed(self, tiny_character_checkpoint):
        a = evaluate(tiny_character_checkpoint, "character", "random", 10, seed=5)
        b = evaluate(tiny_character_checkpoint, "character", "random", 10, seed=5)
        assert a.to_dict() == b.to_dict()

    def test_csv_row_shape(self, tiny_character_checkpoint):
        metrics = evaluate(tiny_character_checkpoint, "character", "noop", 5, seed=1)
        row = metrics.csv_row()
        assert len(row.split(",")) == len(EvalMetrics.CSV_HEADER.split(","))


class TestTraces:
    def test_identical_seeds_identical_traces(self, tiny_character_checkpoint):
        t1 = trace_episode(tiny_character_checkpoint, "character", seed=4)
        t2 = trace_episode(tiny_character_checkpoint, "character", seed=4)
        assert t1 == t2

    def test_trace_length_bounded_by_step_limit(self, tiny_character_checkpoint):
        cfg = config_from_dict(tiny_character_checkpoint.config)
        trace = trace_episode(tiny_character_checkpoint, "character", seed=8)
        assert len(trace) - 1 <= cfg.reward.step_limit  # first entry is the reset

    def test_trace_entries_are_json_ready(self, tiny_character_checkpoint):
        trace = trace_episode(tiny_character_checkpoint, "character", seed=2)
        text = json.dumps(trace)
        assert json.loads(text) == trace
        assert trace[0]["kind"] == "reset"
        assert all("scene" in entry for entry in trace)


class TestReplay:
    def test_logged_episode_replays_bit_for_bit(self, tiny_character_checkpoint, tmp_path):
        log_path = tmp_path / "eval.jsonl"
        with EpisodeLog(log_path) as log:
            evaluate(tiny_character_checkpoint, "character", "adaptive", 4, seed=9, log=log)
        records = list(read_episode_log(log_path))
        by_episode = {}
        for rec in records:
            by_episode.setdefault(rec["episode"], []).append(rec)
        cfg = config_from_dict(tiny_character_checkpoint.config)
        for ep, recs in by_episode.items():
            replayed = replay_episode(recs, cfg)
            for rec, rep in zip(recs, replayed):
                assert rep["reward_user"] == rec["rewards"]["user"]
                assert rep["reward_interface"] == rec["rewards"]["interface"]
                assert rep["t_d"] == rec["t_d"]
                assert rep["t_m"] == rec["t_m"]
                assert rep["success"] == rec["success"]

    def test_replay_of_empty_records_rejected(self):
        with pytest.raises(EvalError):
            replay_episode([], None)


class TestAblationCurve:
    def test_fractions_must_increase(self):
        with pytest.raises(EvalError):
            AblationCurve(points=[{"fraction": 0.5, "success_rate": 0.9}, {"fraction": 0.25, "success_rate": 0.8}])

    def test_fractions_must_be_in_unit_interval(self):
        with pytest.raises(EvalError):
            AblationCurve(points=[{"fraction": 1.5, "success_rate": 0.9}])

    def test_save_round_trip(self, tmp_path):
        curve = AblationCurve(points=[{"fraction": 0.5, "success_rate": 0.8}, {"fraction": 1.0, "success_rate": 0.9}])
        path = tmp_path / "curve.json"
        curve.save(path)
        assert json.loads(path.read_text()) == curve.to_dict()


class TestKeypadScheduleOracle:
    def test_deterministic(self):
        from coadapt.behavior import DecisionTimeParams, WhoParams
        from coadapt.tasks.keypad import price_to_sequence

        seq = price_to_sequence("42.37")
        home = np.array([0.5, 0.97])
        a = keypad_optimal_schedule(seq, WhoParams(), DecisionTimeParams(), home)
        b = keypad_optimal_schedule(seq, WhoParams(), DecisionTimeParams(), home)
        assert a == b
        assert a["clicks"] == 6
