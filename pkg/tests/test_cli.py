import json
import os
from pathlib import Path

import pytest

from coadapt.cli import build_parser, main
from coadapt.config import TrainLoopConfig, default_config

DATA = Path(__file__).parent / "data"


def write_tiny_config(tmp_path, **overrides) -> Path:
    cfg = default_config("character").replace(
        out_dir=str(tmp_path / "run"),
        ppo=default_config("character").ppo.__class__(rollout_length=512, minibatch_size=128),
        train=TrainLoopConfig(epochs=2, num_envs=8),
        **overrides,
    )
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.to_dict(), indent=1))
    return path


class TestHelpGoldenFiles:
    def test_main_help(self, monkeypatch):
        monkeypatch.setenv("COLUMNS", "100")
        assert build_parser().format_help() == (DATA / "help_main.txt").read_text()

    @pytest.mark.parametrize("name", ["train", "eval", "ablate", "replay", "serve"])
    def test_subcommand_help(self, name, monkeypatch):
        monkeypatch.setenv("COLUMNS", "100")
        parser = build_parser()
        sub = parser._subparsers._group_actions[0].choices[name]
        assert sub.format_help() == (DATA / f"help_{name}.txt").read_text()

    def test_every_documented_flag_appears(self, monkeypatch):
        monkeypatch.setenv("COLUMNS", "100")
        parser = build_parser()
        helps = "".join(
            sub.format_help() for sub in parser._subparsers._group_actions[0].choices.values()
        )
        for flag in ("--config", "--seed", "--condition", "--episodes", "--fractions", "--checkpoint", "--out", "--port"):
            assert flag in helps


class TestTrainCommand:
    def test_train_writes_report_and_checkpoint(self, tmp_path, capsys):
        config = write_tiny_config(tmp_path)
        assert main(["train", "--config", str(config), "--seed", "7"]) == 0
        out = capsys.readouterr().out
        assert "checkpoint:" in out
        assert (tmp_path / "run" / "train_report.json").exists()
        assert (tmp_path / "run" / "checkpoint-final.ckpt").exists()

    def test_train_is_deterministic_given_seed(self, tmp_path, capsys):
        config = write_tiny_config(tmp_path)
        reports = []
        for sub in ("a", "b"):
            assert main(["train", "--config", str(config), "--seed", "3", "--out", str(tmp_path / sub)]) == 0
            reports.append(json.loads((tmp_path / sub / "train_report.json").read_text()))
        reports[0]["checkpoints"] = reports[1]["checkpoints"] = None
        reports[0]["final_checkpoint"] = reports[1]["final_checkpoint"] = None
        assert reports[0] == reports[1]

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        config = write_tiny_config(tmp_path)
        data = json.loads(config.read_text())
        data["learning_rate"] = 0.1  # belongs under "ppo"
        config.write_text(json.dumps(data))
        assert main(["train", "--config", str(config)]) == 2
        assert "learning_rate" in capsys.readouterr().err

    def test_invalid_json_exits_2(self, tmp_path):
        config = tmp_path / "broken.json"
        config.write_text("{not json")
        assert main(["train", "--config", config.as_posix()]) == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["train"])
        assert exc.value.code == 2


class TestEvalCommand:
    def test_eval_writes_csv(self, tiny_character_run, tmp_path, capsys):
        _, report = tiny_character_run
        code = main(
            [
                "eval",
                "--checkpoint",
                report.final_checkpoint,
                "--condition",
                "static",
                "--episodes",
                "5",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        csv_text = (tmp_path / "eval-static.csv").read_text()
        assert csv_text.startswith("task,condition,")
        assert "character,static,5," in csv_text

    def test_missing_checkpoint_exits_2(self, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "nope.ckpt")]) == 2


class TestReplayCommand:
    def test_replay_validates_and_prints(self, tiny_character_run, tmp_path, capsys):
        from coadapt.evaluate import evaluate
        from coadapt.persist import EpisodeLog, load_checkpoint

        _, report = tiny_character_run
        ckpt = load_checkpoint(report.final_checkpoint)
        log_path = tmp_path / "t.jsonl"
        with EpisodeLog(log_path) as log:
            evaluate(ckpt, "character", "adaptive", 2, seed=3, log=log)
        assert main(["replay", "--trace", str(log_path)]) == 0
        out = capsys.readouterr().out
        assert "valid records" in out

    def test_missing_trace_exits_2(self, tmp_path):
        assert main(["replay", "--trace", str(tmp_path / "missing.jsonl")]) == 2

    def test_corrupted_reward_pair_fails(self, tmp_path):
        bad = {
            "schema_version": 1,
            "task": "character",
            "condition": "adaptive",
            "episode": 0,
            "step": 0,
            "rewards": {"user": 1.0, "interface": 0.0},
            "t_d": 0.1,
            "t_m": 0.1,
            "success": False,
        }
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(bad) + "\n")
        assert main(["replay", "--trace", str(path)]) == 2


class TestAblateCommand:
    def test_bad_fractions_exit_2(self, tmp_path):
        config = write_tiny_config(tmp_path)
        assert main(["ablate", "--config", str(config), "--fractions", "abc"]) == 2
