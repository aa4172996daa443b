"""Single executable: train / eval / ablate / replay / serve.

Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import EVAL_CONDITIONS, TRAIN_CONDITIONS, load_config
from .core import ConfigurationError
from .persist import CheckpointError, RecordError, load_checkpoint, read_episode_log, validate_record


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coadapt",
        description="Cooperative multi-agent RL for adaptive user interfaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train user and interface policies")
    p_train.add_argument("--config", required=True, help="path to a JSON run config")
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.add_argument("--condition", choices=TRAIN_CONDITIONS, default=None, help="override the training condition")
    p_train.add_argument("--out", default=None, help="override the output directory")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p_eval.add_argument("--checkpoint", required=True, help="path to a .ckpt file")
    p_eval.add_argument("--condition", choices=EVAL_CONDITIONS, default="adaptive", help="interface condition")
    p_eval.add_argument("--episodes", type=int, default=1000, help="number of evaluation episodes")
    p_eval.add_argument("--seed", type=int, default=0, help="evaluation seed")
    p_eval.add_argument("--out", default=None, help="output directory (default: checkpoint directory)")
    p_eval.set_defaults(func=cmd_eval)

    p_ablate = sub.add_parser("ablate", help="goal-holdout generalization ablation")
    p_ablate.add_argument("--config", required=True, help="path to a JSON run config")
    p_ablate.add_argument("--fractions", default="0.125,0.25,0.5,1.0", help="comma-separated goal fractions in (0,1]")
    p_ablate.add_argument("--episodes", type=int, default=500, help="evaluation episodes per fraction")
    p_ablate.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_ablate.add_argument("--out", default=None, help="output directory")
    p_ablate.set_defaults(func=cmd_ablate)

    p_replay = sub.add_parser("replay", help="validate and pretty-print a trace or episode log")
    p_replay.add_argument("--trace", required=True, help="line-delimited JSON trace/log file")
    p_replay.set_defaults(func=cmd_replay)

    p_serve = sub.add_parser("serve", help="serve a trained interface policy to human sessions")
    p_serve.add_argument("--checkpoint", required=True, help="path to a .ckpt file")
    p_serve.add_argument("--port", type=int, default=8000, help="TCP port to bind")
    p_serve.add_argument("--condition-allowlist", default="adaptive,static,random", help="conditions sessions may request")
    p_serve.add_argument("--out", default=None, help="directory for session logs")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def cmd_train(args) -> int:
    from .rl import train

    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if args.condition is not None:
        config = config.replace(condition=args.condition)
    if args.out is not None:
        config = config.replace(out_dir=args.out)
    report = train(config)
    print(f"final success rate: {report.final_success():.3f}")
    print(f"checkpoint: {report.final_checkpoint}")
    return 0


def cmd_eval(args) -> int:
    from .evaluate import EvalMetrics, evaluate

    ckpt = load_checkpoint(args.checkpoint)
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = evaluate(ckpt, ckpt.task, args.condition, args.episodes, seed=args.seed)
    csv_path = out_dir / f"eval-{args.condition}.csv"
    csv_path.write_text(EvalMetrics.CSV_HEADER + "\n" + metrics.csv_row() + "\n")
    json_path = out_dir / f"eval-{args.condition}.json"
    json_path.write_text(json.dumps(metrics.to_dict(), indent=1, sort_keys=True) + "\n")
    print(EvalMetrics.CSV_HEADER)
    print(metrics.csv_row())
    return 0


def cmd_ablate(args) -> int:
    from .evaluate import goal_holdout_ablation

    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if args.out is not None:
        config = config.replace(out_dir=args.out)
    try:
        fractions = [float(f) for f in args.fractions.split(",") if f.strip()]
    except ValueError:
        raise ConfigurationError(f"--fractions must be comma-separated floats, got {args.fractions!r}")
    if not fractions:
        raise ConfigurationError("--fractions is empty")
    curve = goal_holdout_ablation(config, sorted(fractions), eval_episodes=args.episodes)
    out_path = Path(config.out_dir) / "ablation.json"
    curve.save(out_path)
    print(json.dumps(curve.to_dict(), indent=1, sort_keys=True))
    return 0


def cmd_replay(args) -> int:
    path = Path(args.trace)
    if not path.exists():
        raise ConfigurationError(f"trace file not found: {path}")
    n = 0
    for record in read_episode_log(path):
        if "rewards" in record:
            validate_record(record)
            print(
                f"episode {record['episode']:>4} step {record['step']:>3} "
                f"reward {record['rewards']['user']:+.4f} "
                f"t_d {record['t_d']:.3f}s t_m {record['t_m']:.3f}s "
                f"success={record['success']}"
            )
        else:  # qualitative trace entries
            kind = record.get("kind", "?")
            print(f"step {record.get('step', '?'):>3} {kind}")
        n += 1
    print(f"{n} valid records")
    return 0


def cmd_serve(args) -> int:
    from .serve import SessionService, run_server

    ckpt = load_checkpoint(args.checkpoint)
    allowlist = tuple(c.strip() for c in args.condition_allowlist.split(",") if c.strip())
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    service = SessionService(ckpt, condition_allowlist=allowlist, log_path=out_dir / "sessions.jsonl")
    try:
        run_server(service, port=args.port)
    except OSError as e:
        print(f"cannot bind port {args.port}: {e}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, CheckpointError, RecordError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"runtime failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
