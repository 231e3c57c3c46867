"""Command-line entry point: ``reftraj {plan,train,evaluate,baseline,compare,goal-gen}``.

Exit codes: 0 success, 2 planning failure, 3 training (or tracking) divergence, 4 bad config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data_path
from .env import load_task
from .evaluate import CheckpointMismatch
from .pid import DivergenceError
from .planner import PlanningError
from .train import ABLATIONS, TrainConfig, TrainingDivergence

EXIT_OK, EXIT_PLANNING, EXIT_DIVERGENCE, EXIT_CONFIG = 0, 2, 3, 4


def resolve_task(name: str) -> Path:
    """A task file path, or the name of a bundled task such as ``toy-1``."""
    p = Path(name)
    if p.exists():
        return p
    bundled = Path(str(data_path("tasks", f"{name}.json")))
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no task file or bundled task named {name!r}")


def train_config(args, task_path: Path) -> TrainConfig:
    section = json.loads(task_path.read_text()).get("train", {})
    if args.train_config:
        section.update(json.loads(Path(args.train_config).read_text()))
    section = dict(section, task=str(task_path), seed=args.seed, ablations=tuple(args.ablation or ()))
    if args.budget is not None:
        section["budget"] = args.budget
    if args.out_dir:
        section["out_dir"] = args.out_dir
    return TrainConfig.from_dict(section)


def cmd_plan(args) -> int:
    from .arm import load_world
    from .planner import save_path_csv
    from .train import plan_reference

    task = load_task(resolve_task(args.config))
    if args.world:
        from dataclasses import replace

        world = load_world(args.world)
        start = np.radians(args.start) if args.start else task.start
        goal = np.radians(args.goal) if args.goal else task.goal
        task = replace(task, world=world, start=start, goal=goal)
    ref = plan_reference(task, args.seed)
    out = Path(args.output or Path(args.out_dir or ".") / "path.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_path_csv(ref.path, out)
    print(f"wrote {len(ref.path)} vertices to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .plots import learning_curves
    from .train import train

    task_path = resolve_task(args.config)
    cfg = train_config(args, task_path)
    out = Path(args.out_dir or f"runs/{task_path.stem}-seed{args.seed}")
    cfg.out_dir = str(out)
    trainer = train(cfg, resume_from=args.resume)
    if trainer.eval_rows:
        learning_curves({"seed %d" % args.seed: [trainer.eval_rows]}, out / "learning_curve.svg", title=task_path.stem)
    last = trainer.eval_rows[-1]["success_rate"] if trainer.eval_rows else float("nan")
    print(f"{trainer.total_steps} steps, {trainer.episodes} episodes, last eval success {last:.2f}; outputs in {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluate import evaluate

    task = load_task(resolve_task(args.config))
    out = Path(args.out_dir or "eval")
    metrics, _ = evaluate(args.checkpoint, task, args.episodes, out, seed=args.seed)
    rate = np.mean([m.success for m in metrics])
    print(f"success {rate:.2f}; first episode time {metrics[0].time_to_goal:.3f} s; outputs in {out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    from .evaluate import run_baseline

    task = load_task(resolve_task(args.config))
    out = Path(args.out_dir or "baseline")
    m, _ = run_baseline(task, args.gains, out_dir=out, seed=args.seed)
    print(f"reached {m.reached} collided {m.collided} time {m.time_to_goal:.3f} s; outputs in {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .evaluate import compare_table, evaluate, run_baseline, write_metrics_csv

    if len(args.config) != len(args.checkpoint):
        raise ValueError("give one --checkpoint per --config")
    pairs, rows = [], []
    for cfg_name, ckpt in zip(args.config, args.checkpoint):
        task = load_task(resolve_task(cfg_name))
        base, _ = run_baseline(task, seed=args.seed)
        rl = evaluate(ckpt, task, 1)[0][0]
        pairs.append((task.name, base, rl))
        rows += [base, rl]
    table = compare_table(pairs)
    out = Path(args.out_dir or "compare")
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.md").write_text(table + "\n")
    write_metrics_csv(rows, out / "compare.csv")
    print(table)
    return EXIT_OK


def cmd_goalgen(args) -> int:
    from .goalgen import GoalGenSpec, goal_generalize

    task_path = resolve_task(args.config)
    spec = GoalGenSpec.from_task_file(task_path, width_mm=args.width, height_mm=args.height,
                                      n_train=args.n_train, n_test=args.n_test, top_k=args.top_k)
    cfg = train_config(args, task_path)
    out = Path(args.out_dir or f"runs/{task_path.stem}-goalgen-seed{args.seed}")
    report, _ = goal_generalize(spec, cfg, out)
    print(report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reftraj", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, train=False):
        sp.add_argument("--config", required=True, help="task JSON path or bundled task name (e.g. toy-1)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-dir")
        if train:
            sp.add_argument("--ablation", action="append", choices=ABLATIONS)
            sp.add_argument("--budget", type=int, help="environment step budget (overrides the task file)")
            sp.add_argument("--train-config", help="JSON file with extra training settings")

    sp = sub.add_parser("plan", help="RRT plus shortcutting; writes the path as CSV (degrees)")
    common(sp)
    sp.add_argument("--world", help="override the task's world file")
    sp.add_argument("--start", type=float, nargs="+", help="start angles in degrees")
    sp.add_argument("--goal", type=float, nargs="+", help="goal angles in degrees")
    sp.add_argument("--output", help="CSV path (default OUT_DIR/path.csv)")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("train", help="train a policy on one task")
    common(sp, train=True)
    sp.add_argument("--resume", help="checkpoint to continue from")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="greedy rollouts of a checkpoint with CSV/SVG export")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--episodes", type=int, default=1)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("baseline", help="PID tracking of the planned path")
    common(sp)
    sp.add_argument("--gains", type=float, nargs=3, metavar=("KP", "KI", "KD"))
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("compare", help="baseline vs policy time-to-goal table")
    sp.add_argument("--config", action="append", required=True)
    sp.add_argument("--checkpoint", action="append", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("goal-gen", help="goal-conditioned training over a goal rectangle")
    common(sp, train=True)
    sp.add_argument("--width", type=float, default=100.0, help="mm")
    sp.add_argument("--height", type=float, default=100.0, help="mm")
    sp.add_argument("--n-train", type=int, default=10)
    sp.add_argument("--n-test", type=int, default=50)
    sp.add_argument("--top-k", type=int, default=2)
    sp.set_defaults(func=cmd_goalgen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PlanningError as e:
        print(f"planning failed: {e}", file=sys.stderr)
        return EXIT_PLANNING
    except (TrainingDivergence, DivergenceError) as e:
        print(f"diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ValueError, KeyError, TypeError, FileNotFoundError, json.JSONDecodeError, CheckpointMismatch) as e:
        print(f"bad configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
