"""Seeded experiment runs with an on-disk result cache.

A run is identified by its task, ablations, seed, budget and early-stop setting together with a
hash of the package source, so cached summaries are reused only for identical code and settings.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from . import data_path
from .env import load_task
from .evaluate import metrics_from_trajectory, rollout_policy
from .goalgen import GoalGenSpec, goal_generalize
from .train import TrainConfig, Trainer

DEFAULT_CACHE = Path(os.environ.get("REFTRAJ_CACHE", Path.cwd() / ".experiment_cache"))


def source_hash() -> str:
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.rglob("*")):
        if p.suffix in (".py", ".json") and "__pycache__" not in p.parts:
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()[:16]


def task_file(name: str) -> Path:
    return Path(str(data_path("tasks", f"{name}.json")))


def run_key(spec: dict) -> str:
    return hashlib.sha256(json.dumps(dict(spec, code=source_hash()), sort_keys=True).encode()).hexdigest()[:20]


def summarize(trainer: Trainer) -> dict:
    task = trainer.tasks[0]
    res = rollout_policy(trainer.agent, task, trainer.cfg.goal_conditioned)
    m = metrics_from_trajectory(res.trajectory, task.dt, task.name, "rl")
    return {
        "eval_rows": trainer.eval_rows,
        "episodes": [[r["total_steps"], r["return_f"], r["reached"], r["collided"]] for r in trainer.episode_rows],
        "total_steps": trainer.total_steps,
        "final_rollout": {"success": bool(res.success), "steps": m.steps, "time": m.time_to_goal,
                          "max_accel": m.max_accel.tolist()},
    }


def run_variant(task: str, seed: int, ablations=(), budget: int = 150_000, stop_at_success=None,
                cache_dir: Path | None = DEFAULT_CACHE, recompute: bool = False, log=None) -> dict:
    """Train one seed on a bundled task (cached) and return its summary dict."""
    spec = {"task": task, "seed": seed, "ablations": sorted(ablations), "budget": budget, "stop": stop_at_success}
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"{task}-{'-'.join(spec['ablations']) or 'full'}-s{seed}-{run_key(spec)}.json"
        if path.exists() and not recompute:
            return json.loads(path.read_text())
    cfg = TrainConfig(task=str(task_file(task)), budget=budget, seed=seed, ablations=tuple(ablations),
                      stop_at_success=stop_at_success)
    trainer = Trainer(cfg, load_task(task_file(task)))
    trainer.run()
    out = dict(spec, **summarize(trainer))
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(out))
    if log:
        log(f"{task} {spec['ablations'] or 'full'} seed {seed}: {trainer.total_steps} steps, "
            f"steps-to-90% {steps_to_success(out)}")
    return out


def run_goalgen(task: str, seed: int = 0, budget: int = 300_000, width_mm=100.0, height_mm=100.0, n_train=10,
                n_test=50, cache_dir: Path | None = DEFAULT_CACHE, recompute: bool = False, log=None) -> dict:
    """Goal-conditioned training over the task's goal rectangle (cached); returns the report dict."""
    spec_key = {"kind": "goalgen", "task": task, "seed": seed, "budget": budget, "w": width_mm, "h": height_mm,
                "n_train": n_train, "n_test": n_test}
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"{task}-goalgen-s{seed}-{run_key(spec_key)}.json"
        if path.exists() and not recompute:
            return json.loads(path.read_text())
    spec = GoalGenSpec.from_task_file(task_file(task), width_mm=width_mm, height_mm=height_mm,
                                      n_train=n_train, n_test=n_test)
    cfg = TrainConfig(task=str(task_file(task)), budget=budget, seed=seed)
    report, trainer = goal_generalize(spec, cfg)
    out = dict(spec_key, report=report.to_dict(), eval_rows=trainer.eval_rows, total_steps=trainer.total_steps)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(out))
    if log:
        log(f"{task} goal generalization seed {seed}: overall {report.overall:.3f}")
    return out


def steps_to_success(summary: dict, threshold: float = 0.9) -> float:
    """Environment steps at the first evaluation with success rate >= threshold (inf if never)."""
    for row in summary["eval_rows"]:
        if row["success_rate"] >= threshold:
            return row["total_steps"]
    return math.inf


def final_success(summary: dict) -> float:
    return summary["eval_rows"][-1]["success_rate"] if summary["eval_rows"] else 0.0


def late_return(summary: dict, fraction: float = 0.1) -> float:
    """Mean task-reward return of the training episodes that end in the last ``fraction`` of the budget."""
    eps = np.array(summary["episodes"], dtype=float)
    cutoff = summary["budget"] * (1.0 - fraction)
    late = eps[eps[:, 0] > cutoff]
    return float(late[:, 1].mean()) if len(late) else math.nan
