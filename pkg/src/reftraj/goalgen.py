"""Goal-conditioned training over goals sampled in a Cartesian rectangle, and its success report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .arm import check_collision, check_joint_limits, forward_kinematics, solve_ik
from .env import TaskSpec, load_task
from .evaluate import rollout_policy
from .planner import PlanningError
from .train import TrainConfig, Trainer, plan_reference


class GoalSamplingError(RuntimeError):
    pass


@dataclass
class GoalGenSpec:
    task: TaskSpec
    width_mm: float = 100.0
    height_mm: float = 100.0
    n_train: int = 10
    n_test: int = 50
    top_k: int = 2
    center: np.ndarray | None = None  # defaults to the end-effector position at the task goal
    u: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    v: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    max_attempts: int = 200  # per goal

    def __post_init__(self):
        if self.width_mm < 0 or self.height_mm < 0:
            raise ValueError("rectangle sides must be non-negative")
        if self.n_train < 1 or self.n_test < 0:
            raise ValueError("need at least one training goal")
        if self.center is None:
            self.center = forward_kinematics(self.task.world.chain, self.task.goal).end_effector
        self.center = np.asarray(self.center, dtype=float)
        self.u = np.asarray(self.u, dtype=float) / np.linalg.norm(self.u)
        self.v = np.asarray(self.v, dtype=float) / np.linalg.norm(self.v)

    @classmethod
    def from_task_file(cls, path, **overrides) -> "GoalGenSpec":
        task = load_task(path)
        rect = json.loads(Path(path).read_text()).get("goal_rectangle", {})
        kw = {k: rect[k] for k in ("center", "u", "v") if k in rect}
        kw.update(overrides)
        return cls(task, **kw)


def sample_goals(spec: GoalGenSpec, count: int, rng) -> list[np.ndarray]:
    """Joint-space goals whose end effector lies uniformly in the rectangle.

    Each point is solved by IK seeded at the task goal; points whose solution fails, violates
    limits or collides are redrawn.
    """
    chain, world = spec.task.world.chain, spec.task.world
    goals = []
    w, h = spec.width_mm / 1000.0, spec.height_mm / 1000.0
    for _ in range(count):
        for _attempt in range(spec.max_attempts):
            x, y = rng.random(2) - 0.5
            target = spec.center + x * w * spec.u + y * h * spec.v
            q = solve_ik(chain, target, spec.task.goal)
            if q is None or check_joint_limits(chain, q) or check_collision(world, q):
                continue
            if np.linalg.norm(q - spec.task.start) <= spec.task.final_curriculum().r_goal:
                continue
            goals.append(q)
            break
        else:
            raise GoalSamplingError(f"no valid IK goal after {spec.max_attempts} draws in the rectangle")
    return goals


@dataclass
class GoalGenReport:
    width_mm: float
    height_mm: float
    n_train: int
    train_success: int
    n_test: int
    test_success: int

    @property
    def overall(self) -> float:
        return (self.train_success + self.test_success) / (self.n_train + self.n_test)

    def table(self) -> str:
        return "\n".join([
            "| W x H [mm] | N | Train | Test | Overall |",
            "|---|---|---|---|---|",
            f"| {self.width_mm:g} x {self.height_mm:g} | {self.n_train} | {self.train_success}/{self.n_train} "
            f"| {self.test_success}/{self.n_test} | {self.overall:.3f} |",
        ])

    def to_dict(self) -> dict:
        return {"width_mm": self.width_mm, "height_mm": self.height_mm, "n_train": self.n_train,
                "train_success": self.train_success, "n_test": self.n_test, "test_success": self.test_success,
                "overall": self.overall}


def goal_tasks(spec: GoalGenSpec, goals, prefix: str) -> list[TaskSpec]:
    return [replace(spec.task, goal=g, name=f"{spec.task.name}-{prefix}{i}") for i, g in enumerate(goals)]


def build_trainer(spec: GoalGenSpec, cfg: TrainConfig, rng=None) -> tuple[Trainer, list[TaskSpec]]:
    rng = rng if rng is not None else np.random.default_rng([cfg.seed, 5])
    train_tasks = goal_tasks(spec, sample_goals(spec, spec.n_train, rng), "train")
    refs = []
    for i, t in enumerate(train_tasks):
        try:
            refs.append(plan_reference(t, cfg.seed, i))
        except PlanningError as e:
            raise PlanningError(f"goal {i}: {e}") from e
    cfg = replace(cfg, goal_conditioned=True, top_k=spec.top_k)
    return Trainer(cfg, train_tasks, refs), train_tasks


def goal_generalize(spec: GoalGenSpec, cfg: TrainConfig, out_dir=None) -> tuple[GoalGenReport, Trainer]:
    """Train one goal-conditioned agent on ``n_train`` goals, then test it on fresh goals."""
    rng = np.random.default_rng([cfg.seed, 5])
    trainer, train_tasks = build_trainer(spec, cfg, rng)
    trainer.run(cfg.budget)
    test_tasks = goal_tasks(spec, sample_goals(spec, spec.n_test, rng), "test")

    def successes(tasks):
        return sum(rollout_policy(trainer.agent, t, True).success for t in tasks)

    report = GoalGenReport(spec.width_mm, spec.height_mm, spec.n_train, successes(train_tasks),
                           spec.n_test, successes(test_tasks))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        trainer.save(out / "checkpoint.npz")
        trainer.write_metrics(out)
        (out / "goalgen_report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        (out / "goalgen_report.md").write_text(report.table() + "\n")
    return report, trainer
