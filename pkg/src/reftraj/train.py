"""Training loop: plan a reference, then alternate rollouts and TD3 update cycles.

Everything that influences the future of a run lives on the :class:`Trainer` and is
written to the checkpoint, so a resumed run reproduces the uninterrupted one exactly.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .agent import TD3Agent, TD3Config
from .env import (
    ReachEnv,
    ReferenceTrajectory,
    TaskSpec,
    agent_path,
    curriculum_on_goal,
    curriculum_state,
    load_task,
    maybe_update_reference,
)
from .planner import rrt_plan, shortcut
from .replay import EpisodeRecord, PrioritizedReplayBuffer, TopKBuffer

log = logging.getLogger(__name__)

ABLATIONS = ("no-ref", "no-curriculum", "no-self-imitation", "no-ref-update")

EPISODE_FIELDS = [
    "episode", "total_steps", "steps", "return", "return_f", "reached", "collided",
    "r_goal", "w_collision", "from_start", "goal_id", "ref_updated", "self_imitation",
]
EVAL_FIELDS = ["total_steps", "episode", "success_rate", "mean_return_f", "mean_steps", "collision_rate"]


class TrainingDivergence(RuntimeError):
    pass


@dataclass
class TrainConfig:
    task: str | None = None
    budget: int = 1_000_000
    seed: int = 0
    learning_starts: int = 1000
    random_steps: int = 1000
    update_cadence: str = "episode"  # "episode": one grad step per new sample at each episode end
    td3: TD3Config = field(default_factory=TD3Config)
    buffer_size: int = 100_000
    per_alpha: float = 0.6
    per_beta: float = 0.4
    per_eps: float = 1e-6
    top_k: int = 5
    si_fraction: float = 0.2  # multi-goal self-imitation starts above this share of filled buffers
    ablations: tuple = ()
    goal_conditioned: bool = False
    eval_interval: int = 5000
    eval_episodes: int = 10
    eval_noise: float = 0.05  # uniform start perturbation (rad) for all but the first eval episode
    stop_at_success: float | None = None  # end the run once an evaluation reaches this rate
    checkpoint_interval: int | None = None
    out_dir: str | None = None

    def __post_init__(self):
        self.ablations = tuple(self.ablations)
        unknown = set(self.ablations) - set(ABLATIONS)
        if unknown:
            raise ValueError(f"unknown ablations {sorted(unknown)}")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.update_cadence not in ("episode", "samples"):
            raise ValueError("update_cadence is 'episode' or 'samples'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["td3"]["hidden"] = list(self.td3.hidden)
        d["ablations"] = list(self.ablations)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["td3"] = TD3Config(**d.get("td3", {}))
        return cls(**d)


def apply_ablations(task: TaskSpec, ablations) -> TaskSpec:
    if "no-ref" in ablations:
        task = replace(task, weights=replace(task.weights, w_path=0.0, w_progress=0.0))
    if "no-curriculum" in ablations:
        task = replace(task, curriculum=replace(task.curriculum, enabled=False))
    return task


def plan_reference(task: TaskSpec, seed: int = 0, goal_id: int = 0) -> ReferenceTrajectory:
    cfg = replace(task.rrt, rng_seed=task.rrt.rng_seed + 1009 * seed + goal_id)
    raw = rrt_plan(task.world, task.start, task.goal, cfg)
    smooth = shortcut(task.world, raw, task.shortcut, np.random.default_rng([seed, goal_id, 17]))
    return ReferenceTrajectory.from_path(smooth, task.division_interval)


def _rng_state(rng) -> str:
    return json.dumps(rng.bit_generator.state)


def _rng_from_state(s: str):
    rng = np.random.default_rng()
    rng.bit_generator.state = json.loads(s)
    return rng


class Trainer:
    """One training run over one or more goals of the same world."""

    def __init__(self, cfg: TrainConfig, tasks: list[TaskSpec] | TaskSpec | None = None, references=None):
        self.cfg = cfg
        if tasks is None:
            tasks = [load_task(cfg.task)]
        elif isinstance(tasks, TaskSpec):
            tasks = [tasks]
        self.tasks = [apply_ablations(t, cfg.ablations) for t in tasks]
        base = self.tasks[0]
        self.n_goals = len(self.tasks)
        self.references = references or [plan_reference(t, cfg.seed, i) for i, t in enumerate(self.tasks)]
        self.curriculum = curriculum_state(base.curriculum, base.weights.w_collision)
        self.env = ReachEnv(base, self.references[0], self.curriculum, cfg.goal_conditioned)
        self.agent = TD3Agent(self.env.obs_dim, base.dof, cfg.td3, np.random.default_rng([cfg.seed, 1]))
        self.buffer = PrioritizedReplayBuffer(self.env.obs_dim, base.dof, cfg.buffer_size, cfg.per_alpha, cfg.per_beta, cfg.per_eps)
        self.topk = TopKBuffer(cfg.top_k)
        self.rng = np.random.default_rng([cfg.seed, 2])
        self.total_steps = 0
        self.episodes = 0
        self.pending_samples = 0
        self.next_eval = cfg.eval_interval
        self.evals_done = 0
        self.episode_rows: list[dict] = []
        self.eval_rows: list[dict] = []
        self.stopped = False

    # self-imitation gate

    def self_imitation_active(self) -> bool:
        if "no-self-imitation" in self.cfg.ablations or not len(self.topk):
            return False
        if self.n_goals == 1:
            return self.topk.full(1)
        return self.topk.fraction_filled(self.n_goals) > self.cfg.si_fraction

    def run(self, budget: int | None = None) -> "Trainer":
        budget = self.cfg.budget if budget is None else budget
        while self.total_steps < budget and not self.stopped:
            self.run_episode()
            if self.cfg.checkpoint_interval and self.cfg.out_dir and self.episodes % self.cfg.checkpoint_interval == 0:
                self.save(Path(self.cfg.out_dir) / "checkpoint.npz")
        return self

    def run_episode(self) -> dict | None:
        cfg, rng, env = self.cfg, self.rng, self.env
        gid = int(rng.integers(self.n_goals)) if self.n_goals > 1 else 0
        task = self.tasks[gid]
        env.task, env.reference, env.curriculum = task, self.references[gid], self.curriculum
        obs = env.reset(rng)
        from_start = bool(np.array_equal(env.state.angles, task.start))
        if env.terminal() == "goal":
            return None  # reset landed inside the goal region: nothing to learn from
        n = task.dof
        O, A, R, O2, D, visited = [], [], [], [], [], [env.state.angles]
        ret_f = 0.0
        collided = False
        info = {}
        while True:
            if self.total_steps < cfg.random_steps:
                a = rng.uniform(-1.0, 1.0, n)
            else:
                a = self.agent.select_action(obs, True, rng)
            obs2, r, status, info = env.step(a)
            done = 1.0 if status == "goal" else 0.0
            self.buffer.add(obs, a, r, obs2, done)
            O.append(obs), A.append(a), R.append(r), O2.append(obs2), D.append(done)
            visited.append(env.state.angles)
            ret_f += info["reward_f"]
            collided |= info["collided"]
            obs = obs2
            self.total_steps += 1
            self.pending_samples += 1
            if status is not None:
                break
        steps = len(R)
        self._update_cycle(steps)
        ep = EpisodeRecord(np.array(O), np.array(A), np.array(R), np.array(O2), np.array(D), info["reached"], collided, gid)
        if from_start:
            self.topk.offer(ep)
        ref_updated = False
        if ep.reached_goal:
            if from_start and "no-ref-update" not in cfg.ablations:
                path = agent_path(visited, task.world, task.goal)
                self.references[gid], ref_updated = maybe_update_reference(
                    self.references[gid], ep, path, task.division_interval)
            self.curriculum = curriculum_on_goal(self.curriculum, task.curriculum, task.weights.w_collision)
        row = {
            "episode": self.episodes, "total_steps": self.total_steps, "steps": steps,
            "return": ep.total_reward, "return_f": ret_f, "reached": int(ep.reached_goal),
            "collided": int(collided), "r_goal": env.curriculum.r_goal, "w_collision": env.curriculum.w_collision,
            "from_start": int(from_start), "goal_id": gid, "ref_updated": int(ref_updated),
            "self_imitation": int(self.self_imitation_active()),
        }
        self.episode_rows.append(row)
        self.episodes += 1
        if cfg.eval_interval and self.total_steps >= self.next_eval:
            self.evaluate_now()
        return row

    def _update_cycle(self, steps: int) -> None:
        cfg = self.cfg
        if len(self.buffer) < max(cfg.learning_starts, cfg.td3.batch_size):
            return
        if cfg.update_cadence == "episode":
            n_updates, self.pending_samples = steps, 0
        else:
            n_updates = (self.pending_samples // cfg.learning_starts) * cfg.learning_starts
            self.pending_samples -= n_updates
        demos = self.topk if self.self_imitation_active() else None
        for _ in range(n_updates):
            self.agent.train_step(self.buffer, self.rng, demos)
        if n_updates and not np.all(np.isfinite(self.agent.actor.params)):
            raise TrainingDivergence(f"non-finite actor parameters after {self.total_steps} steps")
        if n_updates and not np.all(np.isfinite(self.agent.critic1.params)):
            raise TrainingDivergence(f"non-finite critic parameters after {self.total_steps} steps")

    def evaluate_now(self) -> dict:
        from .evaluate import rollout_policy

        cfg = self.cfg
        eval_rng = np.random.default_rng([cfg.seed, 3, self.evals_done])
        results = []
        if self.n_goals > 1:
            for task in self.tasks:
                results.append(rollout_policy(self.agent, task, cfg.goal_conditioned))
        else:
            task = self.tasks[0]
            for i in range(cfg.eval_episodes):
                start = None
                if cfg.eval_noise > 0 and i > 0:
                    start = task.start + eval_rng.uniform(-cfg.eval_noise, cfg.eval_noise, task.dof)
                results.append(rollout_policy(self.agent, task, cfg.goal_conditioned, start=start))
        row = {
            "total_steps": self.total_steps,
            "episode": self.episodes,
            "success_rate": float(np.mean([r.success for r in results])),
            "mean_return_f": float(np.mean([r.return_f for r in results])),
            "mean_steps": float(np.mean([r.steps for r in results])),
            "collision_rate": float(np.mean([r.collided for r in results])),
        }
        self.eval_rows.append(row)
        self.evals_done += 1
        while self.next_eval <= self.total_steps:
            self.next_eval += cfg.eval_interval
        if cfg.stop_at_success is not None and row["success_rate"] >= cfg.stop_at_success:
            self.stopped = True
        log.info("eval @%d: success %.2f", self.total_steps, row["success_rate"])
        return row

    # persistence

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        d = {}
        d.update(self.agent.state_dict())
        d.update(self.buffer.state_dict())
        d.update(self.topk.state_dict())
        for i, ref in enumerate(self.references):
            d[f"ref/{i}/path"] = ref.path
            d[f"ref/{i}/meta"] = np.array([-1 if ref.steps is None else ref.steps, ref.reward])
        meta = {
            "config": self.cfg.to_dict(),
            "tasks": [task_to_dict(t) for t in self.tasks],
            "rng": _rng_state(self.rng),
            "t_goal": self.curriculum.t_goal,
            "total_steps": self.total_steps,
            "episodes": self.episodes,
            "pending_samples": self.pending_samples,
            "next_eval": self.next_eval,
            "evals_done": self.evals_done,
            "stopped": self.stopped,
            "episode_rows": self.episode_rows,
            "eval_rows": self.eval_rows,
        }
        d["meta"] = np.array(json.dumps(meta))
        with open(path, "wb") as f:
            np.savez(f, **d)

    @classmethod
    def load(cls, path, cfg: TrainConfig | None = None) -> "Trainer":
        from .agent import TD3Agent

        with np.load(path) as z:
            d = {k: z[k] for k in z.files}
        meta = json.loads(str(d["meta"]))
        cfg = cfg or TrainConfig.from_dict(meta["config"])
        tasks = [task_from_dict(t) for t in meta["tasks"]]
        refs = []
        for i, t in enumerate(tasks):
            steps, reward = d[f"ref/{i}/meta"]
            refs.append(ReferenceTrajectory.from_path(d[f"ref/{i}/path"], t.division_interval,
                                                      None if steps < 0 else int(steps), float(reward)))
        self = cls.__new__(cls)
        self.cfg = cfg
        self.tasks = tasks
        self.n_goals = len(tasks)
        self.references = refs
        base = tasks[0]
        self.curriculum = curriculum_state(base.curriculum, base.weights.w_collision, meta["t_goal"])
        self.env = ReachEnv(base, refs[0], self.curriculum, cfg.goal_conditioned)
        self.agent = TD3Agent.from_state_dict(d, cfg.td3)
        self.buffer = PrioritizedReplayBuffer.from_state_dict(d)
        self.topk = TopKBuffer.from_state_dict(d)
        self.rng = _rng_from_state(meta["rng"])
        for k in ("total_steps", "episodes", "pending_samples", "next_eval", "evals_done", "stopped",
                  "episode_rows", "eval_rows"):
            setattr(self, k, meta[k])
        return self

    def write_metrics(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "episodes.csv", EPISODE_FIELDS, self.episode_rows)
        write_csv(out / "evals.csv", EVAL_FIELDS, self.eval_rows)


def write_csv(path, fields, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def task_to_dict(task: TaskSpec) -> dict:
    from .arm import world_to_dict

    return {
        "world": world_to_dict(task.world),
        "start": task.start.tolist(),
        "goal": task.goal.tolist(),
        "dt": task.dt,
        "max_steps": task.max_steps,
        "p_reset": task.p_reset,
        "weights": asdict(task.weights),
        "curriculum": asdict(task.curriculum),
        "division_interval": task.division_interval,
        "rrt": asdict(task.rrt),
        "shortcut": asdict(task.shortcut),
        "pid_gains": list(task.pid_gains),
        "capture_radius": task.capture_radius,
        "pid_max_steps": task.pid_max_steps,
        "name": task.name,
    }


def task_from_dict(d: dict) -> TaskSpec:
    from .arm import world_from_dict
    from .env import CurriculumSchedule, RewardWeights
    from .planner import RRTConfig, ShortcutConfig

    return TaskSpec(
        world=world_from_dict(d["world"]),
        start=np.array(d["start"]),
        goal=np.array(d["goal"]),
        dt=d["dt"],
        max_steps=d["max_steps"],
        p_reset=d["p_reset"],
        weights=RewardWeights(**d["weights"]),
        curriculum=CurriculumSchedule(**d["curriculum"]),
        division_interval=d["division_interval"],
        rrt=RRTConfig(**d["rrt"]),
        shortcut=ShortcutConfig(**d["shortcut"]),
        pid_gains=tuple(d["pid_gains"]),
        capture_radius=d["capture_radius"],
        pid_max_steps=d.get("pid_max_steps"),
        name=d["name"],
    )


def train(cfg: TrainConfig, tasks=None, resume_from=None) -> Trainer:
    """Run (or resume) training up to ``cfg.budget`` steps; writes metrics and a checkpoint to ``cfg.out_dir``."""
    trainer = Trainer.load(resume_from, cfg) if resume_from else Trainer(cfg, tasks)
    trainer.run(cfg.budget)
    if cfg.out_dir:
        trainer.save(Path(cfg.out_dir) / "checkpoint.npz")
        trainer.write_metrics(cfg.out_dir)
    return trainer
